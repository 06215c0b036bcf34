#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "latpoison/autodiff/adam.hpp"
#include "latpoison/data/dataset.hpp"
#include "latpoison/models/networks.hpp"

namespace latpoison::models {

struct TrainConfig {
    double alpha = 0.1;       // KL weight
    double beta = 1.0;        // reconstruction-classification weight
    double lr = 2e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 20;
    std::size_t latent_dim = 32;
    std::uint64_t seed = 1;

    void validate() const;
};

// Default MLP widths.
inline const std::vector<std::size_t> kEncoderHidden{256, 128};
inline const std::vector<std::size_t> kDecoderHidden{128, 256};
inline const std::vector<std::size_t> kClassifierHidden{128, 64};

struct TrainHistory {
    double initial_loss = 0.0;          // before the first update
    std::vector<double> epoch_losses;   // mean mini-batch loss per epoch
};

// Mini-batches for one epoch: a permutation seeded from (seed, epoch), cut
// into consecutive chunks of batch_size (the last one may be shorter).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

// Incremental VAE optimizer; one call to step() is one Adam update on J_vae
// (plus beta * BCE(y, classify(decode(z))) when a frozen reconstruction
// classifier is attached).
class VaeTrainer {
  public:
    VaeTrainer(const data::Dataset& dataset, const TrainConfig& config,
               std::optional<ClassifierParams> recon_classifier = std::nullopt);

    double step(std::span<const std::size_t> batch);
    // Loss on the given samples without updating anything, including the
    // noise stream.
    double evaluate(std::span<const std::size_t> batch) const;

    const VaeParams& params() const { return vae_; }
    const TrainConfig& config() const { return config_; }
    bool has_recon_classifier() const { return recon_classifier_.has_value(); }

  private:
    ad::Tensor objective(std::span<const std::size_t> batch, Rng& noise) const;

    const data::Dataset& dataset_;
    TrainConfig config_;
    std::optional<ClassifierParams> recon_classifier_;
    VaeParams vae_;
    ad::Adam optimizer_;
    Rng noise_;
};

ClassifierParams train_classifier(const data::Dataset& dataset, const TrainConfig& config,
                                  ClassifierRole role, TrainHistory* history = nullptr);

VaeParams train_vae(const data::Dataset& dataset, const TrainConfig& config,
                    const std::optional<ClassifierParams>& recon_classifier = std::nullopt,
                    TrainHistory* history = nullptr);

// Mean per-pixel BCE of decode(encoder mean) against the inputs.
double reconstruction_bce(const VaeParams& vae, const data::Dataset& dataset);

// Fraction of samples whose score lands on the correct side of 0.5.
double accuracy(const ClassifierParams& classifier, const data::Dataset& dataset);

// Seed streams so each stochastic component draws from its own sequence.
namespace streams {
inline constexpr std::uint64_t kVaeInit = 11;
inline constexpr std::uint64_t kVaeNoise = 12;
inline constexpr std::uint64_t kAttackClassifier = 21;
inline constexpr std::uint64_t kEvalClassifier = 22;
inline constexpr std::uint64_t kAttackInit = 31;
}  // namespace streams

}  // namespace latpoison::models
