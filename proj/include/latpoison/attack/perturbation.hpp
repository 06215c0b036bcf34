#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latpoison/autodiff/tensor.hpp"
#include "latpoison/data/dataset.hpp"
#include "latpoison/models/networks.hpp"
#include "latpoison/models/train.hpp"

namespace latpoison::attack {

enum class NormType { l1 = 1, l2 = 2 };
enum class Family { additive, multiplicative };
enum class AttackMode { independent, poisoning, poisoning_class };
// to_class1: label 0 -> 1 (+delta_z); to_class0: label 1 -> 0 (-delta_z).
enum class Direction { to_class1, to_class0 };

std::string to_string(NormType norm);
std::string to_string(Family family);
std::string to_string(AttackMode mode);
NormType parse_norm(const std::string& text);
Family parse_family(const std::string& text);
AttackMode parse_mode(const std::string& text);

struct Perturbation {
    std::vector<double> delta_z;
    // Separate 1 -> 0 vector when trained with two_vectors; empty otherwise.
    std::vector<double> reverse_delta_z;
    NormType norm = NormType::l2;
    Family family = Family::additive;
    double lambda = 0.0;
    AttackMode provenance = AttackMode::independent;

    std::size_t latent_dim() const { return delta_z.size(); }
    bool two_vectors() const { return !reverse_delta_z.empty(); }

    // Throws unless entries are finite and lengths agree.
    void validate() const;

    // Set when the multiplicative mask has no entry below zero, so no latent
    // sign can be flipped.
    std::optional<std::string> warning() const;

    // Applies the transform for the given direction to a [batch x latent] code.
    ad::Tensor apply(const ad::Tensor& z, Direction direction) const;
};

struct AttackConfig {
    double lambda = 0.01;
    double lr = 0.01;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    NormType norm = NormType::l2;
    Family family = Family::additive;
    std::uint64_t seed = 1;
    bool two_vectors = false;
    bool random_init = false;  // small N(0, 0.01^2) start instead of zeros

    void validate() const;
};

// z + delta_z for to_class1, z - delta_z for to_class0.
ad::Tensor apply_additive(const ad::Tensor& z, const ad::Tensor& delta_z, Direction direction);
// z * (1 + delta_z), identical for both directions.
ad::Tensor apply_multiplicative(const ad::Tensor& z, const ad::Tensor& delta_z);

// BCE(1 - y, y_check) + lambda * ||delta_z||_p. y and y_check are [batch x 1].
ad::Tensor attack_loss(const ad::Tensor& y, const ad::Tensor& y_check, const ad::Tensor& delta_z,
                       NormType norm, double lambda);

// Incremental optimizer over delta_z only. Each step encodes the batch with
// the encoder mean, applies the transform (direction from each label), decodes,
// scores with the frozen attack classifier and takes one Adam step on J_z.
// Gradients reach the decoder and classifier parameters but those parameters
// are never updated.
class AttackTrainer {
  public:
    AttackTrainer(const data::Dataset& dataset, const AttackConfig& config, AttackMode mode,
                  models::ClassifierParams attack_classifier, std::size_t latent_dim);

    double step(const models::VaeParams& vae, std::span<const std::size_t> batch);
    // J_z on the given samples at the current delta_z.
    double objective(const models::VaeParams& vae, std::span<const std::size_t> batch) const;

    Perturbation perturbation() const;
    const models::ClassifierParams& attack_classifier() const { return classifier_; }

  private:
    ad::Tensor build(const models::VaeParams& vae, std::span<const std::size_t> batch) const;

    const data::Dataset& dataset_;
    AttackConfig config_;
    AttackMode mode_;
    models::ClassifierParams classifier_;
    ad::Tensor delta_;
    ad::Tensor reverse_delta_;  // undefined unless two_vectors
    ad::Adam optimizer_;
};

// J_z of a finished perturbation over a whole dataset.
double attack_objective(const models::VaeParams& vae, const models::ClassifierParams& classifier,
                        const Perturbation& perturbation, const data::Dataset& dataset);

Perturbation learn_attack_independent(const models::VaeParams& vae,
                                      const models::ClassifierParams& attack_classifier,
                                      const data::Dataset& dataset, const AttackConfig& config);

struct PoisoningResult {
    models::VaeParams vae;
    models::ClassifierParams attack_classifier;
    Perturbation perturbation;
};

// Trains a fresh attack classifier (classifier_config), then alternates per
// mini-batch between a VAE step on J_vae and a delta_z step on J_z.
PoisoningResult learn_attack_poisoning(const data::Dataset& dataset,
                                       const models::TrainConfig& vae_config,
                                       const models::TrainConfig& classifier_config,
                                       const AttackConfig& attack_config);

// As learn_attack_poisoning, with the frozen attack classifier's
// reconstruction-classification term (weight vae_config.beta) in the VAE
// objective. Requires beta > 0.
PoisoningResult learn_attack_poisoning_class(const data::Dataset& dataset,
                                             const models::TrainConfig& vae_config,
                                             const models::TrainConfig& classifier_config,
                                             const AttackConfig& attack_config);

}  // namespace latpoison::attack
