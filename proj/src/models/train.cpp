#include "latpoison/models/train.hpp"

#include <numeric>
#include <stdexcept>

#include "latpoison/autodiff/ops.hpp"

namespace latpoison::models {

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

double classifier_loss(const ClassifierParams& clf, const data::Dataset& ds,
                       std::span<const std::size_t> batch) {
    return ad::bce(classify(ds.image_batch(batch), clf), ds.label_batch(batch)).item();
}

}  // namespace

void TrainConfig::validate() const {
    if (!(alpha >= 0.0)) {
        throw std::invalid_argument("train config: alpha must be >= 0");
    }
    if (!(beta >= 0.0)) {
        throw std::invalid_argument("train config: beta must be >= 0");
    }
    if (!(lr > 0.0)) {
        throw std::invalid_argument("train config: lr must be > 0");
    }
    if (batch_size == 0 || latent_dim == 0) {
        throw std::invalid_argument("train config: batch_size and latent_dim must be positive");
    }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
    auto order = all_indices(n);
    Rng rng(Rng::derive(seed, 1000 + epoch));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

VaeTrainer::VaeTrainer(const data::Dataset& dataset, const TrainConfig& config,
                       std::optional<ClassifierParams> recon_classifier)
    : dataset_(dataset),
      config_(config),
      recon_classifier_(std::move(recon_classifier)),
      vae_([&] {
          Rng init(Rng::derive(config.seed, streams::kVaeInit));
          return VaeParams::init(dataset.image_dim(), kEncoderHidden, config.latent_dim,
                                 kDecoderHidden, init);
      }()),
      optimizer_(vae_.parameters(), config.lr),
      noise_(Rng::derive(config.seed, streams::kVaeNoise)) {
    config_.validate();
    dataset_.validate();
    if (recon_classifier_) {
        recon_classifier_->validate();
        if (recon_classifier_->input_dim() != dataset.image_dim()) {
            throw ad::ShapeError("train_vae", "reconstruction classifier expects width " +
                                                  std::to_string(recon_classifier_->input_dim()) +
                                                  ", images have " +
                                                  std::to_string(dataset.image_dim()));
        }
        if (!(config_.beta > 0.0)) {
            throw std::invalid_argument(
                "train_vae: a reconstruction classifier requires beta > 0");
        }
    }
}

ad::Tensor VaeTrainer::objective(std::span<const std::size_t> batch, Rng& noise) const {
    const auto x = dataset_.image_batch(batch);
    const auto enc = encode(x, vae_);
    const auto z = sample_latent(enc.mu, enc.log_var, noise);
    const auto x_hat = decode(z, vae_);
    auto loss = vae_loss(x, x_hat, enc.mu, enc.log_var, config_.alpha);
    if (recon_classifier_) {
        const auto y_hat_hat = classify(x_hat, *recon_classifier_);
        loss = ad::add(loss, ad::scale(ad::bce(y_hat_hat, dataset_.label_batch(batch)),
                                       config_.beta));
    }
    return loss;
}

double VaeTrainer::step(std::span<const std::size_t> batch) {
    const auto loss = objective(batch, noise_);
    optimizer_.zero_grad();
    loss.backward();
    optimizer_.step();
    return loss.item();
}

double VaeTrainer::evaluate(std::span<const std::size_t> batch) const {
    Rng noise = noise_;
    return objective(batch, noise).item();
}

ClassifierParams train_classifier(const data::Dataset& dataset, const TrainConfig& config,
                                  ClassifierRole role, TrainHistory* history) {
    config.validate();
    dataset.require_both_classes("train_classifier");
    const std::uint64_t seed = Rng::derive(
        config.seed,
        role == ClassifierRole::attack ? streams::kAttackClassifier : streams::kEvalClassifier);
    Rng init(seed);
    auto clf = ClassifierParams::init(dataset.image_dim(), kClassifierHidden, role, init);
    ad::Adam optimizer(clf.parameters(), config.lr);
    const auto everything = all_indices(dataset.size());
    if (history) {
        history->initial_loss = classifier_loss(clf, dataset, everything);
        history->epoch_losses.clear();
    }
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double total = 0.0;
        const auto batches = epoch_batches(dataset.size(), config.batch_size, seed, epoch);
        for (const auto& batch : batches) {
            const auto loss =
                ad::bce(classify(dataset.image_batch(batch), clf), dataset.label_batch(batch));
            optimizer.zero_grad();
            loss.backward();
            optimizer.step();
            total += loss.item();
        }
        if (history) {
            history->epoch_losses.push_back(total / static_cast<double>(batches.size()));
        }
    }
    for (auto& p : clf.parameters()) {
        p.zero_grad();
    }
    return clf;
}

VaeParams train_vae(const data::Dataset& dataset, const TrainConfig& config,
                    const std::optional<ClassifierParams>& recon_classifier,
                    TrainHistory* history) {
    VaeTrainer trainer(dataset, config, recon_classifier);
    if (history) {
        history->initial_loss = trainer.evaluate(all_indices(dataset.size()));
        history->epoch_losses.clear();
    }
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double total = 0.0;
        const auto batches = epoch_batches(dataset.size(), config.batch_size, config.seed, epoch);
        for (const auto& batch : batches) {
            total += trainer.step(batch);
        }
        if (history) {
            history->epoch_losses.push_back(total / static_cast<double>(batches.size()));
        }
    }
    auto vae = trainer.params();
    for (auto& p : vae.parameters()) {
        p.zero_grad();
    }
    return vae;
}

double reconstruction_bce(const VaeParams& vae, const data::Dataset& dataset) {
    const auto x = dataset.image_batch();
    const auto x_hat = decode(encode(x, vae).mu, vae);
    return ad::bce(x_hat, x).item();
}

double accuracy(const ClassifierParams& classifier, const data::Dataset& dataset) {
    const auto output = classify(dataset.image_batch(), classifier);
    const auto scores = output.values();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        correct += (scores[i] >= 0.5 ? 1 : 0) == dataset.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

}  // namespace latpoison::models
