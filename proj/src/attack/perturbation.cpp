#include "latpoison/attack/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "latpoison/autodiff/ops.hpp"

namespace latpoison::attack {

std::string to_string(NormType norm) { return norm == NormType::l1 ? "1" : "2"; }

std::string to_string(Family family) {
    return family == Family::additive ? "additive" : "multiplicative";
}

std::string to_string(AttackMode mode) {
    switch (mode) {
        case AttackMode::independent:
            return "independent";
        case AttackMode::poisoning:
            return "poisoning";
        case AttackMode::poisoning_class:
            return "poisoning+class";
    }
    return "?";
}

NormType parse_norm(const std::string& text) {
    if (text == "1" || text == "l1" || text == "L1") {
        return NormType::l1;
    }
    if (text == "2" || text == "l2" || text == "L2") {
        return NormType::l2;
    }
    throw std::invalid_argument("unknown norm '" + text + "' (expected 1 or 2)");
}

Family parse_family(const std::string& text) {
    if (text == "additive") {
        return Family::additive;
    }
    if (text == "multiplicative") {
        return Family::multiplicative;
    }
    throw std::invalid_argument("unknown family '" + text + "' (expected additive|multiplicative)");
}

AttackMode parse_mode(const std::string& text) {
    if (text == "independent") {
        return AttackMode::independent;
    }
    if (text == "poisoning") {
        return AttackMode::poisoning;
    }
    if (text == "poisoning+class" || text == "poisoning_class") {
        return AttackMode::poisoning_class;
    }
    throw std::invalid_argument("unknown attack mode '" + text +
                                "' (expected independent|poisoning|poisoning+class)");
}

void Perturbation::validate() const {
    if (delta_z.empty()) {
        throw std::invalid_argument("perturbation: delta_z is empty");
    }
    if (two_vectors() && reverse_delta_z.size() != delta_z.size()) {
        throw std::invalid_argument("perturbation: reverse vector length differs from delta_z");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(delta_z.begin(), delta_z.end(), finite) ||
        !std::all_of(reverse_delta_z.begin(), reverse_delta_z.end(), finite)) {
        throw std::invalid_argument("perturbation: non-finite entry");
    }
}

std::optional<std::string> Perturbation::warning() const {
    if (family != Family::multiplicative) {
        return std::nullopt;
    }
    if (std::all_of(delta_z.begin(), delta_z.end(), [](double v) { return v >= 0.0; })) {
        return "multiplicative mask has no negative entry; no latent sign can be flipped";
    }
    return std::nullopt;
}

ad::Tensor Perturbation::apply(const ad::Tensor& z, Direction direction) const {
    const auto delta = ad::Tensor::from({delta_z.size()}, delta_z);
    if (family == Family::multiplicative) {
        return apply_multiplicative(z, delta);
    }
    if (two_vectors() && direction == Direction::to_class0) {
        return apply_additive(z, ad::Tensor::from({reverse_delta_z.size()}, reverse_delta_z),
                              Direction::to_class1);
    }
    return apply_additive(z, delta, direction);
}

void AttackConfig::validate() const {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("attack config: lambda must be >= 0");
    }
    if (!(lr > 0.0)) {
        throw std::invalid_argument("attack config: lr must be > 0");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("attack config: batch_size must be positive");
    }
    if (two_vectors && family != Family::additive) {
        throw std::invalid_argument("attack config: two_vectors applies to the additive family only");
    }
}

ad::Tensor apply_additive(const ad::Tensor& z, const ad::Tensor& delta_z, Direction direction) {
    if (z.shape().size() != 2 || z.dim(1) != delta_z.size()) {
        throw ad::ShapeError("apply_additive", z.shape(), delta_z.shape());
    }
    const std::vector<double> coeffs(z.dim(0), direction == Direction::to_class1 ? 1.0 : -1.0);
    return ad::add_scaled_row(z, delta_z, coeffs);
}

ad::Tensor apply_multiplicative(const ad::Tensor& z, const ad::Tensor& delta_z) {
    if (z.shape().size() != 2 || z.dim(1) != delta_z.size()) {
        throw ad::ShapeError("apply_multiplicative", z.shape(), delta_z.shape());
    }
    return ad::mul_row(z, ad::add_scalar(delta_z, 1.0));
}

ad::Tensor attack_loss(const ad::Tensor& y, const ad::Tensor& y_check, const ad::Tensor& delta_z,
                       NormType norm, double lambda) {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("attack_loss: lambda must be >= 0");
    }
    const auto flipped = ad::add_scalar(ad::scale(y, -1.0), 1.0);
    auto loss = ad::bce(y_check, flipped);
    if (lambda > 0.0) {
        const auto penalty = norm == NormType::l1 ? ad::l1_norm(delta_z) : ad::l2_norm(delta_z);
        loss = ad::add(loss, ad::scale(penalty, lambda));
    }
    return loss;
}

namespace {

std::vector<double> initial_delta(const AttackConfig& config, std::size_t latent_dim,
                                  std::uint64_t stream) {
    std::vector<double> init(latent_dim, 0.0);
    if (config.random_init) {
        Rng rng(Rng::derive(config.seed, models::streams::kAttackInit + stream));
        for (auto& v : init) {
            v = rng.normal(0.0, 0.01);
        }
    }
    return init;
}

std::vector<ad::Tensor> trainable(const ad::Tensor& delta, const ad::Tensor& reverse) {
    std::vector<ad::Tensor> out{delta};
    if (reverse.defined()) {
        out.push_back(reverse);
    }
    return out;
}

void zero_grads(const std::vector<ad::Tensor>& params) {
    for (auto p : params) {
        p.zero_grad();
    }
}

}  // namespace

AttackTrainer::AttackTrainer(const data::Dataset& dataset, const AttackConfig& config,
                             AttackMode mode, models::ClassifierParams attack_classifier,
                             std::size_t latent_dim)
    : dataset_(dataset),
      config_(config),
      mode_(mode),
      classifier_(std::move(attack_classifier)),
      delta_(ad::Tensor::from({latent_dim}, initial_delta(config, latent_dim, 0), true)
                 .set_name("delta_z")),
      reverse_delta_(config.two_vectors
                         ? ad::Tensor::from({latent_dim}, initial_delta(config, latent_dim, 1), true)
                               .set_name("reverse_delta_z")
                         : ad::Tensor()),
      optimizer_(trainable(delta_, reverse_delta_), config.lr) {
    config_.validate();
    dataset_.require_both_classes("attack");
    classifier_.validate();
    if (classifier_.input_dim() != dataset.image_dim()) {
        throw ad::ShapeError("attack", "classifier expects width " +
                                           std::to_string(classifier_.input_dim()) +
                                           ", images have " + std::to_string(dataset.image_dim()));
    }
}

ad::Tensor AttackTrainer::build(const models::VaeParams& vae,
                                std::span<const std::size_t> batch) const {
    if (vae.latent_dim != delta_.size()) {
        throw ad::ShapeError("attack", "VAE latent width " + std::to_string(vae.latent_dim) +
                                           " differs from perturbation width " +
                                           std::to_string(delta_.size()));
    }
    const auto x = dataset_.image_batch(batch);
    const auto y = dataset_.label_batch(batch);
    // The code is a constant of the attack graph.
    const auto z = models::encode(x, vae).mu.detach();
    ad::Tensor tampered;
    ad::Tensor penalised = delta_;
    if (config_.family == Family::multiplicative) {
        tampered = apply_multiplicative(z, delta_);
    } else if (reverse_delta_.defined()) {
        std::vector<double> to1(batch.size());
        std::vector<double> to0(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const bool is_zero = dataset_.labels[batch[i]] == 0;
            to1[i] = is_zero ? 1.0 : 0.0;
            to0[i] = is_zero ? 0.0 : 1.0;
        }
        tampered = ad::add_scaled_row(ad::add_scaled_row(z, delta_, to1), reverse_delta_, to0);
    } else {
        std::vector<double> signs(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            signs[i] = dataset_.labels[batch[i]] == 0 ? 1.0 : -1.0;
        }
        tampered = ad::add_scaled_row(z, delta_, signs);
    }
    const auto y_check = models::classify(models::decode(tampered, vae), classifier_);
    auto loss = attack_loss(y, y_check, delta_, config_.norm, config_.lambda);
    if (reverse_delta_.defined() && config_.lambda > 0.0) {
        const auto extra = config_.norm == NormType::l1 ? ad::l1_norm(reverse_delta_)
                                                        : ad::l2_norm(reverse_delta_);
        loss = ad::add(loss, ad::scale(extra, config_.lambda));
    }
    return loss;
}

double AttackTrainer::step(const models::VaeParams& vae, std::span<const std::size_t> batch) {
    const auto loss = build(vae, batch);
    optimizer_.zero_grad();
    loss.backward();
    optimizer_.step();
    // Frozen networks: their gradients were computed but are discarded.
    zero_grads(vae.parameters());
    zero_grads(classifier_.parameters());
    return loss.item();
}

double AttackTrainer::objective(const models::VaeParams& vae,
                                std::span<const std::size_t> batch) const {
    return build(vae, batch).item();
}

Perturbation AttackTrainer::perturbation() const {
    Perturbation p;
    p.delta_z.assign(delta_.values().begin(), delta_.values().end());
    if (reverse_delta_.defined()) {
        p.reverse_delta_z.assign(reverse_delta_.values().begin(), reverse_delta_.values().end());
    }
    p.norm = config_.norm;
    p.family = config_.family;
    p.lambda = config_.lambda;
    p.provenance = mode_;
    return p;
}

double attack_objective(const models::VaeParams& vae, const models::ClassifierParams& classifier,
                        const Perturbation& perturbation, const data::Dataset& dataset) {
    perturbation.validate();
    const auto z = models::encode(dataset.image_batch(), vae).mu.detach();
    const std::size_t n = dataset.size();
    const std::size_t d = perturbation.latent_dim();
    // Per-sample direction: rebuild the tampered codes row by row.
    std::vector<double> tampered(n * d);
    for (int label = 0; label < 2; ++label) {
        const auto dir = label == 0 ? Direction::to_class1 : Direction::to_class0;
        const auto applied = perturbation.apply(z, dir);
        const auto all = applied.values();
        for (std::size_t i = 0; i < n; ++i) {
            if (dataset.labels[i] == label) {
                std::copy_n(all.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                            tampered.begin() + static_cast<std::ptrdiff_t>(i * d));
            }
        }
    }
    const auto scores =
        models::classify(models::decode(ad::Tensor::from({n, d}, std::move(tampered)), vae),
                         classifier);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto loss = attack_loss(dataset.label_batch(idx), scores,
                            ad::Tensor::from({d}, perturbation.delta_z), perturbation.norm,
                            perturbation.lambda)
                    .item();
    if (perturbation.two_vectors()) {
        const auto rev = ad::Tensor::from({d}, perturbation.reverse_delta_z);
        loss += perturbation.lambda *
                (perturbation.norm == NormType::l1 ? ad::l1_norm(rev) : ad::l2_norm(rev)).item();
    }
    return loss;
}

Perturbation learn_attack_independent(const models::VaeParams& vae,
                                      const models::ClassifierParams& attack_classifier,
                                      const data::Dataset& dataset, const AttackConfig& config) {
    vae.validate();
    AttackTrainer trainer(dataset, config, AttackMode::independent, attack_classifier,
                          vae.latent_dim);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& batch :
             models::epoch_batches(dataset.size(), config.batch_size, config.seed, epoch)) {
            trainer.step(vae, batch);
        }
    }
    return trainer.perturbation();
}

namespace {

PoisoningResult run_poisoning(const data::Dataset& dataset, const models::TrainConfig& vae_config,
                              const models::TrainConfig& classifier_config,
                              const AttackConfig& attack_config, AttackMode mode) {
    vae_config.validate();
    attack_config.validate();
    dataset.require_both_classes(to_string(mode));
    auto classifier =
        models::train_classifier(dataset, classifier_config, models::ClassifierRole::attack);
    std::optional<models::ClassifierParams> recon;
    if (mode == AttackMode::poisoning_class) {
        recon = classifier;
    }
    models::VaeTrainer vae_trainer(dataset, vae_config, recon);
    AttackTrainer attack_trainer(dataset, attack_config, mode, classifier, vae_config.latent_dim);
    // Both schedules end together: the attack runs during the final
    // attack_config.epochs epochs.
    const std::size_t total = std::max(vae_config.epochs, attack_config.epochs);
    const std::size_t attack_start = total - attack_config.epochs;
    for (std::size_t epoch = 0; epoch < total; ++epoch) {
        for (const auto& batch :
             models::epoch_batches(dataset.size(), vae_config.batch_size, vae_config.seed, epoch)) {
            if (epoch < vae_config.epochs) {
                vae_trainer.step(batch);
            }
            if (epoch >= attack_start) {
                attack_trainer.step(vae_trainer.params(), batch);
            }
        }
    }
    auto vae = vae_trainer.params();
    for (auto& p : vae.parameters()) {
        p.zero_grad();
    }
    return PoisoningResult{vae, classifier, attack_trainer.perturbation()};
}

}  // namespace

PoisoningResult learn_attack_poisoning(const data::Dataset& dataset,
                                       const models::TrainConfig& vae_config,
                                       const models::TrainConfig& classifier_config,
                                       const AttackConfig& attack_config) {
    return run_poisoning(dataset, vae_config, classifier_config, attack_config,
                         AttackMode::poisoning);
}

PoisoningResult learn_attack_poisoning_class(const data::Dataset& dataset,
                                             const models::TrainConfig& vae_config,
                                             const models::TrainConfig& classifier_config,
                                             const AttackConfig& attack_config) {
    if (!(vae_config.beta > 0.0)) {
        throw std::invalid_argument(
            "learn_attack_poisoning_class: beta must be > 0; use learn_attack_poisoning for an "
            "attack without the reconstruction-classification term");
    }
    return run_poisoning(dataset, vae_config, classifier_config, attack_config,
                         AttackMode::poisoning_class);
}

}  // namespace latpoison::attack
