#include "latpoison/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latpoison/autodiff/ops.hpp"

namespace latpoison::eval {

namespace {

ConfidenceRow summarise(std::string name, std::span<const double> scores, int target_label) {
    ConfidenceRow row;
    row.name = std::move(name);
    const double n = static_cast<double>(scores.size());
    for (double s : scores) {
        row.mean += confidence(s, target_label);
    }
    row.mean /= n;
    double ss = 0.0;
    for (double s : scores) {
        const double d = confidence(s, target_label) - row.mean;
        ss += d * d;
    }
    row.sd = scores.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return row;
}

std::vector<double> scores_of(const ad::Tensor& x, const models::ClassifierParams& clf) {
    const auto out = models::classify(x, clf);
    return {out.values().begin(), out.values().end()};
}

}  // namespace

double confidence(double score, int true_label) { return true_label == 1 ? score : 1.0 - score; }

ConfidenceTable confidence_table(const models::VaeParams& vae,
                                 const attack::Perturbation& perturbation,
                                 const models::ClassifierParams& eval_classifier,
                                 const data::Dataset& test_set) {
    if (eval_classifier.role != models::ClassifierRole::eval) {
        throw std::invalid_argument(
            "confidence_table: evaluation requires the classifier tagged 'eval', got '" +
            models::to_string(eval_classifier.role) + "'");
    }
    perturbation.validate();
    if (perturbation.latent_dim() != vae.latent_dim) {
        throw ad::ShapeError("confidence_table", "perturbation width " +
                                                     std::to_string(perturbation.latent_dim()) +
                                                     " differs from VAE latent width " +
                                                     std::to_string(vae.latent_dim));
    }
    ConfidenceTable table;
    for (int label : {1, 0}) {
        const auto part = test_set.with_label(label);
        if (part.size() == 0) {
            throw std::invalid_argument("confidence_table: test set has no class-" +
                                        std::to_string(label) + " samples");
        }
        const auto x = part.image_batch();
        const auto z = models::encode(x, vae).mu.detach();
        const auto dir = label == 0 ? attack::Direction::to_class1 : attack::Direction::to_class0;
        const auto original = scores_of(x, eval_classifier);
        const auto recon = scores_of(models::decode(z, vae), eval_classifier);
        const auto attacked =
            scores_of(models::decode(perturbation.apply(z, dir), vae), eval_classifier);
        if (label == 1) {
            table[kOriginalClass1] = summarise("original_class1", original, 1);
            table[kReconstructionClass1] = summarise("reconstruction_class1", recon, 1);
            table[kAttackedTo0] = summarise("attacked_1to0", attacked, 0);
        } else {
            table[kOriginalClass0] = summarise("original_class0", original, 0);
            table[kReconstructionClass0] = summarise("reconstruction_class0", recon, 0);
            table[kAttackedTo1] = summarise("attacked_0to1", attacked, 1);
        }
    }
    return table;
}

EpsilonGap epsilon_gap(const ConfidenceTable& rows) {
    return EpsilonGap{rows[kReconstructionClass1].mean - rows[kAttackedTo1].mean,
                      rows[kReconstructionClass0].mean - rows[kAttackedTo0].mean};
}

double detection_probability(double delta, double threshold) {
    // 1 - Phi(t - d) + Phi(-t - d) written as two upper tails; swapping the
    // sign of delta swaps the summands, so the result is exactly symmetric.
    const double right = 0.5 * std::erfc((threshold - delta) / std::sqrt(2.0));
    const double left = 0.5 * std::erfc((threshold + delta) / std::sqrt(2.0));
    return std::clamp(right + left, 0.0, 1.0);
}

SparsityProfile sparsity_profile(std::span<const double> delta_z, double relative) {
    SparsityProfile profile;
    profile.elements.assign(delta_z.begin(), delta_z.end());
    double max_abs = 0.0;
    for (double v : delta_z) {
        max_abs = std::max(max_abs, std::abs(v));
    }
    if (max_abs == 0.0 || delta_z.empty()) {
        profile.fraction = 1.0;
        return profile;
    }
    const double cut = relative * max_abs;
    const auto small = std::count_if(delta_z.begin(), delta_z.end(),
                                     [cut](double v) { return std::abs(v) < cut; });
    profile.fraction = static_cast<double>(small) / static_cast<double>(delta_z.size());
    return profile;
}

DiffImages pixel_diff(const models::VaeParams& vae, const attack::Perturbation& perturbation,
                      const data::Dataset& test_set, attack::Direction direction) {
    perturbation.validate();
    const int source = direction == attack::Direction::to_class1 ? 0 : 1;
    const auto part = test_set.with_label(source);
    DiffImages out;
    if (part.size() == 0) {
        return out;
    }
    const auto z = models::encode(part.image_batch(), vae).mu.detach();
    const auto recon = models::decode(z, vae);
    const auto attacked = models::decode(perturbation.apply(z, direction), vae);
    const std::size_t d = part.image_dim();
    const auto rv = recon.values();
    const auto av = attacked.values();
    for (std::size_t i = 0; i < part.size(); ++i) {
        std::vector<double> diff(d);
        for (std::size_t p = 0; p < d; ++p) {
            diff[p] = av[i * d + p] - rv[i * d + p];
            out.max_abs = std::max(out.max_abs, std::abs(diff[p]));
        }
        out.raw.push_back(std::move(diff));
    }
    for (const auto& diff : out.raw) {
        std::vector<double> scaled(d, 0.5);
        if (out.max_abs > 0.0) {
            for (std::size_t p = 0; p < d; ++p) {
                scaled[p] = 0.5 + 0.5 * diff[p] / out.max_abs;
            }
        }
        out.scaled.push_back(std::move(scaled));
    }
    return out;
}

double mask_concentration(const DiffImages& diffs, const std::vector<bool>& mask) {
    double inside = 0.0;
    double total = 0.0;
    for (const auto& diff : diffs.raw) {
        if (diff.size() != mask.size()) {
            throw std::invalid_argument("mask_concentration: mask size differs from image size");
        }
        for (std::size_t p = 0; p < diff.size(); ++p) {
            total += std::abs(diff[p]);
            if (mask[p]) {
                inside += std::abs(diff[p]);
            }
        }
    }
    return total > 0.0 ? inside / total : 0.0;
}

double reconstruction_confidence(const ConfidenceTable& rows) {
    return 0.5 * (rows[kReconstructionClass1].mean + rows[kReconstructionClass0].mean);
}

void AttackReport::validate() const {
    for (const auto& row : rows) {
        if (!(row.mean >= 0.0 && row.mean <= 1.0)) {
            throw std::logic_error("report row '" + row.name + "' mean outside [0, 1]");
        }
    }
    for (double e : {epsilon.plus, epsilon.minus}) {
        if (!(e >= -1.0 && e <= 1.0)) {
            throw std::logic_error("report epsilon outside [-1, 1]");
        }
    }
    for (double p : detection_probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::logic_error("report detection probability outside [0, 1]");
        }
    }
    if (!(sparsity.fraction >= 0.0 && sparsity.fraction <= 1.0)) {
        throw std::logic_error("report sparsity fraction outside [0, 1]");
    }
}

AttackReport build_report(const models::VaeParams& vae, const attack::Perturbation& perturbation,
                          const models::ClassifierParams& eval_classifier,
                          const data::Dataset& test_set, attack::AttackMode mode,
                          double detection_threshold,
                          std::vector<std::pair<std::string, std::string>> config) {
    AttackReport report;
    report.mode = mode;
    report.norm = perturbation.norm;
    report.family = perturbation.family;
    report.rows = confidence_table(vae, perturbation, eval_classifier, test_set);
    report.epsilon = epsilon_gap(report.rows);
    report.detection_threshold = detection_threshold;
    std::vector<double> elements = perturbation.delta_z;
    elements.insert(elements.end(), perturbation.reverse_delta_z.begin(),
                    perturbation.reverse_delta_z.end());
    for (double v : elements) {
        const double p = detection_probability(v, detection_threshold);
        report.detection_probs.push_back(p);
        report.max_detection_prob = std::max(report.max_detection_prob, p);
    }
    report.sparsity = sparsity_profile(elements);
    report.config = std::move(config);
    report.validate();
    return report;
}

}  // namespace latpoison::eval
