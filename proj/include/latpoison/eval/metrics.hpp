#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latpoison/attack/perturbation.hpp"
#include "latpoison/data/dataset.hpp"
#include "latpoison/models/networks.hpp"

namespace latpoison::eval {

// Boundary of the prior's central 99.5% interval for a unit Gaussian.
inline constexpr double kDetectionThreshold = 2.807;
// Elements below this fraction of max|delta_z| count as zero.
inline constexpr double kSparsityRelativeThreshold = 0.05;

// score for a true label of 1, 1 - score for a true label of 0.
double confidence(double score, int true_label);

struct ConfidenceRow {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
};

// Rows in report order.
enum RowIndex : std::size_t {
    kOriginalClass1 = 0,
    kReconstructionClass1,
    kAttackedTo1,
    kOriginalClass0,
    kReconstructionClass0,
    kAttackedTo0,
};

using ConfidenceTable = std::array<ConfidenceRow, 6>;

// Confidences measured with the evaluation classifier over the test set.
// Encodings use the encoder mean. Throws if the classifier is not tagged
// eval or a class is absent from the test set.
ConfidenceTable confidence_table(const models::VaeParams& vae,
                                 const attack::Perturbation& perturbation,
                                 const models::ClassifierParams& eval_classifier,
                                 const data::Dataset& test_set);

struct EpsilonGap {
    double plus = 0.0;   // class-1 reconstruction - (0 -> 1 attacked)
    double minus = 0.0;  // class-0 reconstruction - (1 -> 0 attacked)
};

EpsilonGap epsilon_gap(const ConfidenceTable& rows);

// Probability that a unit-Gaussian latent element shifted by delta lands
// outside [-threshold, threshold].
double detection_probability(double delta, double threshold = kDetectionThreshold);

struct SparsityProfile {
    std::vector<double> elements;
    double fraction = 0.0;  // share of |element| < relative * max|element|; 1 for the zero vector
};

SparsityProfile sparsity_profile(std::span<const double> delta_z,
                                 double relative = kSparsityRelativeThreshold);

struct DiffImages {
    std::vector<std::vector<double>> raw;     // decode(T o z) - decode(z), signed
    std::vector<std::vector<double>> scaled;  // raw mapped linearly to [0, 1], 0 at 0.5
    double max_abs = 0.0;
};

// Differences for the samples the direction attacks (class 0 for to_class1,
// class 1 for to_class0).
DiffImages pixel_diff(const models::VaeParams& vae, const attack::Perturbation& perturbation,
                      const data::Dataset& test_set, attack::Direction direction);

// Share of total |difference| falling inside the mask, pooled over images.
double mask_concentration(const DiffImages& diffs, const std::vector<bool>& mask);

// Mean over both reconstruction rows; the figure used to compare attack modes'
// reconstruction quality.
double reconstruction_confidence(const ConfidenceTable& rows);

struct AttackReport {
    attack::AttackMode mode = attack::AttackMode::independent;
    attack::NormType norm = attack::NormType::l2;
    attack::Family family = attack::Family::additive;
    ConfidenceTable rows;
    EpsilonGap epsilon;
    double detection_threshold = kDetectionThreshold;
    // One entry per delta_z element (both vectors in two-vector mode).
    std::vector<double> detection_probs;
    double max_detection_prob = 0.0;
    SparsityProfile sparsity;
    std::vector<std::pair<std::string, std::string>> config;

    // Throws std::logic_error if a mean, epsilon or probability is out of range.
    void validate() const;
};

AttackReport build_report(const models::VaeParams& vae, const attack::Perturbation& perturbation,
                          const models::ClassifierParams& eval_classifier,
                          const data::Dataset& test_set, attack::AttackMode mode,
                          double detection_threshold = kDetectionThreshold,
                          std::vector<std::pair<std::string, std::string>> config = {});

}  // namespace latpoison::eval
