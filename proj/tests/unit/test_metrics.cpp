#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "latpoison/attack/perturbation.hpp"
#include "latpoison/data/dataset.hpp"
#include "latpoison/eval/metrics.hpp"
#include "latpoison/models/train.hpp"
#include "latpoison/rng.hpp"

using namespace latpoison;
using namespace latpoison::eval;

namespace {

// scipy.stats.norm: sf(2.807 - d) + cdf(-2.807 - d).
constexpr double kP0 = 0.005000524169876;
constexpr double kP05 = 0.010998914514005;
constexpr double kP1 = 0.035451470973107;
constexpr double kP2 = 0.209834007635608;
constexpr double kP5 = 0.985846310454291;

struct Fixture {
    data::Dataset train;
    data::Dataset test;
    models::VaeParams vae;
    models::ClassifierParams attack_clf;
    models::ClassifierParams eval_clf;
    attack::Perturbation pert;
};

const Fixture& fixture() {
    static const std::unique_ptr<Fixture> f = [] {
        auto [train, test] = data::split(data::generate_synthetic(400, 8, 8, 5), 100, 5);
        models::TrainConfig v;
        v.epochs = 40;
        v.latent_dim = 8;
        v.seed = 3;
        models::TrainConfig c;
        c.epochs = 10;
        c.seed = 4;
        auto vae = models::train_vae(train, v);
        auto attack_clf = models::train_classifier(train, c, models::ClassifierRole::attack);
        auto eval_clf = models::train_classifier(train, c, models::ClassifierRole::eval);
        attack::AttackConfig a;
        a.epochs = 40;
        auto pert = attack::learn_attack_independent(vae, attack_clf, train, a);
        return std::make_unique<Fixture>(Fixture{std::move(train), std::move(test), std::move(vae),
                                                 std::move(attack_clf), std::move(eval_clf),
                                                 std::move(pert)});
    }();
    return *f;
}

attack::Perturbation zero_perturbation(std::size_t dim) {
    attack::Perturbation p;
    p.delta_z.assign(dim, 0.0);
    return p;
}

double monte_carlo(double delta, std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double x = rng.normal() + delta;
        if (std::abs(x) > kDetectionThreshold) {
            ++outside;
        }
    }
    return static_cast<double>(outside) / static_cast<double>(draws);
}

}  // namespace

TEST(Confidence, Definition) {
    EXPECT_DOUBLE_EQ(confidence(0.9, 1), 0.9);
    EXPECT_DOUBLE_EQ(confidence(0.2, 0), 0.8);
    EXPECT_DOUBLE_EQ(confidence(0.5, 0), 0.5);
    EXPECT_DOUBLE_EQ(confidence(0.5, 1), 0.5);
    for (double s = 0.0; s <= 1.0; s += 0.0625) {
        EXPECT_DOUBLE_EQ(confidence(s, 0) + confidence(s, 1), 1.0);
    }
}

TEST(EpsilonGap, Arithmetic) {
    ConfidenceTable rows;
    rows[kReconstructionClass1].mean = 0.88;
    rows[kAttackedTo1].mean = 0.98;
    rows[kReconstructionClass0].mean = 0.7;
    rows[kAttackedTo0].mean = 0.7;
    const auto e = epsilon_gap(rows);
    EXPECT_NEAR(e.plus, -0.10, 1e-12);
    EXPECT_DOUBLE_EQ(e.minus, 0.0);
}

TEST(ReconstructionConfidence, MeanOfReconstructionRows) {
    ConfidenceTable rows;
    rows[kReconstructionClass1].mean = 0.9;
    rows[kReconstructionClass0].mean = 0.7;
    rows[kOriginalClass1].mean = 0.1;
    EXPECT_DOUBLE_EQ(reconstruction_confidence(rows), 0.8);
}

TEST(DetectionProbability, PublishedValues) {
    EXPECT_NEAR(detection_probability(1.0), 0.04, 0.01);
    EXPECT_NEAR(detection_probability(2.0), 0.2, 0.01);
    EXPECT_NEAR(detection_probability(5.0), 0.98, 0.01);
    EXPECT_NEAR(detection_probability(0.0), 0.005, 1e-6);
}

TEST(DetectionProbability, FrozenNormalTails) {
    EXPECT_NEAR(detection_probability(0.0), kP0, 1e-12);
    EXPECT_NEAR(detection_probability(0.5), kP05, 1e-12);
    EXPECT_NEAR(detection_probability(1.0), kP1, 1e-12);
    EXPECT_NEAR(detection_probability(2.0), kP2, 1e-12);
    EXPECT_NEAR(detection_probability(5.0), kP5, 1e-12);
}

TEST(DetectionProbability, SymmetricAndMonotone) {
    double prev = detection_probability(0.0);
    for (double d = 0.05; d <= 8.0; d += 0.05) {
        EXPECT_DOUBLE_EQ(detection_probability(d), detection_probability(-d));
        const double p = detection_probability(d);
        EXPECT_GT(p, prev);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
}

TEST(DetectionProbability, ThresholdIsConfigurable) {
    EXPECT_GT(detection_probability(1.0, 2.0), detection_probability(1.0));
    EXPECT_NEAR(detection_probability(0.0, 1.959963984540054), 0.05, 1e-12);
}

TEST(DetectionProbability, MonteCarloOracle) {
    const std::size_t draws = 1'000'000;
    std::uint64_t seed = 17;
    for (double d : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        const double p = detection_probability(d);
        const double est = monte_carlo(d, draws, seed++);
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
        EXPECT_LE(std::abs(est - p), 3.0 * se) << "delta " << d << " estimate " << est;
    }
}

TEST(Sparsity, Counting) {
    const std::vector<double> a{0, 0, 5, 0};
    EXPECT_DOUBLE_EQ(sparsity_profile(a).fraction, 0.75);
    const std::vector<double> b{-0.3, 0.3, 0.3};
    EXPECT_DOUBLE_EQ(sparsity_profile(b).fraction, 0.0);
    const std::vector<double> zero(5, 0.0);
    EXPECT_DOUBLE_EQ(sparsity_profile(zero).fraction, 1.0);
    // 0.049 < 0.05 * 1 but 0.05 is not.
    const std::vector<double> edge{1.0, 0.049, 0.05, -0.05};
    EXPECT_DOUBLE_EQ(sparsity_profile(edge).fraction, 0.25);
    EXPECT_EQ(sparsity_profile(edge).elements, edge);
}

TEST(ConfidenceTable, RequiresEvalClassifier) {
    const auto& f = fixture();
    EXPECT_THROW(confidence_table(f.vae, f.pert, f.attack_clf, f.test), std::invalid_argument);
}

TEST(ConfidenceTable, EmptyClassThrows) {
    const auto& f = fixture();
    EXPECT_THROW(confidence_table(f.vae, f.pert, f.eval_clf, f.test.with_label(1)),
                 std::invalid_argument);
}

TEST(ConfidenceTable, WidthMismatchThrows) {
    const auto& f = fixture();
    EXPECT_THROW(confidence_table(f.vae, zero_perturbation(3), f.eval_clf, f.test), ad::ShapeError);
}

TEST(ConfidenceTable, ZeroPerturbationMirrorsReconstruction) {
    const auto& f = fixture();
    const auto t = confidence_table(f.vae, zero_perturbation(8), f.eval_clf, f.test);
    EXPECT_NEAR(t[kAttackedTo1].mean, 1.0 - t[kReconstructionClass0].mean, 1e-12);
    EXPECT_NEAR(t[kAttackedTo0].mean, 1.0 - t[kReconstructionClass1].mean, 1e-12);
    EXPECT_NEAR(t[kAttackedTo1].sd, t[kReconstructionClass0].sd, 1e-12);
    EXPECT_EQ(t[kOriginalClass1].name, "original_class1");
    EXPECT_EQ(t[kAttackedTo0].name, "attacked_1to0");
}

TEST(ConfidenceTable, DeterministicAndInRange) {
    const auto& f = fixture();
    const auto a = confidence_table(f.vae, f.pert, f.eval_clf, f.test);
    const auto b = confidence_table(f.vae, f.pert, f.eval_clf, f.test);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean, b[i].mean);
        EXPECT_EQ(a[i].sd, b[i].sd);
        EXPECT_GE(a[i].mean, 0.0);
        EXPECT_LE(a[i].mean, 1.0);
        EXPECT_GE(a[i].sd, 0.0);
    }
}

TEST(ConfidenceTable, AttackedRowsExceedReconstructionRowsOfSource) {
    const auto& f = fixture();
    const auto t = confidence_table(f.vae, f.pert, f.eval_clf, f.test);
    // A learned attack moves decoded codes across the boundary.
    EXPECT_GT(t[kAttackedTo1].mean, 1.0 - t[kReconstructionClass0].mean);
    EXPECT_GT(t[kAttackedTo0].mean, 1.0 - t[kReconstructionClass1].mean);
    EXPECT_GT(t[kAttackedTo1].mean, 0.5);
    EXPECT_GT(t[kAttackedTo0].mean, 0.5);
}

TEST(PixelDiff, ZeroPerturbationGivesZeros) {
    const auto& f = fixture();
    const auto d = pixel_diff(f.vae, zero_perturbation(8), f.test, attack::Direction::to_class1);
    EXPECT_EQ(d.raw.size(), f.test.count(0));
    EXPECT_EQ(d.max_abs, 0.0);
    for (std::size_t i = 0; i < d.raw.size(); ++i) {
        for (std::size_t p = 0; p < d.raw[i].size(); ++p) {
            ASSERT_EQ(d.raw[i][p], 0.0);
            ASSERT_EQ(d.scaled[i][p], 0.5);
        }
    }
}

TEST(PixelDiff, AttackChangesPixelsInsideFeature) {
    const auto& f = fixture();
    const auto mask = data::feature_mask(f.test);
    for (auto dir : {attack::Direction::to_class1, attack::Direction::to_class0}) {
        const auto d = pixel_diff(f.vae, f.pert, f.test, dir);
        EXPECT_EQ(d.raw.size(), f.test.count(dir == attack::Direction::to_class1 ? 0 : 1));
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < d.raw.size(); ++i) {
            for (std::size_t p = 0; p < d.raw[i].size(); ++p) {
                total += std::abs(d.raw[i][p]);
                ++count;
                ASSERT_GE(d.scaled[i][p], 0.0);
                ASSERT_LE(d.scaled[i][p], 1.0);
                ASSERT_NEAR(d.scaled[i][p], 0.5 + 0.5 * d.raw[i][p] / d.max_abs, 1e-15);
            }
        }
        EXPECT_GT(total / static_cast<double>(count), 0.0);
        EXPECT_GE(mask_concentration(d, mask), 0.6);
    }
}

TEST(MaskConcentration, PooledShare) {
    DiffImages d;
    d.raw = {{1.0, -1.0, 0.0, 2.0}, {0.0, 0.0, -4.0, 0.0}};
    const std::vector<bool> mask{true, false, true, false};
    EXPECT_DOUBLE_EQ(mask_concentration(d, mask), 5.0 / 8.0);
    EXPECT_THROW(mask_concentration(d, std::vector<bool>{true}), std::invalid_argument);
    EXPECT_DOUBLE_EQ(mask_concentration(DiffImages{}, mask), 0.0);
}

TEST(BuildReport, InvariantsAndElements) {
    const auto& f = fixture();
    auto pert = f.pert;
    pert.reverse_delta_z.assign(8, 0.0);
    pert.reverse_delta_z[0] = 2.0;
    const auto r = build_report(f.vae, pert, f.eval_clf, f.test, attack::AttackMode::independent,
                                kDetectionThreshold, {{"vae.seed", "3"}});
    EXPECT_NO_THROW(r.validate());
    ASSERT_EQ(r.detection_probs.size(), 16u);
    EXPECT_NEAR(r.detection_probs[8], kP2, 1e-12);
    double max = 0.0;
    for (double p : r.detection_probs) {
        max = std::max(max, p);
    }
    EXPECT_EQ(r.max_detection_prob, max);
    EXPECT_EQ(r.sparsity.elements.size(), 16u);
    const auto e = epsilon_gap(r.rows);
    EXPECT_EQ(r.epsilon.plus, e.plus);
    EXPECT_EQ(r.epsilon.minus, e.minus);
    EXPECT_EQ(r.config.size(), 1u);
    EXPECT_EQ(r.norm, pert.norm);
}

TEST(AttackReport, ValidateRejectsOutOfRange) {
    AttackReport r;
    EXPECT_NO_THROW(r.validate());
    r.rows[kAttackedTo1].mean = 1.5;
    EXPECT_THROW(r.validate(), std::logic_error);
    r = {};
    r.epsilon.plus = -1.2;
    EXPECT_THROW(r.validate(), std::logic_error);
    r = {};
    r.detection_probs = {0.5, 1.01};
    EXPECT_THROW(r.validate(), std::logic_error);
    r = {};
    r.sparsity.fraction = NAN;
    EXPECT_THROW(r.validate(), std::logic_error);
}
