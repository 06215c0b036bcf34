#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "latpoison/attack/perturbation.hpp"
#include "latpoison/autodiff/ops.hpp"
#include "latpoison/data/dataset.hpp"
#include "latpoison/models/train.hpp"

using namespace latpoison;
using namespace latpoison::attack;

namespace {

std::vector<double> vec(const ad::Tensor& t) {
    return {t.values().begin(), t.values().end()};
}

std::vector<double> flatten(const std::vector<ad::Tensor>& params) {
    std::vector<double> out;
    for (const auto& p : params) {
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return out;
}

models::TrainConfig vae_config(std::size_t epochs) {
    models::TrainConfig c;
    c.epochs = epochs;
    c.latent_dim = 8;
    c.seed = 4;
    return c;
}

models::TrainConfig classifier_config() {
    models::TrainConfig c;
    c.epochs = 10;
    c.latent_dim = 8;
    c.seed = 6;
    return c;
}

// 300 samples give ~10 batches per epoch; 40 epochs roughly match the step
// count of the default 10 epochs on 2000 samples.
AttackConfig attack_config() {
    AttackConfig c;
    c.epochs = 40;
    c.seed = 8;
    return c;
}

struct Trained {
    data::Dataset data;
    models::VaeParams vae;
    models::ClassifierParams classifier;
};

const Trained& trained() {
    static const std::unique_ptr<Trained> t = [] {
        auto data = data::generate_synthetic(300, 8, 8, 3);
        auto vae = models::train_vae(data, vae_config(40));
        auto clf = models::train_classifier(data, classifier_config(), models::ClassifierRole::attack);
        return std::make_unique<Trained>(Trained{std::move(data), std::move(vae), std::move(clf)});
    }();
    return *t;
}

// Mean score of the flipped label on decoded tampered codes.
double flip_confidence(const models::VaeParams& vae, const models::ClassifierParams& clf,
                       const Perturbation& pert, const data::Dataset& data) {
    double total = 0.0;
    for (int label : {0, 1}) {
        const auto subset = data.with_label(label);
        const auto x = subset.image_batch();
        const auto enc = models::encode(x, vae);
        const auto z = pert.apply(enc.mu, label == 0 ? Direction::to_class1 : Direction::to_class0);
        const auto x_hat = models::decode(z, vae);
        const auto scores = models::classify(x_hat, clf);
        double s = 0.0;
        for (double v : scores.values()) {
            s += label == 0 ? v : 1.0 - v;
        }
        total += s / static_cast<double>(subset.size());
    }
    return total / 2.0;
}

// The small fixture's classifier saturates less than the default-scale one;
// the 0.9 target is checked by the acceptance run.
constexpr double kFlipTarget = 0.8;

double norm2(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST(Parse, RoundTripAndErrors) {
    EXPECT_EQ(parse_norm("1"), NormType::l1);
    EXPECT_EQ(parse_norm("2"), NormType::l2);
    EXPECT_EQ(parse_family("additive"), Family::additive);
    EXPECT_EQ(parse_family("multiplicative"), Family::multiplicative);
    EXPECT_EQ(parse_mode("independent"), AttackMode::independent);
    EXPECT_EQ(parse_mode("poisoning"), AttackMode::poisoning);
    EXPECT_EQ(parse_mode("poisoning+class"), AttackMode::poisoning_class);
    for (auto m : {AttackMode::independent, AttackMode::poisoning, AttackMode::poisoning_class}) {
        EXPECT_EQ(parse_mode(to_string(m)), m);
    }
    EXPECT_THROW(parse_norm("3"), std::invalid_argument);
    EXPECT_THROW(parse_family("affine"), std::invalid_argument);
    EXPECT_THROW(parse_mode("poison"), std::invalid_argument);
}

TEST(AttackConfig, Validation) {
    AttackConfig c;
    EXPECT_NO_THROW(c.validate());
    c.lambda = -1e-3;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.lr = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.two_vectors = true;
    c.family = Family::multiplicative;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ApplyAdditive, Examples) {
    const auto z = ad::Tensor::from({1, 2}, {0, 0});
    const auto d = ad::Tensor::from({2}, {1, -1});
    EXPECT_EQ(vec(apply_additive(z, d, Direction::to_class1)), (std::vector<double>{1, -1}));
    EXPECT_EQ(vec(apply_additive(z, d, Direction::to_class0)), (std::vector<double>{-1, 1}));
    const auto zero = ad::Tensor::zeros({2});
    const auto z2 = ad::Tensor::from({2, 2}, {0.3, -1.7, 2.5, 0.125});
    EXPECT_EQ(vec(apply_additive(z2, zero, Direction::to_class1)), vec(z2));
    EXPECT_EQ(vec(apply_additive(z2, zero, Direction::to_class0)), vec(z2));
}

TEST(ApplyAdditive, LengthMismatchThrows) {
    const auto z = ad::Tensor::zeros({3, 4});
    EXPECT_THROW(apply_additive(z, ad::Tensor::zeros({3}), Direction::to_class1), ad::ShapeError);
    EXPECT_THROW(apply_multiplicative(z, ad::Tensor::zeros({5})), ad::ShapeError);
}

// Exact for dyadic values; general reals only round-trip within one ulp
// (fl(z + d) - d need not equal z).
TEST(ApplyAdditive, InversePairOnRepresentableValues) {
    const auto z = ad::Tensor::from({2, 3}, {0.5, -1.25, 3.0, 0.0, 7.75, -0.125});
    const auto d = ad::Tensor::from({3}, {0.25, 2.0, -0.5});
    const auto back = apply_additive(apply_additive(z, d, Direction::to_class1), d, Direction::to_class0);
    EXPECT_EQ(vec(back), vec(z));
}

TEST(ApplyAdditive, InversePairWithinOneUlp) {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> zv(16), dv(16);
        for (auto& v : zv) v = rng.normal() * 2.0;
        for (auto& v : dv) v = rng.normal();
        const auto z = ad::Tensor::from({1, 16}, zv);
        const auto d = ad::Tensor::from({16}, dv);
        const auto back =
            vec(apply_additive(apply_additive(z, d, Direction::to_class1), d, Direction::to_class0));
        for (std::size_t i = 0; i < 16; ++i) {
            // Two roundings, each within half an ulp of the larger magnitude.
            const double big = std::max(std::abs(zv[i] + dv[i]), std::abs(zv[i]));
            const double bound = std::nextafter(big, INFINITY) - big;
            EXPECT_LE(std::abs(back[i] - zv[i]), bound);
        }
    }
}

TEST(ApplyMultiplicative, Examples) {
    EXPECT_EQ(vec(apply_multiplicative(ad::Tensor::from({1, 1}, {2}), ad::Tensor::from({1}, {-2}))),
              (std::vector<double>{-2}));
    EXPECT_EQ(vec(apply_multiplicative(ad::Tensor::from({1, 2}, {1, 1}), ad::Tensor::from({2}, {-1, 0}))),
              (std::vector<double>{0, 1}));
    const auto z = ad::Tensor::from({2, 2}, {0.3, -1.7, 2.5, 0.1});
    EXPECT_EQ(vec(apply_multiplicative(z, ad::Tensor::zeros({2}))), vec(z));
}

TEST(Perturbation, ApplyDirectionsAndTwoVectors) {
    Perturbation p;
    p.delta_z = {1.0, 2.0};
    const auto z = ad::Tensor::from({1, 2}, {0.5, 0.5});
    EXPECT_EQ(vec(p.apply(z, Direction::to_class1)), (std::vector<double>{1.5, 2.5}));
    EXPECT_EQ(vec(p.apply(z, Direction::to_class0)), (std::vector<double>{-0.5, -1.5}));
    p.reverse_delta_z = {-0.25, 0.25};
    EXPECT_TRUE(p.two_vectors());
    EXPECT_EQ(vec(p.apply(z, Direction::to_class1)), (std::vector<double>{1.5, 2.5}));
    EXPECT_EQ(vec(p.apply(z, Direction::to_class0)), (std::vector<double>{0.25, 0.75}));

    Perturbation m;
    m.family = Family::multiplicative;
    m.delta_z = {-2.0, 0.0};
    EXPECT_EQ(vec(m.apply(z, Direction::to_class1)), vec(m.apply(z, Direction::to_class0)));
    EXPECT_EQ(vec(m.apply(z, Direction::to_class1)), (std::vector<double>{-0.5, 0.5}));
}

TEST(Perturbation, ValidateAndWarning) {
    Perturbation p;
    p.delta_z = {0.1, NAN};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.delta_z = {0.1, 0.2};
    p.reverse_delta_z = {0.1};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.reverse_delta_z.clear();
    EXPECT_NO_THROW(p.validate());
    EXPECT_FALSE(p.warning().has_value());

    p.family = Family::multiplicative;
    EXPECT_TRUE(p.warning().has_value());
    p.delta_z = {0.1, -0.2};
    EXPECT_FALSE(p.warning().has_value());
}

TEST(AttackLoss, PenaltyValues) {
    const auto y = ad::Tensor::from({2, 1}, {0, 1});
    const auto perfect = ad::Tensor::from({2, 1}, {1, 0});
    const auto d = ad::Tensor::from({2}, {3, -4});
    // The BCE term at a perfect flip is the clamp floor, -ln(1 - 1e-7).
    const double floor = -std::log1p(-1e-7);
    EXPECT_NEAR(attack_loss(y, perfect, d, NormType::l2, 0.0).item(), 0.0, 1e-6);
    EXPECT_NEAR(attack_loss(y, perfect, d, NormType::l2, 1.0).item() - floor, 5.0, 1e-9);
    EXPECT_NEAR(attack_loss(y, perfect, d, NormType::l1, 1.0).item() - floor, 7.0, 1e-9);
    EXPECT_THROW(attack_loss(y, perfect, d, NormType::l1, -1.0), std::invalid_argument);
}

TEST(AttackLoss, BceAgainstFlippedLabels) {
    const auto y = ad::Tensor::from({2, 1}, {0, 1});
    const auto score = ad::Tensor::from({2, 1}, {0.8, 0.3});
    const double expect = -(std::log(0.8) + std::log(0.7)) / 2.0;
    EXPECT_NEAR(attack_loss(y, score, ad::Tensor::zeros({2}), NormType::l2, 1.0).item(), expect, 1e-12);
}

TEST(AttackLoss, L1SubgradientAtZeroIsZero) {
    const auto y = ad::Tensor::from({1, 1}, {0});
    const auto score = ad::Tensor::from({1, 1}, {0.5});
    auto d = ad::Tensor::from({3}, {0.0, 2.0, -1.0}, true);
    attack_loss(y, score, d, NormType::l1, 0.5).backward();
    const std::vector<double> g(d.grad().begin(), d.grad().end());
    EXPECT_EQ(g, (std::vector<double>{0.0, 0.5, -0.5}));
}

TEST(AttackTrainer, RejectsBadInputs) {
    const auto& t = trained();
    EXPECT_THROW(AttackTrainer(t.data.with_label(0), attack_config(), AttackMode::independent,
                               t.classifier, 8),
                 std::invalid_argument);
    const auto other = data::generate_synthetic(50, 10, 10, 1);
    EXPECT_THROW(AttackTrainer(other, attack_config(), AttackMode::independent, t.classifier, 8),
                 ad::ShapeError);
    AttackTrainer narrow(t.data, attack_config(), AttackMode::independent, t.classifier, 4);
    const std::vector<std::size_t> batch{0, 1, 2};
    EXPECT_THROW(narrow.step(t.vae, batch), ad::ShapeError);
}

TEST(AttackTrainer, FrozenNetworksUnchangedAndGradsZeroed) {
    const auto& t = trained();
    const auto vae = t.vae.clone();
    const auto clf = t.classifier.clone();
    const auto vae_before = flatten(vae.parameters());
    const auto clf_before = flatten(clf.parameters());
    AttackTrainer trainer(t.data, attack_config(), AttackMode::independent, clf, 8);
    std::vector<std::size_t> batch(32);
    std::iota(batch.begin(), batch.end(), 0);
    for (int i = 0; i < 3; ++i) {
        trainer.step(vae, batch);
    }
    EXPECT_EQ(flatten(vae.parameters()), vae_before);
    EXPECT_EQ(flatten(trainer.attack_classifier().parameters()), clf_before);
    for (const auto& p : vae.parameters()) {
        for (double g : p.grad()) {
            ASSERT_EQ(g, 0.0);
        }
    }
    for (const auto& p : trainer.attack_classifier().parameters()) {
        for (double g : p.grad()) {
            ASSERT_EQ(g, 0.0);
        }
    }
    const auto pert = trainer.perturbation();
    EXPECT_EQ(pert.provenance, AttackMode::independent);
    EXPECT_EQ(pert.latent_dim(), 8u);
    EXPECT_NE(norm2(pert.delta_z), 0.0);
}

TEST(LearnIndependent, ZeroEpochsKeepsZeroInit) {
    const auto& t = trained();
    auto c = attack_config();
    c.epochs = 0;
    const auto p = learn_attack_independent(t.vae, t.classifier, t.data, c);
    EXPECT_EQ(p.delta_z, std::vector<double>(8, 0.0));
    EXPECT_FALSE(p.two_vectors());
}

TEST(LearnIndependent, FlipsClassesAndImprovesObjective) {
    const auto& t = trained();
    for (auto norm : {NormType::l1, NormType::l2}) {
        auto c = attack_config();
        c.norm = norm;
        const auto p = learn_attack_independent(t.vae, t.classifier, t.data, c);
        EXPECT_EQ(p.norm, norm);
        EXPECT_DOUBLE_EQ(p.lambda, c.lambda);
        Perturbation zero = p;
        std::fill(zero.delta_z.begin(), zero.delta_z.end(), 0.0);
        EXPECT_LE(attack_objective(t.vae, t.classifier, p, t.data),
                  attack_objective(t.vae, t.classifier, zero, t.data));
        EXPECT_GE(flip_confidence(t.vae, t.classifier, p, t.data), kFlipTarget);
        EXPECT_LT(flip_confidence(t.vae, t.classifier, zero, t.data), 0.5);
    }
}

TEST(LearnIndependent, Deterministic) {
    const auto& t = trained();
    const auto a = learn_attack_independent(t.vae, t.classifier, t.data, attack_config());
    const auto b = learn_attack_independent(t.vae, t.classifier, t.data, attack_config());
    EXPECT_EQ(a.delta_z, b.delta_z);
}

TEST(LearnIndependent, HugeLambdaSuppressesAttack) {
    const auto& t = trained();
    auto c = attack_config();
    c.lambda = 1e3;
    const auto p = learn_attack_independent(t.vae, t.classifier, t.data, c);
    EXPECT_LT(norm2(p.delta_z), 0.01);
    EXPECT_LT(flip_confidence(t.vae, t.classifier, p, t.data), 0.6);
}

TEST(LearnIndependent, TwoVectorsAndMultiplicative) {
    const auto& t = trained();
    auto c = attack_config();
    c.two_vectors = true;
    const auto two = learn_attack_independent(t.vae, t.classifier, t.data, c);
    ASSERT_TRUE(two.two_vectors());
    EXPECT_EQ(two.reverse_delta_z.size(), 8u);
    EXPECT_GE(flip_confidence(t.vae, t.classifier, two, t.data), kFlipTarget);

    c = attack_config();
    c.family = Family::multiplicative;
    const auto mult = learn_attack_independent(t.vae, t.classifier, t.data, c);
    EXPECT_EQ(mult.family, Family::multiplicative);
    EXPECT_NO_THROW(mult.validate());
}

TEST(LearnIndependent, RandomInitDiffersFromZeroInit) {
    const auto& t = trained();
    auto c = attack_config();
    c.epochs = 0;
    c.random_init = true;
    const auto p = learn_attack_independent(t.vae, t.classifier, t.data, c);
    EXPECT_GT(norm2(p.delta_z), 0.0);
    EXPECT_LT(norm2(p.delta_z), 0.1);
}

TEST(LearnPoisoning, ZeroAttackEpochsStillTrainsVae) {
    const auto& t = trained();
    auto c = attack_config();
    c.epochs = 0;
    const auto r = learn_attack_poisoning(t.data, vae_config(5), classifier_config(), c);
    EXPECT_EQ(r.perturbation.delta_z, std::vector<double>(8, 0.0));
    EXPECT_EQ(r.perturbation.provenance, AttackMode::poisoning);
    const auto plain = models::train_vae(t.data, vae_config(5));
    EXPECT_EQ(flatten(r.vae.parameters()), flatten(plain.parameters()));
}

TEST(LearnPoisoning, FlipsWithoutDamagingReconstruction) {
    const auto& t = trained();
    const auto r = learn_attack_poisoning(t.data, vae_config(40), classifier_config(), attack_config());
    EXPECT_GE(flip_confidence(r.vae, r.attack_classifier, r.perturbation, t.data), kFlipTarget);
    const double plain = models::reconstruction_bce(t.vae, t.data);
    const double poisoned = models::reconstruction_bce(r.vae, t.data);
    EXPECT_LE(std::abs(poisoned - plain), 0.1 * plain);
}

TEST(LearnPoisoning, Deterministic) {
    const auto& t = trained();
    const auto a = learn_attack_poisoning(t.data, vae_config(3), classifier_config(), attack_config());
    const auto b = learn_attack_poisoning(t.data, vae_config(3), classifier_config(), attack_config());
    EXPECT_EQ(flatten(a.vae.parameters()), flatten(b.vae.parameters()));
    EXPECT_EQ(a.perturbation.delta_z, b.perturbation.delta_z);
}

TEST(LearnPoisoningClass, RequiresPositiveBeta) {
    const auto& t = trained();
    auto v = vae_config(1);
    v.beta = 0.0;
    EXPECT_THROW(learn_attack_poisoning_class(t.data, v, classifier_config(), attack_config()),
                 std::invalid_argument);
}

TEST(LearnPoisoningClass, DeterministicAndTagged) {
    const auto& t = trained();
    const auto a = learn_attack_poisoning_class(t.data, vae_config(3), classifier_config(), attack_config());
    const auto b = learn_attack_poisoning_class(t.data, vae_config(3), classifier_config(), attack_config());
    EXPECT_EQ(a.perturbation.provenance, AttackMode::poisoning_class);
    EXPECT_EQ(flatten(a.vae.parameters()), flatten(b.vae.parameters()));
    EXPECT_EQ(flatten(a.attack_classifier.parameters()), flatten(b.attack_classifier.parameters()));
    EXPECT_EQ(a.perturbation.delta_z, b.perturbation.delta_z);
    const auto plain = learn_attack_poisoning(t.data, vae_config(3), classifier_config(), attack_config());
    EXPECT_NE(flatten(a.vae.parameters()), flatten(plain.vae.parameters()));
}
