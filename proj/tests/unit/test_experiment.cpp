#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "latpoison/data/dataset.hpp"
#include "latpoison/io/experiment.hpp"
#include "latpoison/io/pgm.hpp"
#include "latpoison/io/report.hpp"

using namespace latpoison;
using namespace latpoison::io;
namespace fs = std::filesystem;

namespace {

class ExperimentTest : public ::testing::Test {
  protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                (std::string("latpoison_experiment_") +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    ExperimentPlan tiny(std::size_t epochs) const {
        ExperimentPlan p;
        p.data.n = 160;
        p.data.width = 8;
        p.data.height = 8;
        p.data.test_count = 40;
        p.vae.latent_dim = 4;
        p.vae.epochs = epochs;
        p.classifier.epochs = epochs;
        p.attack.epochs = epochs;
        p.output_dir = root_ / "run";
        return p;
    }

    fs::path root_;
};

const std::vector<std::string> kArtifacts{
    "vae.lpz",       "attack_classifier.lpz", "eval_classifier.lpz", "delta_z.lpz",
    "report.csv",    "delta_z.csv",           "panels_0to1.pgm",     "panels_1to0.pgm"};

std::string without_output_dir(const std::string& report) {
    std::istringstream in(report);
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        if (line.rfind("# output_dir = ", 0) != 0) {
            out += line + "\n";
        }
    }
    return out;
}

}  // namespace

TEST_F(ExperimentTest, ZeroEpochsCompletesNearChance) {
    const auto plan = tiny(0);
    const auto r = run_experiment(plan);
    for (const auto& name : kArtifacts) {
        EXPECT_TRUE(fs::exists(plan.output_dir / name)) << name;
    }
    // Untrained decoders emit near-uniform gray, so reconstruction and
    // attacked confidences hover at 0.5.
    EXPECT_NEAR(eval::reconstruction_confidence(r.report.rows), 0.5, 0.01);
    for (const auto& row : r.report.rows) {
        EXPECT_NEAR(row.mean, 0.5, 0.25) << row.name;
    }
    EXPECT_EQ(r.perturbation.delta_z, std::vector<double>(4, 0.0));
    EXPECT_DOUBLE_EQ(r.report.sparsity.fraction, 1.0);
    EXPECT_NEAR(r.report.max_detection_prob, 0.005, 1e-4);
}

TEST_F(ExperimentTest, ReportEmbedsConfigAndParses) {
    auto plan = tiny(1);
    plan.mode = attack::AttackMode::poisoning;
    plan.attack.norm = attack::NormType::l1;
    const auto r = run_experiment(plan);
    const auto parsed = read_report(r.report_path);
    for (const auto& [k, v] : echo(plan)) {
        EXPECT_EQ(parsed.metadata.at(k), v) << k;
    }
    EXPECT_EQ(parsed.metadata.at("report.mode"), "poisoning");
    EXPECT_EQ(parsed.metadata.at("report.norm"), "1");
    EXPECT_TRUE(parsed.metadata.count("report.mask_concentration_0to1"));
    ASSERT_EQ(parsed.rows.size(), 6u);
    // The echo alone reconstructs the plan.
    ExperimentPlan rebuilt;
    for (const auto& k : config_keys()) {
        apply_setting(rebuilt, k, parsed.metadata.at(k));
    }
    EXPECT_EQ(echo(rebuilt), echo(plan));
}

TEST_F(ExperimentTest, PanelsHaveFourRows) {
    const auto plan = tiny(1);
    run_experiment(plan);
    const auto img = read_pgm(plan.output_dir / "panels_0to1.pgm");
    EXPECT_EQ(img.width, 8u * 8 + 9);
    EXPECT_EQ(img.height, 4u * 8 + 5);
}

TEST_F(ExperimentTest, RerunIsByteIdentical) {
    const auto plan = tiny(2);
    run_experiment(plan);
    fs::rename(plan.output_dir, root_ / "first");
    run_experiment(plan);
    for (const auto& name : kArtifacts) {
        EXPECT_EQ(read_text(root_ / "first" / name), read_text(plan.output_dir / name)) << name;
    }
}

TEST_F(ExperimentTest, StageErrorsNameTheStage) {
    auto plan = tiny(0);
    plan.data.source = "idx";
    plan.data.images = root_ / "missing-images.idx";
    plan.data.labels = root_ / "missing-labels.idx";
    try {
        run_experiment(plan);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "data");
        EXPECT_NE(std::string(e.what()).find("missing-images"), std::string::npos) << e.what();
    }
    plan = tiny(0);
    plan.attack.lr = -1.0;
    try {
        run_experiment(plan);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "config");
    }
}

TEST_F(ExperimentTest, IdxSourceRuns) {
    fs::create_directories(root_);
    const auto full = data::generate_synthetic(120, 8, 8, 2);
    data::save_idx(full, root_ / "img.idx", root_ / "lbl.idx");
    auto plan = tiny(0);
    plan.data.source = "idx";
    plan.data.images = root_ / "img.idx";
    plan.data.labels = root_ / "lbl.idx";
    plan.data.test_count = 20;
    const auto [train, test] = prepare_data(plan);
    EXPECT_EQ(train.size(), 100u);
    EXPECT_EQ(test.size(), 20u);
    EXPECT_NO_THROW(run_experiment(plan));
}

TEST(GridPlans, Counts) {
    ExperimentPlan base;
    base.output_dir = "g";
    const auto six = grid_plans(base, {});
    ASSERT_EQ(six.size(), 6u);
    EXPECT_EQ(six[0].output_dir, fs::path("g/independent_p1_additive"));
    EXPECT_EQ(six[5].output_dir, fs::path("g/poisoning_class_p2_additive"));
    GridOptions all;
    all.all_families = true;
    EXPECT_EQ(grid_plans(base, all).size(), 12u);
    all.lambdas = {0.1, 1.0};
    const auto sweep = grid_plans(base, all);
    ASSERT_EQ(sweep.size(), 24u);
    EXPECT_EQ(sweep[0].output_dir, fs::path("g/independent_p1_additive_lambda0.1"));
    EXPECT_DOUBLE_EQ(sweep[23].attack.lambda, 1.0);
    EXPECT_EQ(sweep[23].family(), attack::Family::multiplicative);
}

TEST_F(ExperimentTest, GridThreadsMatchSerial) {
    auto base = tiny(1);
    base.output_dir = root_ / "serial";
    GridOptions opts;
    const auto serial = run_grid(base, opts);
    base.output_dir = root_ / "parallel";
    opts.threads = 3;
    const auto parallel = run_grid(base, opts);
    ASSERT_EQ(serial.size(), 6u);
    ASSERT_EQ(parallel.size(), 6u);
    EXPECT_EQ(read_text(root_ / "serial" / "summary.csv"), read_text(root_ / "parallel" / "summary.csv"));
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(without_output_dir(read_text(serial[i].report_path)),
                  without_output_dir(read_text(parallel[i].report_path)));
    }
}
