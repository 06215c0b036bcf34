#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpoison/data/dataset.hpp"
#include "latpoison/eval/metrics.hpp"
#include "latpoison/io/config.hpp"

namespace latpoison::io {

// A pipeline failure: which stage broke and why.
class StageError : public std::runtime_error {
  public:
    StageError(const std::string& stage, const std::string& cause)
        : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

struct ExperimentResult {
    ExperimentPlan plan;
    eval::AttackReport report;
    ConfigEcho extra;  // mask concentration, warnings
    models::VaeParams vae;
    attack::Perturbation perturbation;
    std::filesystem::path report_path;
};

// Loads (or generates) the plan's dataset and splits it into train / test.
std::pair<data::Dataset, data::Dataset> prepare_data(const ExperimentPlan& plan);

// Trains the evaluation classifier, runs the plan's attack mode, evaluates
// and writes into plan.output_dir: vae.lpz, attack_classifier.lpz,
// eval_classifier.lpz, delta_z.lpz, report.csv, delta_z.csv and PGM grids
// (original, reconstruction, attacked, difference for each direction).
ExperimentResult run_experiment(const ExperimentPlan& plan, std::ostream* log = nullptr);

struct GridOptions {
    bool all_families = false;  // 12 plans instead of the 6 additive ones
    std::vector<double> lambdas;  // empty: the base plan's lambda only
    std::size_t threads = 1;
};

// Plans for every mode x norm (x family) (x lambda); each writes into its own
// subdirectory of base.output_dir named by the plan label.
std::vector<ExperimentPlan> grid_plans(const ExperimentPlan& base, const GridOptions& options);

// Runs grid_plans and writes summary.csv into base.output_dir.
std::vector<ExperimentResult> run_grid(const ExperimentPlan& base, const GridOptions& options,
                                       std::ostream* log = nullptr);

std::string format_summary(const std::vector<ExperimentResult>& results);

}  // namespace latpoison::io
