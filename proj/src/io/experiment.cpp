#include "latpoison/io/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "latpoison/io/checkpoint.hpp"
#include "latpoison/io/pgm.hpp"
#include "latpoison/io/report.hpp"
#include "latpoison/models/train.hpp"

namespace latpoison::io {

namespace {

// Samples per class shown in the image grids.
constexpr std::size_t kGridSamples = 8;

std::mutex log_mutex;

void note(std::ostream* log, const std::string& message) {
    if (log != nullptr) {
        std::lock_guard lock(log_mutex);
        *log << message << '\n';
    }
}

template <class F>
auto stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::vector<std::vector<double>> rows_of(const ad::Tensor& t) {
    const auto v = t.values();
    const std::size_t n = t.shape()[0];
    const std::size_t d = t.shape()[1];
    std::vector<std::vector<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].assign(v.begin() + static_cast<std::ptrdiff_t>(i * d),
                      v.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    return out;
}

// Four rows: originals, reconstructions, attacked decodings, scaled differences.
void write_panels(const models::VaeParams& vae, const attack::Perturbation& perturbation,
                  const data::Dataset& test, attack::Direction direction,
                  const std::filesystem::path& path) {
    const int source = direction == attack::Direction::to_class1 ? 0 : 1;
    const auto part = test.with_label(source);
    std::vector<std::size_t> idx(std::min(kGridSamples, part.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    const auto shown = part.subset(idx);
    const auto z = models::encode(shown.image_batch(), vae).mu.detach();
    const auto recon = models::decode(z, vae);
    const auto attacked = models::decode(perturbation.apply(z, direction), vae);
    const auto diffs = eval::pixel_diff(vae, perturbation, shown, direction);

    std::vector<std::vector<double>> tiles = shown.images;
    for (auto& rows : {rows_of(recon), rows_of(attacked), diffs.scaled}) {
        tiles.insert(tiles.end(), rows.begin(), rows.end());
    }
    render_grid(tiles, test.width, test.height, idx.size(), path);
}

}  // namespace

std::pair<data::Dataset, data::Dataset> prepare_data(const ExperimentPlan& plan) {
    return stage("data", [&] {
        data::Dataset full;
        if (plan.data.source == "idx") {
            full = data::load_idx(plan.data.images, plan.data.labels, plan.data.positive);
        } else {
            full = data::generate_synthetic(plan.data.n, plan.data.width, plan.data.height,
                                            plan.data.seed);
        }
        return data::split(full, plan.data.test_count, plan.data.seed);
    });
}

ExperimentResult run_experiment(const ExperimentPlan& plan, std::ostream* log) {
    stage("config", [&] { plan.validate(); });
    const auto started = std::chrono::steady_clock::now();
    const std::string label = plan.label();
    const ConfigEcho config = echo(plan);

    const auto [train, test] = prepare_data(plan);
    note(log, fmt::format("[{}] data: {} train / {} test ({}x{})", label, train.size(),
                          test.size(), train.width, train.height));

    const auto eval_classifier = stage("eval-classifier", [&] {
        return models::train_classifier(train, plan.classifier, models::ClassifierRole::eval);
    });

    models::VaeParams vae;
    models::ClassifierParams attack_classifier;
    attack::Perturbation perturbation;
    stage("attack", [&] {
        switch (plan.mode) {
            case attack::AttackMode::independent: {
                vae = models::train_vae(train, plan.vae);
                attack_classifier = models::train_classifier(train, plan.classifier,
                                                             models::ClassifierRole::attack);
                perturbation =
                    attack::learn_attack_independent(vae, attack_classifier, train, plan.attack);
                break;
            }
            case attack::AttackMode::poisoning:
            case attack::AttackMode::poisoning_class: {
                auto result = plan.mode == attack::AttackMode::poisoning
                                  ? attack::learn_attack_poisoning(train, plan.vae, plan.classifier,
                                                                   plan.attack)
                                  : attack::learn_attack_poisoning_class(
                                        train, plan.vae, plan.classifier, plan.attack);
                vae = std::move(result.vae);
                attack_classifier = std::move(result.attack_classifier);
                perturbation = std::move(result.perturbation);
                break;
            }
        }
    });

    ExperimentResult result{plan, {}, {}, vae, perturbation, plan.output_dir / "report.csv"};
    result.report = stage("evaluate", [&] {
        return eval::build_report(vae, perturbation, eval_classifier, test, plan.mode,
                                  plan.detection_threshold, config);
    });
    stage("evaluate", [&] {
        const auto mask = data::feature_mask(test);
        if (!mask.empty()) {
            for (auto dir : {attack::Direction::to_class1, attack::Direction::to_class0}) {
                const auto diffs = eval::pixel_diff(vae, perturbation, test, dir);
                result.extra.emplace_back(
                    dir == attack::Direction::to_class1 ? "report.mask_concentration_0to1"
                                                        : "report.mask_concentration_1to0",
                    fmt::format("{}", eval::mask_concentration(diffs, mask)));
            }
        }
        if (const auto warning = perturbation.warning()) {
            result.extra.emplace_back("report.warning", *warning);
        }
    });

    stage("write", [&] {
        std::filesystem::create_directories(plan.output_dir);
        save_checkpoint(vae, plan.output_dir / "vae.lpz", config);
        save_checkpoint(attack_classifier, plan.output_dir / "attack_classifier.lpz", config);
        save_checkpoint(eval_classifier, plan.output_dir / "eval_classifier.lpz", config);
        save_checkpoint(perturbation, plan.output_dir / "delta_z.lpz", config);
        write_report(result.report, result.report_path, result.extra);
        write_delta_z(perturbation, plan.detection_threshold, plan.output_dir / "delta_z.csv");
        write_panels(vae, perturbation, test, attack::Direction::to_class1,
                     plan.output_dir / "panels_0to1.pgm");
        write_panels(vae, perturbation, test, attack::Direction::to_class0,
                     plan.output_dir / "panels_1to0.pgm");
    });

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    note(log, fmt::format("[{}] done in {:.1f} s: eps+ {:.4f} eps- {:.4f} sparsity {:.4f}", label,
                          seconds, result.report.epsilon.plus, result.report.epsilon.minus,
                          result.report.sparsity.fraction));
    return result;
}

std::vector<ExperimentPlan> grid_plans(const ExperimentPlan& base, const GridOptions& options) {
    std::vector<attack::Family> families{attack::Family::additive};
    if (options.all_families) {
        families.push_back(attack::Family::multiplicative);
    }
    std::vector<double> lambdas = options.lambdas;
    if (lambdas.empty()) {
        lambdas.push_back(base.attack.lambda);
    }
    std::vector<ExperimentPlan> plans;
    for (double lambda : lambdas) {
        for (auto family : families) {
            for (auto mode : {attack::AttackMode::independent, attack::AttackMode::poisoning,
                              attack::AttackMode::poisoning_class}) {
                for (auto norm : {attack::NormType::l1, attack::NormType::l2}) {
                    ExperimentPlan plan = base;
                    plan.mode = mode;
                    plan.attack.norm = norm;
                    plan.attack.family = family;
                    plan.attack.lambda = lambda;
                    std::string dir = plan.label();
                    if (!options.lambdas.empty()) {
                        dir += fmt::format("_lambda{}", lambda);
                    }
                    plan.output_dir = base.output_dir / dir;
                    plans.push_back(std::move(plan));
                }
            }
        }
    }
    return plans;
}

std::vector<ExperimentResult> run_grid(const ExperimentPlan& base, const GridOptions& options,
                                       std::ostream* log) {
    const auto plans = grid_plans(base, options);
    std::vector<std::optional<ExperimentResult>> slots(plans.size());
    std::vector<std::exception_ptr> errors(plans.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < plans.size(); i = next++) {
            try {
                slots[i] = run_experiment(plans[i], log);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, plans.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    std::vector<ExperimentResult> results;
    for (auto& slot : slots) {
        results.push_back(std::move(*slot));
    }
    stage("write", [&] {
        std::filesystem::create_directories(base.output_dir);
        write_text(format_summary(results), base.output_dir / "summary.csv");
    });
    return results;
}

std::string format_summary(const std::vector<ExperimentResult>& results) {
    std::string out =
        "plan,mode,norm,family,lambda,recon_confidence,attacked_0to1,attacked_1to0,"
        "epsilon_plus,epsilon_minus,sparsity_fraction,max_detection_prob\n";
    for (const auto& r : results) {
        const auto& rows = r.report.rows;
        out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                           r.plan.output_dir.filename().string(), attack::to_string(r.plan.mode),
                           attack::to_string(r.plan.attack.norm),
                           attack::to_string(r.plan.attack.family), r.plan.attack.lambda,
                           eval::reconstruction_confidence(rows), rows[eval::kAttackedTo1].mean,
                           rows[eval::kAttackedTo0].mean, r.report.epsilon.plus,
                           r.report.epsilon.minus, r.report.sparsity.fraction,
                           r.report.max_detection_prob);
    }
    return out;
}

}  // namespace latpoison::io
