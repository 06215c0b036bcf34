// latpoison command-line front end.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "latpoison/data/dataset.hpp"
#include "latpoison/io/checkpoint.hpp"
#include "latpoison/io/config.hpp"
#include "latpoison/io/experiment.hpp"
#include "latpoison/io/pgm.hpp"
#include "latpoison/io/report.hpp"
#include "latpoison/models/train.hpp"

namespace fs = std::filesystem;
using namespace latpoison;

namespace {

// --config plus one long flag per config key.
struct PlanFlags {
    std::string config;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
        for (const auto& key : io::config_keys()) {
            app->add_option("--" + io::flag_name(key), values[key], "overrides " + key);
        }
    }

    io::ExperimentPlan resolve(CLI::App* app) const {
        io::ConfigEcho overrides;
        for (const auto& key : io::config_keys()) {
            if (app->count("--" + io::flag_name(key)) > 0) {
                overrides.emplace_back(key, values.at(key));
            }
        }
        auto plan = io::resolve_plan(config, overrides);
        plan.validate();
        return plan;
    }
};

void require_role(const models::ClassifierParams& clf, models::ClassifierRole role,
                  const std::string& path) {
    if (clf.role != role) {
        throw std::runtime_error(fmt::format("'{}' holds a {} classifier, expected {}", path,
                                             models::to_string(clf.role), models::to_string(role)));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-space adversarial attacks on a VAE"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as IDX files");
    std::size_t gen_n = 2100, gen_w = 16, gen_h = 16;
    std::uint64_t gen_seed = 7;
    std::string gen_images, gen_labels;
    gen->add_option("--n", gen_n, "sample count (even)");
    gen->add_option("--width", gen_w);
    gen->add_option("--height", gen_h);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--images", gen_images, "output IDX image file")->required();
    gen->add_option("--labels", gen_labels, "output IDX label file")->required();

    // train-vae
    auto* tv = app.add_subcommand("train-vae", "Train a VAE on the training split");
    PlanFlags tv_flags;
    tv_flags.attach(tv);
    std::string tv_out;
    tv->add_option("--out", tv_out, "VAE checkpoint path")->required();

    // train-classifier
    auto* tc = app.add_subcommand("train-classifier", "Train an attack or eval classifier");
    PlanFlags tc_flags;
    tc_flags.attach(tc);
    std::string tc_out, tc_role = "eval";
    tc->add_option("--role", tc_role, "attack|eval")->check(CLI::IsMember({"attack", "eval"}));
    tc->add_option("--out", tc_out, "classifier checkpoint path")->required();

    // learn-attack
    auto* la = app.add_subcommand("learn-attack", "Learn delta_z for the configured mode");
    PlanFlags la_flags;
    la_flags.attach(la);
    std::string la_vae, la_clf, la_out, la_vae_out;
    la->add_option("--vae", la_vae, "pre-trained VAE (independent mode)");
    la->add_option("--classifier", la_clf, "attack classifier (independent mode)");
    la->add_option("--out", la_out, "perturbation checkpoint path")->required();
    la->add_option("--vae-out", la_vae_out, "where poisoning modes write the trained VAE");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Confidence table and metrics on the test split");
    PlanFlags ev_flags;
    ev_flags.attach(ev);
    std::string ev_vae, ev_pert, ev_clf, ev_out, ev_dz;
    ev->add_option("--vae", ev_vae)->required();
    ev->add_option("--perturbation", ev_pert)->required();
    ev->add_option("--classifier", ev_clf, "eval classifier")->required();
    ev->add_option("--out", ev_out, "report path (default: stdout)");
    ev->add_option("--delta-z-out", ev_dz, "delta_z element dump path");

    // run
    auto* run = app.add_subcommand("run", "Run one full experiment plan");
    PlanFlags run_flags;
    run_flags.attach(run);

    // run-grid
    auto* grid = app.add_subcommand("run-grid", "Run all mode x norm plans (6, or 12 with --all-families)");
    PlanFlags grid_flags;
    grid_flags.attach(grid);
    io::GridOptions grid_options;
    bool lambda_sweep = false;
    grid->add_flag("--all-families", grid_options.all_families, "include multiplicative plans");
    grid->add_flag("--lambda-sweep", lambda_sweep, "repeat for lambda in {0.001, 0.01, 0.1, 1}");
    grid->add_option("--threads", grid_options.threads, "plans run in parallel")
        ->check(CLI::PositiveNumber);

    // render
    auto* rd = app.add_subcommand("render", "Tile IDX images into a PGM grid");
    std::string rd_images, rd_labels, rd_out;
    std::size_t rd_count = 16, rd_columns = 8;
    rd->add_option("--images", rd_images)->required()->check(CLI::ExistingFile);
    rd->add_option("--labels", rd_labels)->required()->check(CLI::ExistingFile);
    rd->add_option("--count", rd_count, "images to tile")->check(CLI::PositiveNumber);
    rd->add_option("--columns", rd_columns)->check(CLI::PositiveNumber);
    rd->add_option("--out", rd_out, "PGM output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto ds = data::generate_synthetic(gen_n, gen_w, gen_h, gen_seed);
            data::save_idx(ds, gen_images, gen_labels);
            std::cout << ds.source_descriptor << '\n';
        } else if (*tv) {
            const auto plan = tv_flags.resolve(tv);
            const auto [train, test] = io::prepare_data(plan);
            models::TrainHistory history;
            const auto vae = models::train_vae(train, plan.vae, std::nullopt, &history);
            io::save_checkpoint(vae, tv_out, io::echo(plan));
            std::cout << fmt::format("J_vae {:.6f} -> {:.6f}; test reconstruction BCE {:.6f}\n",
                                     history.initial_loss,
                                     history.epoch_losses.empty() ? history.initial_loss
                                                                  : history.epoch_losses.back(),
                                     models::reconstruction_bce(vae, test));
        } else if (*tc) {
            const auto plan = tc_flags.resolve(tc);
            const auto [train, test] = io::prepare_data(plan);
            const auto clf = models::train_classifier(train, plan.classifier,
                                                      models::parse_classifier_role(tc_role));
            io::save_checkpoint(clf, tc_out, io::echo(plan));
            std::cout << fmt::format("test accuracy {:.4f}\n", models::accuracy(clf, test));
        } else if (*la) {
            const auto plan = la_flags.resolve(la);
            const auto [train, test] = io::prepare_data(plan);
            attack::Perturbation pert;
            if (plan.mode == attack::AttackMode::independent) {
                if (la_vae.empty() || la_clf.empty()) {
                    throw std::runtime_error("independent mode needs --vae and --classifier");
                }
                const auto clf = io::load_classifier(la_clf);
                require_role(clf, models::ClassifierRole::attack, la_clf);
                pert = attack::learn_attack_independent(io::load_vae(la_vae), clf, train,
                                                        plan.attack);
            } else {
                if (la_vae_out.empty()) {
                    throw std::runtime_error("poisoning modes need --vae-out for the trained VAE");
                }
                auto result = plan.mode == attack::AttackMode::poisoning
                                  ? attack::learn_attack_poisoning(train, plan.vae, plan.classifier,
                                                                   plan.attack)
                                  : attack::learn_attack_poisoning_class(
                                        train, plan.vae, plan.classifier, plan.attack);
                io::save_checkpoint(result.vae, la_vae_out, io::echo(plan));
                pert = std::move(result.perturbation);
            }
            io::save_checkpoint(pert, la_out, io::echo(plan));
            if (const auto warning = pert.warning()) {
                std::cerr << "warning: " << *warning << '\n';
            }
        } else if (*ev) {
            const auto plan = ev_flags.resolve(ev);
            const auto [train, test] = io::prepare_data(plan);
            const auto clf = io::load_classifier(ev_clf);
            require_role(clf, models::ClassifierRole::eval, ev_clf);
            const auto pert = io::load_perturbation(ev_pert);
            const auto report = eval::build_report(io::load_vae(ev_vae), pert, clf, test,
                                                   pert.provenance, plan.detection_threshold,
                                                   io::echo(plan));
            if (ev_out.empty()) {
                std::cout << io::format_report(report);
            } else {
                io::write_report(report, ev_out);
            }
            if (!ev_dz.empty()) {
                io::write_delta_z(pert, plan.detection_threshold, ev_dz);
            }
        } else if (*run) {
            const auto plan = run_flags.resolve(run);
            const auto result = io::run_experiment(plan, &std::cerr);
            std::cout << io::read_text(result.report_path);
        } else if (*grid) {
            const auto plan = grid_flags.resolve(grid);
            if (lambda_sweep) {
                grid_options.lambdas = {0.001, 0.01, 0.1, 1.0};
            }
            const auto results = io::run_grid(plan, grid_options, &std::cerr);
            std::cout << io::format_summary(results);
        } else if (*rd) {
            const auto ds = data::load_idx(rd_images, rd_labels, {1});
            std::vector<std::vector<double>> tiles(
                ds.images.begin(),
                ds.images.begin() + static_cast<std::ptrdiff_t>(std::min(rd_count, ds.size())));
            io::render_grid(tiles, ds.width, ds.height, rd_columns, rd_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
