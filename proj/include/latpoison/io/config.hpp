#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpoison/attack/perturbation.hpp"
#include "latpoison/io/checkpoint.hpp"
#include "latpoison/models/train.hpp"

namespace latpoison::io {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    std::string source = "synthetic";  // synthetic | idx
    std::size_t n = 2100;
    std::size_t width = 16;
    std::size_t height = 16;
    std::uint64_t seed = 7;
    std::size_t test_count = 100;
    std::filesystem::path images;
    std::filesystem::path labels;
    std::set<int> positive{1};
};

models::TrainConfig default_vae_config();
models::TrainConfig default_classifier_config();
attack::AttackConfig default_attack_config();

struct ExperimentPlan {
    attack::AttackMode mode = attack::AttackMode::independent;
    DataConfig data;
    models::TrainConfig vae = default_vae_config();
    models::TrainConfig classifier = default_classifier_config();
    attack::AttackConfig attack = default_attack_config();
    double detection_threshold = 2.807;
    std::filesystem::path output_dir = "out";

    // Norm and family live in the attack config.
    attack::NormType norm() const { return attack.norm; }
    attack::Family family() const { return attack.family; }
    std::string label() const;  // e.g. "independent_p2_additive"

    void validate() const;
};

// Every recognised key, in echo order. The CLI exposes each as a long flag
// with '.' and '_' replaced by '-'.
const std::vector<std::string>& config_keys();

// Throws ConfigError for unknown keys or malformed values.
void apply_setting(ExperimentPlan& plan, const std::string& key, const std::string& value);

// Parses "key = value" lines; '#' starts a comment.
void apply_config_text(ExperimentPlan& plan, const std::string& text, const std::string& origin);
void apply_config_file(ExperimentPlan& plan, const std::filesystem::path& path);

// "vae.batch_size" -> "vae-batch-size".
std::string flag_name(const std::string& key);

// Defaults, then the config file (if any), then the overrides in order.
ExperimentPlan resolve_plan(const std::filesystem::path& config_file, const ConfigEcho& overrides);

// Effective configuration as ordered key/value pairs (values round-trip
// through apply_setting).
ConfigEcho echo(const ExperimentPlan& plan);

}  // namespace latpoison::io
