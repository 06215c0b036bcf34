#include "latpoison/io/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace latpoison::io {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::size_t to_count(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || value.front() == '-') {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    }
    return v;
}

double to_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || !std::isfinite(v)) {
        throw ConfigError("config key '" + key + "': expected a finite number, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true|false, got '" + value + "'");
}

std::set<int> to_label_set(const std::string& key, const std::string& value) {
    std::set<int> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto v = to_count(key, trim(item));
        if (v > 255) {
            throw ConfigError("config key '" + key + "': label " + item + " exceeds 255");
        }
        out.insert(static_cast<int>(v));
    }
    if (out.empty()) {
        throw ConfigError("config key '" + key + "': empty label set");
    }
    return out;
}

std::string real(double v) { return fmt::format("{}", v); }

struct Binding {
    std::function<void(ExperimentPlan&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentPlan&)> get;
};

const std::vector<std::pair<std::string, Binding>>& bindings() {
    using P = ExperimentPlan;
    using S = std::string;
    static const std::vector<std::pair<std::string, Binding>> table = {
        {"mode", {[](P& p, const S&, const S& v) {
                      try {
                          p.mode = attack::parse_mode(v);
                      } catch (const std::invalid_argument& e) {
                          throw ConfigError(e.what());
                      }
                  },
                  [](const P& p) { return attack::to_string(p.mode); }}},
        {"norm", {[](P& p, const S&, const S& v) {
                      try {
                          p.attack.norm = attack::parse_norm(v);
                      } catch (const std::invalid_argument& e) {
                          throw ConfigError(e.what());
                      }
                  },
                  [](const P& p) { return attack::to_string(p.attack.norm); }}},
        {"family", {[](P& p, const S&, const S& v) {
                        try {
                            p.attack.family = attack::parse_family(v);
                        } catch (const std::invalid_argument& e) {
                            throw ConfigError(e.what());
                        }
                    },
                    [](const P& p) { return attack::to_string(p.attack.family); }}},
        {"output_dir", {[](P& p, const S&, const S& v) { p.output_dir = v; },
                        [](const P& p) { return p.output_dir.string(); }}},
        {"data.source", {[](P& p, const S& k, const S& v) {
                             if (v != "synthetic" && v != "idx") {
                                 throw ConfigError("config key '" + k +
                                                   "': expected synthetic|idx, got '" + v + "'");
                             }
                             p.data.source = v;
                         },
                         [](const P& p) { return p.data.source; }}},
        {"data.n", {[](P& p, const S& k, const S& v) { p.data.n = to_count(k, v); },
                    [](const P& p) { return std::to_string(p.data.n); }}},
        {"data.width", {[](P& p, const S& k, const S& v) { p.data.width = to_count(k, v); },
                        [](const P& p) { return std::to_string(p.data.width); }}},
        {"data.height", {[](P& p, const S& k, const S& v) { p.data.height = to_count(k, v); },
                         [](const P& p) { return std::to_string(p.data.height); }}},
        {"data.seed", {[](P& p, const S& k, const S& v) { p.data.seed = to_count(k, v); },
                       [](const P& p) { return std::to_string(p.data.seed); }}},
        {"data.test_count",
         {[](P& p, const S& k, const S& v) { p.data.test_count = to_count(k, v); },
          [](const P& p) { return std::to_string(p.data.test_count); }}},
        {"data.images", {[](P& p, const S&, const S& v) { p.data.images = v; },
                         [](const P& p) { return p.data.images.string(); }}},
        {"data.labels", {[](P& p, const S&, const S& v) { p.data.labels = v; },
                         [](const P& p) { return p.data.labels.string(); }}},
        {"data.positive", {[](P& p, const S& k, const S& v) { p.data.positive = to_label_set(k, v); },
                           [](const P& p) {
                               std::string out;
                               for (int l : p.data.positive) {
                                   out += (out.empty() ? "" : ",") + std::to_string(l);
                               }
                               return out;
                           }}},
        {"vae.alpha", {[](P& p, const S& k, const S& v) { p.vae.alpha = to_real(k, v); },
                       [](const P& p) { return real(p.vae.alpha); }}},
        {"vae.beta", {[](P& p, const S& k, const S& v) { p.vae.beta = to_real(k, v); },
                      [](const P& p) { return real(p.vae.beta); }}},
        {"vae.lr", {[](P& p, const S& k, const S& v) { p.vae.lr = to_real(k, v); },
                    [](const P& p) { return real(p.vae.lr); }}},
        {"vae.batch_size", {[](P& p, const S& k, const S& v) { p.vae.batch_size = to_count(k, v); },
                            [](const P& p) { return std::to_string(p.vae.batch_size); }}},
        {"vae.epochs", {[](P& p, const S& k, const S& v) { p.vae.epochs = to_count(k, v); },
                        [](const P& p) { return std::to_string(p.vae.epochs); }}},
        {"vae.latent_dim", {[](P& p, const S& k, const S& v) { p.vae.latent_dim = to_count(k, v); },
                            [](const P& p) { return std::to_string(p.vae.latent_dim); }}},
        {"vae.seed", {[](P& p, const S& k, const S& v) { p.vae.seed = to_count(k, v); },
                      [](const P& p) { return std::to_string(p.vae.seed); }}},
        {"classifier.lr", {[](P& p, const S& k, const S& v) { p.classifier.lr = to_real(k, v); },
                           [](const P& p) { return real(p.classifier.lr); }}},
        {"classifier.batch_size",
         {[](P& p, const S& k, const S& v) { p.classifier.batch_size = to_count(k, v); },
          [](const P& p) { return std::to_string(p.classifier.batch_size); }}},
        {"classifier.epochs",
         {[](P& p, const S& k, const S& v) { p.classifier.epochs = to_count(k, v); },
          [](const P& p) { return std::to_string(p.classifier.epochs); }}},
        {"classifier.seed", {[](P& p, const S& k, const S& v) { p.classifier.seed = to_count(k, v); },
                             [](const P& p) { return std::to_string(p.classifier.seed); }}},
        {"attack.lambda", {[](P& p, const S& k, const S& v) { p.attack.lambda = to_real(k, v); },
                           [](const P& p) { return real(p.attack.lambda); }}},
        {"attack.lr", {[](P& p, const S& k, const S& v) { p.attack.lr = to_real(k, v); },
                       [](const P& p) { return real(p.attack.lr); }}},
        {"attack.epochs", {[](P& p, const S& k, const S& v) { p.attack.epochs = to_count(k, v); },
                           [](const P& p) { return std::to_string(p.attack.epochs); }}},
        {"attack.batch_size",
         {[](P& p, const S& k, const S& v) { p.attack.batch_size = to_count(k, v); },
          [](const P& p) { return std::to_string(p.attack.batch_size); }}},
        {"attack.seed", {[](P& p, const S& k, const S& v) { p.attack.seed = to_count(k, v); },
                         [](const P& p) { return std::to_string(p.attack.seed); }}},
        {"attack.two_vectors",
         {[](P& p, const S& k, const S& v) { p.attack.two_vectors = to_bool(k, v); },
          [](const P& p) { return std::string(p.attack.two_vectors ? "true" : "false"); }}},
        {"attack.random_init",
         {[](P& p, const S& k, const S& v) { p.attack.random_init = to_bool(k, v); },
          [](const P& p) { return std::string(p.attack.random_init ? "true" : "false"); }}},
        {"eval.detection_threshold",
         {[](P& p, const S& k, const S& v) { p.detection_threshold = to_real(k, v); },
          [](const P& p) { return real(p.detection_threshold); }}},
    };
    return table;
}

}  // namespace

models::TrainConfig default_vae_config() {
    models::TrainConfig config;
    config.epochs = 40;
    config.seed = 1;
    return config;
}

models::TrainConfig default_classifier_config() {
    models::TrainConfig config;
    config.epochs = 20;
    config.seed = 2;
    return config;
}

attack::AttackConfig default_attack_config() {
    attack::AttackConfig config;
    config.epochs = 10;
    config.seed = 3;
    return config;
}

std::string ExperimentPlan::label() const {
    std::string mode_name = attack::to_string(mode);
    std::replace(mode_name.begin(), mode_name.end(), '+', '_');
    return mode_name + "_p" + attack::to_string(attack.norm) + "_" + attack::to_string(attack.family);
}

void ExperimentPlan::validate() const {
    try {
        vae.validate();
        classifier.validate();
        attack.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (mode == attack::AttackMode::poisoning_class && !(vae.beta > 0.0)) {
        throw ConfigError("mode poisoning+class requires vae.beta > 0; use mode poisoning instead");
    }
    if (data.source == "idx" && (data.images.empty() || data.labels.empty())) {
        throw ConfigError("data.source = idx requires data.images and data.labels");
    }
    if (!(detection_threshold > 0.0)) {
        throw ConfigError("eval.detection_threshold must be > 0");
    }
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, b] : bindings()) {
            out.push_back(k);
        }
        return out;
    }();
    return keys;
}

void apply_setting(ExperimentPlan& plan, const std::string& key, const std::string& value) {
    for (const auto& [k, b] : bindings()) {
        if (k == key) {
            b.set(plan, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(ExperimentPlan& plan, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, number));
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            apply_setting(plan, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", origin, number, e.what()));
        }
    }
}

void apply_config_file(ExperimentPlan& plan, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(plan, buffer.str(), path.string());
}

std::string flag_name(const std::string& key) {
    std::string out = key;
    std::replace(out.begin(), out.end(), '.', '-');
    std::replace(out.begin(), out.end(), '_', '-');
    return out;
}

ExperimentPlan resolve_plan(const std::filesystem::path& config_file, const ConfigEcho& overrides) {
    ExperimentPlan plan;
    if (!config_file.empty()) {
        apply_config_file(plan, config_file);
    }
    for (const auto& [key, value] : overrides) {
        try {
            apply_setting(plan, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("--") + flag_name(key) + ": " + e.what());
        }
    }
    return plan;
}

ConfigEcho echo(const ExperimentPlan& plan) {
    ConfigEcho out;
    for (const auto& [k, b] : bindings()) {
        out.emplace_back(k, b.get(plan));
    }
    return out;
}

}  // namespace latpoison::io
