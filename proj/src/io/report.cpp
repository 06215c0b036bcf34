#include "latpoison/io/report.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace latpoison::io {

namespace {

std::string real(double v) { return fmt::format("{}", v); }

}  // namespace

std::string format_report(const eval::AttackReport& report, const ConfigEcho& extra) {
    std::string out = "# latpoison attack report\n";
    auto meta = [&out](const std::string& key, const std::string& value) {
        out += fmt::format("# {} = {}\n", key, value);
    };
    for (const auto& [k, v] : report.config) {
        meta(k, v);
    }
    meta("report.mode", attack::to_string(report.mode));
    meta("report.norm", attack::to_string(report.norm));
    meta("report.family", attack::to_string(report.family));
    meta("report.detection_threshold", real(report.detection_threshold));
    meta("report.sparsity_relative_threshold", real(eval::kSparsityRelativeThreshold));
    meta("report.epsilon_plus", real(report.epsilon.plus));
    meta("report.epsilon_minus", real(report.epsilon.minus));
    meta("report.sparsity_fraction", real(report.sparsity.fraction));
    meta("report.max_detection_prob", real(report.max_detection_prob));
    meta("report.reconstruction_confidence", real(eval::reconstruction_confidence(report.rows)));
    for (const auto& [k, v] : extra) {
        meta(k, v);
    }
    out += "row,mean,sd\n";
    for (const auto& row : report.rows) {
        out += fmt::format("{},{:.6f},{:.6f}\n", row.name, row.mean, row.sd);
    }
    return out;
}

void write_report(const eval::AttackReport& report, const std::filesystem::path& path,
                  const ConfigEcho& extra) {
    write_text(format_report(report, extra), path);
}

std::string format_delta_z(const attack::Perturbation& perturbation, double detection_threshold) {
    std::string out = "index,vector,value,detection_prob\n";
    auto dump = [&](const std::vector<double>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out += fmt::format("{},{},{:.6f},{:.6f}\n", i, name, v[i],
                               eval::detection_probability(v[i], detection_threshold));
        }
    };
    dump(perturbation.delta_z, "plus");
    dump(perturbation.reverse_delta_z, "minus");
    return out;
}

void write_delta_z(const attack::Perturbation& perturbation, double detection_threshold,
                   const std::filesystem::path& path) {
    write_text(format_delta_z(perturbation, detection_threshold), path);
}

double ParsedReport::number(const std::string& key) const {
    const auto it = metadata.find(key);
    if (it == metadata.end()) {
        throw ReportError("report has no metadata key '" + key + "'");
    }
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ReportError("report key '" + key + "' is not numeric: " + it->second);
    }
}

ParsedReport parse_report(const std::string& text) {
    ParsedReport parsed;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos && line.size() > 2) {
                parsed.metadata[line.substr(2, eq - 2)] = line.substr(eq + 3);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "row,mean,sd") {
                throw ReportError("unexpected report table header: " + line);
            }
            header_seen = true;
            continue;
        }
        std::istringstream fields(line);
        eval::ConfidenceRow row;
        std::string mean;
        std::string sd;
        if (!std::getline(fields, row.name, ',') || !std::getline(fields, mean, ',') ||
            !std::getline(fields, sd)) {
            throw ReportError("malformed report row: " + line);
        }
        try {
            row.mean = std::stod(mean);
            row.sd = std::stod(sd);
        } catch (const std::exception&) {
            throw ReportError("malformed report row: " + line);
        }
        parsed.rows.push_back(row);
    }
    if (!header_seen) {
        throw ReportError("report has no confidence table");
    }
    return parsed;
}

ParsedReport read_report(const std::filesystem::path& path) { return parse_report(read_text(path)); }

void write_text(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ReportError("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw ReportError("write failed for '" + path.string() + "'");
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ReportError("cannot read '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace latpoison::io
