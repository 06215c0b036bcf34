#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpoison/eval/metrics.hpp"
#include "latpoison/io/checkpoint.hpp"

namespace latpoison::io {

class ReportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Report layout: a '#'-commented "key = value" metadata block (configuration,
// thresholds, scalar metrics, then any extra entries) followed by the
// confidence table as CSV with header "row,mean,sd". Reals use 6 decimals in
// the table and shortest round-trip form in the metadata.
std::string format_report(const eval::AttackReport& report, const ConfigEcho& extra = {});
void write_report(const eval::AttackReport& report, const std::filesystem::path& path,
                  const ConfigEcho& extra = {});

// "index,vector,value,detection_prob"; vector is "plus" or "minus".
std::string format_delta_z(const attack::Perturbation& perturbation, double detection_threshold);
void write_delta_z(const attack::Perturbation& perturbation, double detection_threshold,
                   const std::filesystem::path& path);

struct ParsedReport {
    std::map<std::string, std::string> metadata;
    std::vector<eval::ConfidenceRow> rows;

    double number(const std::string& key) const;
};

ParsedReport parse_report(const std::string& text);
ParsedReport read_report(const std::filesystem::path& path);

void write_text(const std::string& text, const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace latpoison::io
