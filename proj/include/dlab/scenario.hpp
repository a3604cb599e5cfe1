#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlab/moser.hpp"

namespace dlab {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr int kSchemaVersion = 1;

// Full default configuration of a scenario id: S1 heat, S2 aronson_serrin, S3 kolmogorov,
// S4 max_principle, S5 pointwise.
json default_config(const std::string& scenario);

// Merges a user config over the defaults of its scenario; unknown or mistyped fields throw
// ConfigError naming the field.
json load_config(const json& user);

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> failures;
    std::vector<std::string> unverified;
    std::size_t reports = 0;
};

RunResult run_scenario(const json& config, const std::string& out_dir, bool strict = false);

const std::vector<std::string>& table_kinds();

// Writes <kind>.csv into the bundle from its JSON files.
void emit_tables(const std::string& bundle, const std::vector<std::string>& kinds);

struct ReplayResult {
    bool identical = false;
    std::vector<std::string> differing;
    double ledger_rel_diff = 0;
};

// Re-runs the bundle's config into `scratch` and compares every file except metadata.json.
ReplayResult replay_bundle(const std::string& bundle, const std::string& scratch);

json report_to_json(const EstimateReport& r);
json ledger_to_json(const ConstantLedger& L);
ConstantLedger ledger_from_json(const json& j);

}  // namespace dlab
