#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ezsdu/preferences.hpp"
#include "ezsdu/report_io.hpp"

namespace ezsdu {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

struct LatticeConfig {
    double dt = 0.01;
    int n_steps = 500;
    std::string tail = "proportional";  // or "zero"
};

struct SolverConfig {
    double epsilon = 0.0;
    double tol = 1e-8;
    int max_iter = 200;
};

struct Scenario {
    std::string id;
    Preferences preferences;
    Market market;
    LatticeConfig lattice;
    SolverConfig solver;
    std::string experiment;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;
};

/// Throws ParseError for malformed JSON and ValidationError (naming the
/// offending field) for schema or range violations.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical form with every default filled in; keys are sorted.
nlohmann::json to_json(const Scenario& scenario);
/// SHA-256 of the compact canonical dump.
std::string input_hash(const Scenario& scenario);

struct ParameterSpec {
    std::string name;
    std::string description;
};

struct CatalogEntry {
    std::string name;
    std::string anchor;
    std::string description;
    std::vector<ParameterSpec> parameters;
};

/// Sorted by name.
const std::vector<CatalogEntry>& experiment_catalog();
nlohmann::json catalog_json();

struct ExperimentOutput {
    CsvTable table;
    nlohmann::json summary;
};

/// Runs the named experiment in memory.
ExperimentOutput execute(const Scenario& scenario);

struct RunManifest {
    std::string scenario_id;
    std::string artifact_version;
    std::string input_hash;
    std::vector<std::string> outputs;
    double wall_clock_seconds;
};

nlohmann::json to_json(const RunManifest& manifest);

/// Writes <experiment>_<id>.csv, <experiment>_<id>.json and <experiment>_<id>.manifest.json
/// into out_dir (created if needed).
RunManifest run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

/// Error document printed by the command-line front end.
nlohmann::json error_json(const std::string& code, const std::string& message, int exit_status);

}  // namespace ezsdu
