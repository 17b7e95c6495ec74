#pragma once

#include "starch/dgp.hpp"
#include "starch/estimators.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace starch {

/// Library version string.
const char* version() noexcept;

enum class Design { M1, M2, M3, Custom };

const char* design_name(Design d);
Design parse_design(const std::string& text);

struct ExperimentConfig {
    std::string name = "custom";
    Design design = Design::Custom;
    ModelSpec spec;
    Theta theta0;
    int side = 8;  ///< lattice side, n = side^2
    Index T = 20;
    ErrorLaw errors;
    int replications = 200;
    Stage stage = Stage::Best;
    VcovForm vcov = VcovForm::Auto;
    std::uint64_t seed = 1;
    int workers = 1;
    int burn_in = 200;
    double coverage_level = 0.95;
    /// Built from the design when empty.
    std::shared_ptr<const SpatialWeightSet> weights;

    Index n() const noexcept { return static_cast<Index>(side) * side; }
    void validate() const;
    /// Canonical one-line description; hashed into the manifest.
    std::string describe() const;
};

/// Pins spec, theta0 and weights of M1/M2/M3 for a lattice side and T.
ExperimentConfig design_config(Design design, int side, Index T, const ErrorLaw& errors);

/// Named presets "table-a{1,2,3}-{gaussian,t3}-{small,large}".
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

struct ReplicationOutcome {
    bool ok = false;
    Vector theta;
    Vector se;
    std::string failure;  ///< failure class when !ok
    std::string message;
};

struct ExperimentResult {
    std::string name;
    std::string column;  ///< e.g. "gaussian n=64 T=20"
    std::vector<std::string> labels;
    Vector theta0;
    Vector bias;
    Vector mae;
    Vector coverage;     ///< share of finite-SE replications covering theta0
    Vector mean_se;
    Vector sd;           ///< Monte Carlo standard deviation of the estimates
    int replications = 0;
    int successes = 0;
    int failures = 0;
    std::map<std::string, int> failure_reasons;
    bool unreliable = false;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::vector<ReplicationOutcome> outcomes;
};

/// Share of failed replications above which a result is flagged unreliable.
inline constexpr double kUnreliableFailureShare = 0.05;

/// Seed of replication `index` under master seed `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Runs one replication: simulate, transform, estimate.
ReplicationOutcome run_replication(const ExperimentConfig& config, std::uint64_t index);

/// Runs all replications on `workers` threads; results are indexed, so the
/// aggregate does not depend on the worker count.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregates per-replication outcomes into bias, MAE and coverage.
ExperimentResult aggregate(const ExperimentConfig& config, std::vector<ReplicationOutcome> outcomes);

enum class TableFormat { Text, Csv };

/// Bias block then MAE block, parameters as rows, one column per result.
std::string emit_table(const std::vector<ExperimentResult>& results, TableFormat format);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a(const std::string& text) noexcept;

/// JSON manifest: seed, config hash, version, timing and failure counts.
std::string manifest_json(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace starch
