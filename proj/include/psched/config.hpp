#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psched/engine.hpp"
#include "psched/generator.hpp"
#include "psched/metrics.hpp"

namespace psched {

/// Raised for malformed or invalid configuration.
class ConfigError : public StructuralError {
public:
    using StructuralError::StructuralError;
};

/// Default information rate, in nats per millisecond of inference.
inline constexpr double default_lambda_info_per_ms = 0.02;

struct RunConfig {
    PipelineConfig pipeline;
    MetricsConfig metrics;
    GeneratorOptions generator;
    /// Trace file; when empty, runs use a trace generated from `generator`.
    std::string trace_path;
    PolicyKind policy = PolicyKind::Scheduled;
    std::vector<PolicyKind> compare{PolicyKind::Parallel, PolicyKind::Oracle, PolicyKind::Scheduled};
    std::string out_dir = "out";
    /// "coco_wholebody", "uniform", or a path to a sigma table.
    std::string sigma_base = "coco_wholebody";

    /// Resolves the sigma table into the reward config and validates every section. Throws ConfigError.
    void finalize();

    friend bool operator==(const RunConfig&, const RunConfig&);
};

/// Defaults with the sigma table resolved.
RunConfig default_run_config();

/// Parses a config document; any key not listed in the schema is rejected. Missing keys keep defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical serialization; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

}  // namespace psched
