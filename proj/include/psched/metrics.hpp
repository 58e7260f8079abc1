#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psched/engine.hpp"
#include "psched/runlog.hpp"

namespace psched {

enum class LatencyDenominator { ActivatedFrames, AllFrames };

std::string_view to_string(LatencyDenominator d);
LatencyDenominator parse_latency_denominator(std::string_view text);

struct MetricsConfig {
    double tau_box_px = 10.0;
    double tau_kp_px = 15.0;
    LatencyDenominator latency_denominator = LatencyDenominator::ActivatedFrames;

    void validate() const;
};

struct GroundTruthKeyframes {
    KeyframeSets required;
};

/// Ground truth from a run that executed every module on every frame with instant outputs and logged payloads.
/// Frame 0 is always required. Afterwards detection is required when the set of detected ids changes or a
/// relevant box center has moved more than tau_box since the last required frame; pose when the set of posed
/// humans changes or a relevant keypoint has moved more than tau_kp since the last required frame.
GroundTruthKeyframes extract_keyframes(const RunLog& offline, const MetricsConfig& cfg);

/// Runs the offline every-frame pass (Parallel, instant outputs, logged payloads) and extracts keyframes.
GroundTruthKeyframes ground_truth(const Trace& trace, const PipelineConfig& cfg, const MetricsConfig& metrics);

/// Keyframe sets as one JSON document: {"schema":"psched.keyframes","version":1,"required":{module:[frames]}}.
std::string keyframes_json(const GroundTruthKeyframes& gt);
GroundTruthKeyframes parse_keyframes(const std::string& text);

/// A count-backed ratio; undefined when the denominator is zero.
struct Ratio {
    std::int64_t numerator = 0;
    std::int64_t denominator = 0;

    std::optional<double> value() const;
    friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Required frames on which the module was actually dispatched.
std::map<ModuleId, Ratio> activation_recall(const RunLog& run, const GroundTruthKeyframes& gt);

/// Required frames on which the policy decided to activate the module, dispatched or not.
std::map<ModuleId, Ratio> keyframe_accuracy(const RunLog& run, const GroundTruthKeyframes& gt);

struct LatencyStat {
    double total_ms = 0.0;  // decision time plus executed inference time
    std::int64_t frames = 0;

    std::optional<double> value() const;
    friend bool operator==(const LatencyStat&, const LatencyStat&) = default;
};

LatencyStat latency(const RunLog& run, LatencyDenominator denominator = LatencyDenominator::ActivatedFrames);

struct MetricsReport {
    PolicyKind policy = PolicyKind::Parallel;
    std::int64_t frames = 0;
    LatencyStat latency;
    std::map<ModuleId, Ratio> recall;
    std::map<ModuleId, Ratio> keyframe_accuracy;
    std::map<ModuleId, std::int64_t> requested;
    std::map<ModuleId, std::int64_t> honored;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport make_report(const RunLog& run, const GroundTruthKeyframes& gt, const MetricsConfig& cfg);

/// Structured form of a report (one JSON object).
std::string report_json(const MetricsReport& report);

/// Aligned table: one row per report, with percent deltas against the first Parallel row when present.
std::string format_table(const std::vector<MetricsReport>& reports);

/// Plot-ready columns: one CSV row per report.
std::string format_csv(const std::vector<MetricsReport>& reports);

}  // namespace psched
