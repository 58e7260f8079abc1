#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psched/scheduler.hpp"
#include "psched/toolkit.hpp"

namespace psched {

inline constexpr int runlog_schema_version = 1;

enum class PolicyKind { Parallel, Oracle, Scheduled };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view text);

struct AppliedOutput {
    ModuleId module;
    std::int64_t issued = 0;
    std::int64_t ready = 0;
    /// Boxes or posed humans carried by the output.
    int items = 0;
    /// Full payload, kept only when the engine is asked to log outputs.
    std::optional<ModuleOutput> payload;

    friend bool operator==(const AppliedOutput&, const AppliedOutput&) = default;
};

struct TrackRecord {
    int id = 0;
    EntityKind kind = EntityKind::Object;
    double relevance = 0.0;
    MotionStatus motion = MotionStatus::Stationary;
    PatchRegion box;

    friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

struct ChangeRecord {
    double background_cr = 0.0;
    double histogram_shift = 0.0;
    bool composition_change = false;

    friend bool operator==(const ChangeRecord&, const ChangeRecord&) = default;
};

struct RewardRecord {
    ModuleId module;
    double info_gain = 0.0;
    double cost_penalty = 0.0;
    double net = 0.0;
    bool forced = false;

    friend bool operator==(const RewardRecord&, const RewardRecord&) = default;
};

/// Everything the engine did on one frame.
struct FrameLog {
    std::int64_t index = 0;
    double time_ms = 0.0;
    double decision_ms = 0.0;
    std::vector<ModuleId> requested;  // decided to activate
    std::vector<ModuleId> honored;    // dispatched
    std::vector<ModuleId> dropped;    // decided while busy
    std::vector<RewardRecord> rewards;
    std::vector<AppliedOutput> applied;
    std::vector<TrackRecord> tracks;
    std::map<int, double> relevance;  // task relevance of the entities present in the trace frame
    ChangeRecord change;

    bool was_requested(const ModuleId& m) const;
    bool was_honored(const ModuleId& m) const;

    friend bool operator==(const FrameLog&, const FrameLog&) = default;
};

struct ModuleEntry {
    ModuleId id;
    double inference_ms = 0.0;

    friend bool operator==(const ModuleEntry&, const ModuleEntry&) = default;
};

struct RunLog {
    PolicyKind policy = PolicyKind::Parallel;
    std::uint64_t seed = 0;
    std::string archetype;
    double frame_period_ms = default_frame_period_ms;
    std::vector<ModuleEntry> modules;
    std::vector<FrameLog> frames;

    double inference_ms(const ModuleId& m) const;

    friend bool operator==(const RunLog&, const RunLog&) = default;
};

class RunLogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_runlog(std::ostream& out, const RunLog& log);
void write_runlog(const std::filesystem::path& path, const RunLog& log);
RunLog read_runlog(std::istream& in);
RunLog read_runlog(const std::filesystem::path& path);

}  // namespace psched
