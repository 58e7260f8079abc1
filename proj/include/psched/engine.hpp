#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "psched/change_detect.hpp"
#include "psched/rewards.hpp"
#include "psched/runlog.hpp"
#include "psched/toolkit.hpp"
#include "psched/trace.hpp"
#include "psched/tracker.hpp"

namespace psched {

/// Frames on which each module must be activated.
using KeyframeSets = std::map<ModuleId, std::set<std::int64_t>>;

enum class BusyPolicy { Drop, Queue };
enum class OverheadMode { Simulated, Measured };
enum class Accounting { Overlapped, Serial };

std::string_view to_string(BusyPolicy b);
std::string_view to_string(OverheadMode m);
std::string_view to_string(Accounting a);
BusyPolicy parse_busy_policy(std::string_view text);
OverheadMode parse_overhead_mode(std::string_view text);
Accounting parse_accounting(std::string_view text);

struct EngineConfig {
    std::vector<ModuleSpec> modules{{ModuleId::detection(), 15.0, OutputKind::Detections},
                                    {ModuleId::pose(), 80.0, OutputKind::Keypoints}};
    BusyPolicy busy = BusyPolicy::Drop;
    /// Simulated charges a fixed decision time per Scheduled frame; Measured uses host time and is not reproducible.
    OverheadMode overhead = OverheadMode::Simulated;
    double simulated_decision_ms = 0.5;
    /// Serial delays dispatch by the decision time; overlapped runs decisions alongside inference.
    Accounting accounting = Accounting::Overlapped;
    /// Outputs are applied on the frame they are issued and modules are never busy.
    bool instant_outputs = false;
    /// Consecutive detections that may miss a track before it is dropped.
    int max_missed_detections = 1;
    /// Store full module outputs in the run log.
    bool log_outputs = false;

    const ModuleSpec& spec(const ModuleId& id) const;
    void validate() const;
};

/// Everything a run depends on, apart from the trace.
struct PipelineConfig {
    EngineConfig engine;
    RewardConfig reward;
    KalmanConfig kalman;
    ChangeDetectConfig change;
    DetectionNoise detection_noise;
    PoseNoise pose_noise;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Simulated modules for every spec in the engine config, chosen by output kind.
std::vector<std::unique_ptr<PerceptionModule>> make_simulated_modules(const PipelineConfig& cfg,
                                                                      const TraceHeader& header);

struct Track {
    TrackState state;
    EntityKind kind = EntityKind::Object;
    double relevance = 0.0;
    MotionStatus motion = MotionStatus::Moving;
    int missed = 0;
    /// Effective process-noise scale applied on recent frames, used to replay late measurements.
    std::map<std::int64_t, double> noise_scales;
};

class Engine {
public:
    Engine(const Trace& trace, PolicyKind policy, PipelineConfig cfg,
           std::vector<std::unique_ptr<PerceptionModule>> modules, KeyframeSets oracle_labels = {});

    bool done() const { return next_ >= static_cast<std::int64_t>(trace_->frames.size()); }
    /// Processes the next trace frame; throws StructuralError once the trace is exhausted.
    const FrameLog& step();
    RunLog run();

    const std::map<int, Track>& tracks() const { return tracks_; }
    double busy_until(const ModuleId& m) const { return busy_until_.at(m); }
    /// Current scene: last known entities with predicted geometry.
    SceneState scene() const;
    const RunLog& log() const { return log_; }

private:
    struct InFlight {
        ModuleId module;
        FrameStamp issued;
        FrameStamp ready;
        ModuleOutput output;
        std::map<int, TrackState> snapshot;
    };

    void apply(const InFlight& job, std::int64_t now, FrameLog& out);
    void apply_detection(const InFlight& job, const DetectionOutput& det, std::int64_t now);
    void apply_pose(const PoseOutput& pose);
    void detect_changes(const TraceFrame& frame, FrameLog& out);
    std::map<ModuleId, bool> decide(const TraceFrame& frame, bool human_set_changed, FrameLog& out);
    double relevance_of(int id, std::int64_t k) const;

    const Trace* trace_;
    PolicyKind policy_;
    PipelineConfig cfg_;
    std::map<ModuleId, std::unique_ptr<PerceptionModule>> modules_;
    KeyframeSets oracle_;

    std::int64_t next_ = 0;
    std::map<ModuleId, double> busy_until_;
    std::map<ModuleId, std::int64_t> queued_;
    std::vector<InFlight> pending_;
    std::map<int, Track> tracks_;
    std::map<int, ConfidenceHistory> confidence_;
    std::set<int> last_humans_;
    std::map<int, double> last_relevance_;
    RunLog log_;
};

/// Builds simulated modules and runs the whole trace.
RunLog run_pipeline(const Trace& trace, PolicyKind policy, const PipelineConfig& cfg, const KeyframeSets& oracle = {});

}  // namespace psched
