#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <variant>
#include <vector>

#include "psched/scene.hpp"
#include "psched/trace.hpp"

namespace psched {

enum class OutputKind { Detections, Keypoints };

struct ModuleSpec {
    ModuleId id;
    double inference_ms = 1.0;
    OutputKind output_kind = OutputKind::Detections;

    void validate() const;
};

struct DetectedBox {
    int entity_id = 0;
    EntityKind kind = EntityKind::Object;
    double x_c = 0.0;
    double y_c = 0.0;
    double w = 0.0;
    double h = 0.0;
    double score = 1.0;

    friend bool operator==(const DetectedBox&, const DetectedBox&) = default;
};

struct DetectionOutput {
    FrameStamp stamp_issued;
    FrameStamp stamp_ready;
    std::vector<DetectedBox> boxes;

    friend bool operator==(const DetectionOutput&, const DetectionOutput&) = default;
};

struct PosedKeypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 1.0;

    friend bool operator==(const PosedKeypoint&, const PosedKeypoint&) = default;
};

struct HumanPose {
    int entity_id = 0;
    std::vector<PosedKeypoint> keypoints;

    friend bool operator==(const HumanPose&, const HumanPose&) = default;
};

struct PoseOutput {
    FrameStamp stamp_issued;
    FrameStamp stamp_ready;
    std::vector<HumanPose> per_human;

    friend bool operator==(const PoseOutput&, const PoseOutput&) = default;
};

using ModuleOutput = std::variant<DetectionOutput, PoseOutput>;

/// First frame boundary at or after issue time + inference time.
FrameStamp ready_stamp(const FrameStamp& issued, double inference_ms, double frame_period_ms);

struct DetectionNoise {
    double center_std_px = 0.0;
    double size_std_px = 0.0;
    double miss_rate = 0.0;
    double false_positive_rate = 0.0;

    void validate() const;
};

/// Confidence = (1 - floor_margin) * (1 - spread * B), B ~ Beta(beta_a, beta_b), clamped to (0, 1].
struct PoseNoise {
    double position_std_px = 0.0;
    double confidence_spread = 0.0;
    double beta_a = 2.0;
    double beta_b = 5.0;
    double floor_margin = 0.05;
    double miss_rate = 0.0;

    void validate() const;
};

DetectionOutput simulate_detection(const TraceFrame& frame, const ModuleSpec& spec, const DetectionNoise& noise,
                                   std::uint64_t seed, const TraceHeader& header);

PoseOutput simulate_pose(const TraceFrame& frame, const ModuleSpec& spec, const PoseNoise& noise, std::uint64_t seed,
                         const TraceHeader& header);

/// Raised by replay lookups; carries the nearest recorded frame when there is one.
class ReplayError : public std::runtime_error {
public:
    ReplayError(const std::string& what, std::optional<std::int64_t> nearest)
        : std::runtime_error(what), nearest_(nearest)
    {
    }
    std::optional<std::int64_t> nearest_index() const { return nearest_; }

private:
    std::optional<std::int64_t> nearest_;
};

/// Pre-recorded module outputs, keyed by module and issue frame.
class ReplayLog {
public:
    explicit ReplayLog(double frame_period_ms = default_frame_period_ms) : frame_period_ms_(frame_period_ms) {}

    static ReplayLog load(const std::filesystem::path& path);
    static ReplayLog parse(std::istream& in);

    void add(const ModuleId& module, ModuleOutput output);
    void write(std::ostream& out) const;

    const ModuleOutput& output(const ModuleId& module, const FrameStamp& stamp) const;
    bool has_module(const ModuleId& module) const { return records_.contains(module); }

private:
    double frame_period_ms_;
    std::map<ModuleId, std::map<std::int64_t, ModuleOutput>> records_;
};

ModuleOutput replay_output(const ReplayLog& log, const ModuleId& module, const FrameStamp& stamp);

/// Uniform interface of a schedulable perception module.
class PerceptionModule {
public:
    virtual ~PerceptionModule() = default;
    virtual const ModuleSpec& spec() const = 0;
    /// Output for the frame the activation was issued on. Stamps are filled by the caller.
    virtual ModuleOutput infer(const TraceFrame& frame) = 0;
};

class SimulatedDetector final : public PerceptionModule {
public:
    SimulatedDetector(ModuleSpec spec, DetectionNoise noise, std::uint64_t seed, TraceHeader header);
    const ModuleSpec& spec() const override { return spec_; }
    ModuleOutput infer(const TraceFrame& frame) override;

private:
    ModuleSpec spec_;
    DetectionNoise noise_;
    std::uint64_t seed_;
    TraceHeader header_;
};

class SimulatedPoseEstimator final : public PerceptionModule {
public:
    SimulatedPoseEstimator(ModuleSpec spec, PoseNoise noise, std::uint64_t seed, TraceHeader header);
    const ModuleSpec& spec() const override { return spec_; }
    ModuleOutput infer(const TraceFrame& frame) override;

private:
    ModuleSpec spec_;
    PoseNoise noise_;
    std::uint64_t seed_;
    TraceHeader header_;
};

class ReplayModule final : public PerceptionModule {
public:
    ReplayModule(ModuleSpec spec, std::shared_ptr<const ReplayLog> log);
    const ModuleSpec& spec() const override { return spec_; }
    ModuleOutput infer(const TraceFrame& frame) override;

private:
    ModuleSpec spec_;
    std::shared_ptr<const ReplayLog> log_;
};

/// Deterministic 64-bit mix used to derive per-frame RNG streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace psched
