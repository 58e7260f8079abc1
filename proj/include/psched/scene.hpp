#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psched {

/// Raised when an input violates a structural precondition (shapes, ranges, ids).
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical invariant breaks (loss of positive definiteness, singular solves).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double default_frame_period_ms = 1000.0 / 30.0;

struct FrameStamp {
    std::int64_t index = 0;
    double time_ms = 0.0;

    static FrameStamp at(std::int64_t index, double frame_period_ms = default_frame_period_ms);
    FrameStamp next(double frame_period_ms = default_frame_period_ms) const { return at(index + 1, frame_period_ms); }

    friend bool operator==(const FrameStamp&, const FrameStamp&) = default;
};

/// Axis-aligned pixel rectangle, top-left anchored.
struct PatchRegion {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    bool valid() const { return w > 0.0 && h > 0.0; }
    bool within(double frame_width, double frame_height) const;
    bool intersects(const PatchRegion& other) const;

    static PatchRegion from_center(double cx, double cy, double w, double h) { return {cx - 0.5 * w, cy - 0.5 * h, w, h}; }

    friend bool operator==(const PatchRegion&, const PatchRegion&) = default;
};

enum class EntityKind { Background, Object, Human };
enum class MotionStatus { Stationary, Moving };

std::string_view to_string(EntityKind kind);
std::string_view to_string(MotionStatus status);
EntityKind parse_entity_kind(std::string_view text);

/// Identity of a schedulable perception module. Open set; detection and pose are built in.
class ModuleId {
public:
    ModuleId() = default;
    explicit ModuleId(std::string name);

    static ModuleId detection() { return ModuleId("yolo"); }
    static ModuleId pose() { return ModuleId("pose"); }

    const std::string& name() const { return name_; }

    friend auto operator<=>(const ModuleId&, const ModuleId&) = default;

private:
    std::string name_;
};

struct Entity {
    int id = 0;
    EntityKind kind = EntityKind::Object;
    PatchRegion region;
    MotionStatus motion = MotionStatus::Stationary;
    double relevance = 0.0;
    std::optional<std::vector<double>> keypoint_confidences;

    /// Throws StructuralError on out-of-range relevance, keypoints on non-humans, or bad confidences.
    void validate() const;
};

struct SceneState {
    FrameStamp stamp;
    std::vector<Entity> entities;
    PatchRegion background_region;

    const Entity* find(int id) const;
    void validate() const;
};

/// Geometry the tracker predicted for this frame, keyed by entity id.
using PredictedGeometry = std::map<int, PatchRegion>;

/// Copies the last committed scene to a new frame. Only geometry listed in `predicted` changes.
SceneState carry_forward(const SceneState& prev, FrameStamp stamp, const PredictedGeometry& predicted = {});

}  // namespace psched
