#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psched/change_detect.hpp"
#include "psched/scene.hpp"

namespace psched {

inline constexpr int trace_schema_version = 1;

struct Keypoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// Ground-truth record of one entity in one frame.
struct TraceEntity {
    int id = 0;
    EntityKind kind = EntityKind::Object;
    PatchRegion box;
    double relevance = 0.0;
    std::vector<Keypoint> keypoints;    // humans only, keypoint_count entries
    std::optional<double> change_ratio;  // precomputed variant

    friend bool operator==(const TraceEntity&, const TraceEntity&) = default;
};

enum class TraceEventKind { Enter, Exit };

struct TraceEvent {
    TraceEventKind kind = TraceEventKind::Enter;
    int entity_id = 0;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Precomputed background statistics for traces that carry no raster.
struct PrecomputedChange {
    double background_change_ratio = 0.0;
    double histogram_shift = 0.0;

    friend bool operator==(const PrecomputedChange&, const PrecomputedChange&) = default;
};

struct TraceFrame {
    FrameStamp stamp;
    std::vector<TraceEntity> entities;
    std::vector<TraceEvent> events;
    std::optional<RgbImage> raster;
    std::optional<PrecomputedChange> change;

    const TraceEntity* find(int id) const;

    friend bool operator==(const TraceFrame&, const TraceFrame&) = default;
};

struct TraceHeader {
    int version = trace_schema_version;
    std::string archetype = "custom";
    std::uint64_t seed = 0;
    double frame_width = 640.0;
    double frame_height = 480.0;
    double frame_period_ms = default_frame_period_ms;
    int keypoint_count = 133;
    /// Frame pixels per raster pixel.
    double raster_scale = 4.0;

    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct Trace {
    TraceHeader header;
    std::vector<TraceFrame> frames;

    /// Checks frame numbering, entity ranges, keypoint counts and raster shapes.
    void validate() const;

    /// Maps a frame-pixel region into raster coordinates.
    PatchRegion to_raster(const PatchRegion& frame_region) const;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Raised for malformed or inconsistent trace and replay files.
class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_trace(std::ostream& out, const Trace& trace);
void write_trace(const std::filesystem::path& path, const Trace& trace);
Trace read_trace(std::istream& in);
Trace read_trace(const std::filesystem::path& path);

// Raster payload codec shared by traces and tests.
std::string encode_raster(const RgbImage& image);
RgbImage decode_raster(int width, int height, const std::string& encoding, const std::string& data);

}  // namespace psched
