#pragma once

#include <cstdint>
#include <string_view>

#include "psched/trace.hpp"

namespace psched {

/// Scene archetypes: seated reading (static), eating at a table (interaction), pedestrians (walking).
enum class Archetype { Static, Interaction, Walking };

std::string_view to_string(Archetype a);
Archetype parse_archetype(std::string_view text);

struct GeneratorOptions {
    Archetype archetype = Archetype::Static;
    int frames = 1800;
    std::uint64_t seed = 1;
    /// Embed low-resolution RGB rasters; otherwise emit precomputed change statistics.
    bool raster = true;
    double frame_width = 640.0;
    double frame_height = 480.0;
    double raster_scale = 4.0;
    double frame_period_ms = default_frame_period_ms;
    int keypoint_count = 133;
};

/// Deterministic per (options); throws StructuralError for fewer than two frames.
Trace generate_trace(const GeneratorOptions& options);

/// Normalized (u, v) keypoint layout inside a unit human box.
std::vector<Keypoint> keypoint_template(int keypoint_count);

}  // namespace psched
