#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "psched/trace.hpp"

namespace psched::test {

// Small hand-rolled generator for property tests.
struct Gen {
    std::mt19937_64 rng;

    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
};

// Trace without rasters. `entities_at(k)` scripts the ground truth of frame k; an entity is flagged as changed
// when its box moved since the previous frame.
inline Trace scripted_trace(int frames, const std::function<std::vector<TraceEntity>(int)>& entities_at,
                            int keypoint_count = 133)
{
    Trace t;
    t.header.archetype = "custom";
    t.header.keypoint_count = keypoint_count;
    std::vector<TraceEntity> prev;
    for (int k = 0; k < frames; ++k) {
        TraceFrame f;
        f.stamp = FrameStamp::at(k, t.header.frame_period_ms);
        f.entities = entities_at(k);
        for (auto& e : f.entities) {
            double cr = 0.0;
            for (const auto& p : prev)
                if (p.id == e.id && !(p.box == e.box)) cr = 1.0;
            e.change_ratio = cr;
        }
        f.change = PrecomputedChange{};
        prev = f.entities;
        t.frames.push_back(std::move(f));
    }
    return t;
}

inline TraceEntity object_at(int id, double x, double y, double w, double h, double relevance = 1.0)
{
    return {id, EntityKind::Object, {x, y, w, h}, relevance, {}, std::nullopt};
}

// Human with a keypoint grid spread over its box.
inline TraceEntity human_at(int id, double x, double y, double w, double h, int keypoint_count = 133,
                            double relevance = 1.0)
{
    TraceEntity e{id, EntityKind::Human, {x, y, w, h}, relevance, {}, std::nullopt};
    const int cols = 7;
    for (int i = 0; i < keypoint_count; ++i) {
        const int r = i / cols;
        const int c = i % cols;
        e.keypoints.push_back({x + w * (c + 0.5) / cols, y + h * (r + 0.5) / ((keypoint_count + cols - 1) / cols)});
    }
    return e;
}

}  // namespace psched::test
