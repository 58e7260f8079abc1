#include "psched/scene.hpp"

#include <algorithm>
#include <set>

namespace psched {

FrameStamp FrameStamp::at(std::int64_t index, double frame_period_ms)
{
    if (index < 0) throw StructuralError("frame index must be non-negative");
    if (!(frame_period_ms > 0.0)) throw StructuralError("frame period must be positive");
    return {index, static_cast<double>(index) * frame_period_ms};
}

bool PatchRegion::within(double frame_width, double frame_height) const
{
    return valid() && x >= 0.0 && y >= 0.0 && x + w <= frame_width && y + h <= frame_height;
}

bool PatchRegion::intersects(const PatchRegion& other) const
{
    return x < other.x + other.w && other.x < x + w && y < other.y + other.h && other.y < y + h;
}

std::string_view to_string(EntityKind kind)
{
    switch (kind) {
    case EntityKind::Background: return "background";
    case EntityKind::Object: return "object";
    case EntityKind::Human: return "human";
    }
    return "object";
}

std::string_view to_string(MotionStatus status)
{
    return status == MotionStatus::Moving ? "moving" : "stationary";
}

EntityKind parse_entity_kind(std::string_view text)
{
    if (text == "background") return EntityKind::Background;
    if (text == "object") return EntityKind::Object;
    if (text == "human") return EntityKind::Human;
    throw StructuralError("unknown entity kind: " + std::string(text));
}

ModuleId::ModuleId(std::string name) : name_(std::move(name))
{
    if (name_.empty()) throw StructuralError("module id must be non-empty");
}

void Entity::validate() const
{
    if (!(relevance >= 0.0 && relevance <= 1.0))
        throw StructuralError("entity " + std::to_string(id) + ": relevance outside [0, 1]");
    if (!region.valid()) throw StructuralError("entity " + std::to_string(id) + ": empty region");
    if (keypoint_confidences) {
        if (kind != EntityKind::Human)
            throw StructuralError("entity " + std::to_string(id) + ": keypoints on a non-human entity");
        for (double c : *keypoint_confidences)
            if (!(c > 0.0 && c <= 1.0))
                throw StructuralError("entity " + std::to_string(id) + ": keypoint confidence outside (0, 1]");
    }
}

const Entity* SceneState::find(int id) const
{
    auto it = std::find_if(entities.begin(), entities.end(), [id](const Entity& e) { return e.id == id; });
    return it == entities.end() ? nullptr : &*it;
}

void SceneState::validate() const
{
    std::set<int> seen;
    for (const auto& e : entities) {
        e.validate();
        if (!seen.insert(e.id).second) throw StructuralError("duplicate entity id " + std::to_string(e.id));
    }
}

SceneState carry_forward(const SceneState& prev, FrameStamp stamp, const PredictedGeometry& predicted)
{
    SceneState next = prev;
    next.stamp = stamp;
    for (auto& e : next.entities) {
        if (auto it = predicted.find(e.id); it != predicted.end()) e.region = it->second;
    }
    return next;
}

}  // namespace psched
