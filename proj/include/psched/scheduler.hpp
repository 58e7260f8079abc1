#pragma once

#include <map>
#include <span>

#include "psched/rewards.hpp"
#include "psched/scene.hpp"

namespace psched {

using RewardMap = std::map<ModuleId, RewardBreakdown>;

struct ActivationDecision {
    FrameStamp stamp;
    std::map<ModuleId, bool> activations;
    RewardMap rewards;
    double decision_time_ms = 0.0;

    bool active(const ModuleId& id) const
    {
        auto it = activations.find(id);
        return it != activations.end() && it->second;
    }
};

/// Per-module rule: active iff net > 0 or forced. Every id in `registered` must have a reward.
ActivationDecision select(const RewardMap& rewards, std::span<const ModuleId> registered);
ActivationDecision select(const RewardMap& rewards);

/// Exhaustive argmax over all feasible activation vectors; ties go to the fewest activations.
/// Test oracle for select(); limited to 20 modules.
ActivationDecision brute_force_select(const RewardMap& rewards);

}  // namespace psched
