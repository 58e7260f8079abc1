#include "psched/scheduler.hpp"

#include <bit>
#include <cstdint>
#include <vector>

namespace psched {

ActivationDecision select(const RewardMap& rewards, std::span<const ModuleId> registered)
{
    for (const auto& id : registered)
        if (!rewards.contains(id)) throw StructuralError("select: no reward entry for module " + id.name());
    return select(rewards);
}

ActivationDecision select(const RewardMap& rewards)
{
    ActivationDecision d;
    d.rewards = rewards;
    for (const auto& [id, r] : rewards) d.activations[id] = r.forced || r.net > 0.0;
    return d;
}

ActivationDecision brute_force_select(const RewardMap& rewards)
{
    if (rewards.size() > 20) throw StructuralError("brute_force_select: more than 20 modules");
    std::vector<const RewardBreakdown*> items;
    std::uint32_t forced_mask = 0;
    for (const auto& [id, r] : rewards) {
        if (r.forced) forced_mask |= 1u << items.size();
        items.push_back(&r);
    }

    const std::uint32_t n = static_cast<std::uint32_t>(items.size());
    std::uint32_t best = forced_mask;
    double best_sum = 0.0;
    bool have_best = false;
    for (std::uint32_t a = 0; a < (1u << n); ++a) {
        if ((a & forced_mask) != forced_mask) continue;
        double sum = 0.0;
        for (std::uint32_t j = 0; j < n; ++j)
            if (a & (1u << j)) sum += items[j]->net;
        const bool better = !have_best || sum > best_sum ||
                            (sum == best_sum && std::popcount(a) < std::popcount(best));
        if (better) {
            best = a;
            best_sum = sum;
            have_best = true;
        }
    }

    ActivationDecision d;
    d.rewards = rewards;
    std::uint32_t j = 0;
    for (const auto& [id, r] : rewards) d.activations[id] = (best >> j++) & 1u;
    return d;
}

}  // namespace psched
