#pragma once

#include <json.hpp>

#include "psched/toolkit.hpp"

namespace psched::detail {

nlohmann::json output_to_json(const ModuleId& module, const ModuleOutput& output);

/// Returns the module id and output; stamps are rebuilt from indices with `frame_period_ms`.
std::pair<ModuleId, ModuleOutput> output_from_json(const nlohmann::json& j, double frame_period_ms);

}  // namespace psched::detail
