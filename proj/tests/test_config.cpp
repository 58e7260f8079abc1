#include <doctest.h>

#include "psched/config.hpp"

using namespace psched;

TEST_SUITE("config") {

TEST_CASE("defaults round-trip")
{
    const auto c = default_run_config();
    CHECK(parse_config(dump_config(c)) == c);
    CHECK(dump_config(parse_config(dump_config(c))) == dump_config(c));
    CHECK(c.pipeline.reward.lambda_info_per_ms == default_lambda_info_per_ms);
    CHECK(c.pipeline.reward.sigma_base.size() == 133);
}

TEST_CASE("edited configs round-trip")
{
    auto c = parse_config(R"({"policy":"oracle","seed":9,
        "reward":{"lambda_info_per_ms":0.1,"cost_ms":{"yolo":20,"pose":60},"unit":"bits"},
        "engine":{"busy":"queue","accounting":"serial"},
        "metrics":{"tau_box_px":5,"latency_denominator":"all_frames"},
        "generator":{"archetype":"walking","frames":90,"raster":false}})");
    CHECK(c.policy == PolicyKind::Oracle);
    CHECK(c.pipeline.seed == 9);
    CHECK(c.generator.seed == 9);
    CHECK(c.pipeline.reward.unit == InfoUnit::Bits);
    CHECK(c.pipeline.reward.cost_ms.at(ModuleId::pose()) == 60.0);
    CHECK(c.pipeline.engine.busy == BusyPolicy::Queue);
    CHECK(c.metrics.latency_denominator == LatencyDenominator::AllFrames);
    CHECK(c.generator.archetype == Archetype::Walking);
    CHECK(parse_config(dump_config(c)) == c);
}

TEST_CASE("unknown keys are rejected")
{
    CHECK_THROWS_AS(parse_config(R"({"lamda":0.1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"reward":{"lamda":0.1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"noise":{"pose":{"std":1}}})"), ConfigError);
}

TEST_CASE("invalid values are rejected")
{
    CHECK_THROWS_AS(parse_config(R"({"reward":{"lambda_info_per_ms":-0.1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"reward":{"lambda_info_per_ms":"high"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"policy":"greedy"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"generator":{"frames":1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"compare":["parallel"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"reward":{"keypoint_count":17}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("[1,2"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("uniform sigma table follows the keypoint count")
{
    const auto c = parse_config(R"({"reward":{"keypoint_count":17,"sigma_base":"uniform"}})");
    CHECK(c.pipeline.reward.sigma_base.size() == 17);
    CHECK(c.generator.keypoint_count == 17);
}

TEST_CASE("sigma table from a file")
{
    const auto c = parse_config(std::string(R"({"reward":{"sigma_base":")") + PSCHED_DATA_DIR +
                                "/coco_wholebody_sigmas.txt\"}}");
    CHECK(c.pipeline.reward.sigma_base == coco_wholebody_sigmas());
}

}
