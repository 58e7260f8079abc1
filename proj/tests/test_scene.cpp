#include <doctest.h>

#include "psched/scene.hpp"
#include "support.hpp"

using namespace psched;

TEST_SUITE("scene_model") {

TEST_CASE("carry_forward keeps two entities and advances the stamp")
{
    SceneState prev;
    prev.stamp = FrameStamp::at(5);
    prev.entities = {{1, EntityKind::Object, {10, 10, 20, 20}, MotionStatus::Stationary, 0.3, std::nullopt},
                     {2, EntityKind::Object, {50, 60, 10, 30}, MotionStatus::Moving, 0.7, std::nullopt}};
    const auto next = carry_forward(prev, prev.stamp.next());
    CHECK(next.stamp.index == 6);
    REQUIRE(next.entities.size() == 2);
    CHECK(next.entities[0].region == prev.entities[0].region);
    CHECK(next.entities[1].region == prev.entities[1].region);
}

TEST_CASE("carry_forward of an empty scene")
{
    SceneState prev;
    prev.stamp = FrameStamp::at(3);
    const auto next = carry_forward(prev, FrameStamp::at(4));
    CHECK(next.entities.empty());
    CHECK(next.stamp == FrameStamp::at(4));
}

TEST_CASE("carry_forward keeps human relevance")
{
    SceneState prev;
    prev.entities = {{7, EntityKind::Human, {0, 0, 40, 90}, MotionStatus::Moving, 0.9, std::nullopt}};
    const auto next = carry_forward(prev, FrameStamp::at(1));
    CHECK(next.entities.at(0).relevance == 0.9);
    CHECK(next.entities.at(0).kind == EntityKind::Human);
}

TEST_CASE("carry_forward moves only predicted geometry")
{
    test::Gen g(11);
    for (int trial = 0; trial < 200; ++trial) {
        SceneState prev;
        prev.stamp = FrameStamp::at(g.integer(0, 1000));
        const int n = g.integer(0, 8);
        PredictedGeometry predicted;
        for (int i = 0; i < n; ++i) {
            const auto kind = static_cast<EntityKind>(g.integer(0, 2));
            prev.entities.push_back({i * 3 + 1, kind, {g.uniform(0, 500), g.uniform(0, 400), g.uniform(1, 80), g.uniform(1, 80)},
                                     MotionStatus::Stationary, g.uniform(0, 1), std::nullopt});
            if (g.coin()) predicted[i * 3 + 1] = {g.uniform(0, 500), g.uniform(0, 400), g.uniform(1, 80), g.uniform(1, 80)};
        }
        const auto next = carry_forward(prev, prev.stamp.next(), predicted);
        REQUIRE(next.entities.size() == prev.entities.size());
        for (std::size_t i = 0; i < prev.entities.size(); ++i) {
            const auto& a = prev.entities[i];
            const auto& b = next.entities[i];
            CHECK(a.id == b.id);
            CHECK(a.kind == b.kind);
            CHECK(a.relevance == b.relevance);
            if (auto it = predicted.find(a.id); it != predicted.end())
                CHECK(b.region == it->second);
            else
                CHECK(b.region == a.region);
        }
        CHECK_NOTHROW(next.validate());
    }
}

TEST_CASE("frame time is affine in the index")
{
    test::Gen g(5);
    for (int i = 0; i < 500; ++i) {
        const std::int64_t k = g.integer(0, 1'000'000);
        const double period = g.uniform(1.0, 100.0);
        CHECK(FrameStamp::at(k, period).time_ms == static_cast<double>(k) * period);
    }
    CHECK(FrameStamp::at(30).time_ms == doctest::Approx(1000.0));
    CHECK_THROWS_AS(FrameStamp::at(-1), StructuralError);
    CHECK_THROWS_AS(FrameStamp::at(1, 0.0), StructuralError);
}

TEST_CASE("scene validation rejects duplicates and bad attributes")
{
    SceneState s;
    s.entities = {{1, EntityKind::Object, {0, 0, 1, 1}, MotionStatus::Stationary, 0.5, std::nullopt},
                  {1, EntityKind::Object, {2, 2, 1, 1}, MotionStatus::Stationary, 0.5, std::nullopt}};
    CHECK_THROWS_AS(s.validate(), StructuralError);

    Entity e{1, EntityKind::Object, {0, 0, 1, 1}, MotionStatus::Stationary, 1.5, std::nullopt};
    CHECK_THROWS_AS(e.validate(), StructuralError);
    e.relevance = 0.5;
    e.keypoint_confidences = std::vector<double>{0.5};
    CHECK_THROWS_AS(e.validate(), StructuralError);
    e.kind = EntityKind::Human;
    CHECK_NOTHROW(e.validate());
    e.keypoint_confidences = std::vector<double>{0.0};
    CHECK_THROWS_AS(e.validate(), StructuralError);
}

TEST_CASE("module ids")
{
    CHECK(ModuleId::detection().name() == "yolo");
    CHECK(ModuleId::pose().name() == "pose");
    CHECK(ModuleId("vlm") == ModuleId("vlm"));
    CHECK_THROWS_AS(ModuleId(""), StructuralError);
    CHECK(parse_entity_kind(to_string(EntityKind::Human)) == EntityKind::Human);
    CHECK_THROWS_AS(parse_entity_kind("robot"), StructuralError);
}

}
