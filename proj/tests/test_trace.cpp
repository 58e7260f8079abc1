#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "psched/engine.hpp"
#include "psched/generator.hpp"
#include "psched/runlog.hpp"
#include "psched/trace.hpp"
#include "support.hpp"

using namespace psched;

namespace {

Trace small_trace(Archetype a, int frames, std::uint64_t seed, bool raster = true)
{
    GeneratorOptions opt;
    opt.archetype = a;
    opt.frames = frames;
    opt.seed = seed;
    opt.raster = raster;
    return generate_trace(opt);
}

std::string dump(const Trace& t)
{
    std::ostringstream ss;
    write_trace(ss, t);
    return ss.str();
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("generated traces round-trip through JSON Lines")
{
    for (auto a : {Archetype::Static, Archetype::Interaction, Archetype::Walking})
        for (bool raster : {true, false}) {
            const auto t = small_trace(a, 60, 3, raster);
            CHECK_NOTHROW(t.validate());
            std::stringstream ss(dump(t));
            const auto back = read_trace(ss);
            CHECK(back == t);
            CHECK(dump(back) == dump(t));
        }
}

TEST_CASE("minimal trace has two records")
{
    const auto t = small_trace(Archetype::Static, 2, 1);
    CHECK(t.frames.size() == 2);
    const auto text = dump(t);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK_THROWS_AS(small_trace(Archetype::Static, 1, 1), StructuralError);
}

TEST_CASE("generation is deterministic per seed")
{
    CHECK(dump(small_trace(Archetype::Walking, 120, 9)) == dump(small_trace(Archetype::Walking, 120, 9)));
    CHECK(dump(small_trace(Archetype::Walking, 120, 9)) != dump(small_trace(Archetype::Walking, 120, 10)));
}

TEST_CASE("static archetype: one human enters, stays, leaves")
{
    const auto t = small_trace(Archetype::Static, 1800, 1, false);
    std::vector<int> present;
    for (const auto& f : t.frames) {
        int humans = 0;
        for (const auto& e : f.entities) humans += e.kind == EntityKind::Human;
        present.push_back(humans);
    }
    CHECK(present.front() == 0);
    CHECK(present.back() == 0);
    int transitions = 0;
    for (std::size_t k = 1; k < present.size(); ++k) transitions += present[k] != present[k - 1];
    CHECK(transitions == 2);
    // Seated phase: the human box barely moves.
    const auto mid = t.frames[900].find(10);
    const auto later = t.frames[1000].find(10);
    REQUIRE(mid);
    REQUIRE(later);
    CHECK(std::hypot(mid->box.center_x() - later->box.center_x(), mid->box.center_y() - later->box.center_y()) < 10.0);
}

TEST_CASE("walking archetype keeps moving")
{
    const auto t = small_trace(Archetype::Walking, 600, 2, false);
    double travelled = 0.0;
    int samples = 0;
    for (std::size_t k = 1; k < t.frames.size(); ++k)
        for (const auto& e : t.frames[k].entities) {
            if (e.kind != EntityKind::Human || e.relevance == 0.0) continue;
            if (const auto* p = t.frames[k - 1].find(e.id)) {
                travelled += std::abs(e.box.center_x() - p->box.center_x());
                ++samples;
            }
        }
    REQUIRE(samples > 50);
    CHECK(travelled / samples > 2.0);
}

TEST_CASE("raster codec round-trips")
{
    test::Gen g(97);
    RgbImage img(13, 7);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(g.integer(0, 255));
    CHECK(decode_raster(13, 7, "zlib+base64", encode_raster(img)) == img);
    CHECK_THROWS_AS(decode_raster(13, 7, "png", encode_raster(img)), TraceError);
    CHECK_THROWS_AS(decode_raster(12, 7, "zlib+base64", encode_raster(img)), TraceError);
}

TEST_CASE("malformed traces are rejected")
{
    const auto good = dump(small_trace(Archetype::Static, 3, 1, false));
    auto reject = [](const std::string& text) {
        std::stringstream ss(text);
        CHECK_THROWS_AS(read_trace(ss), TraceError);
    };
    reject("");
    reject(good.substr(good.find('\n') + 1));
    reject("{\"type\":\"header\",\"schema\":\"other\"}\n");
    reject(good + "{\"type\":\"mystery\"}\n");
    reject(good + "not json\n");
    std::string renumbered = good;
    renumbered.replace(renumbered.find("\"index\":2"), 9, "\"index\":7");
    reject(renumbered);
}

TEST_CASE("trace validation")
{
    auto t = test::scripted_trace(3, [](int) { return std::vector<TraceEntity>{test::object_at(1, 0, 0, 5, 5)}; });
    CHECK_NOTHROW(t.validate());
    t.frames[1].entities.push_back(test::object_at(1, 3, 3, 5, 5));
    CHECK_THROWS_AS(t.validate(), TraceError);
    t.frames[1].entities.pop_back();
    t.frames[2].entities[0].relevance = 2.0;
    CHECK_THROWS_AS(t.validate(), TraceError);
    t.frames[2].entities[0].relevance = 1.0;
    t.frames[2].entities.push_back(test::human_at(4, 0, 0, 5, 5, 12));
    CHECK_THROWS_AS(t.validate(), TraceError);
}

}

TEST_SUITE("runlog") {

TEST_CASE("run logs round-trip")
{
    const auto t = small_trace(Archetype::Interaction, 90, 4);
    PipelineConfig cfg;
    cfg.reward.sigma_base = coco_wholebody_sigmas();
    cfg.reward.lambda_info_per_ms = 0.02;
    for (bool payloads : {false, true})
        for (auto p : {PolicyKind::Parallel, PolicyKind::Scheduled}) {
            cfg.engine.log_outputs = payloads;
            const auto log = run_pipeline(t, p, cfg);
            std::stringstream a;
            write_runlog(a, log);
            const auto back = read_runlog(a);
            std::stringstream b;
            write_runlog(b, back);
            CHECK(a.str() == b.str());
            CHECK(back.frames.size() == log.frames.size());
            CHECK(back.policy == p);
            CHECK(back.inference_ms(ModuleId::pose()) == 80.0);
        }
}

TEST_CASE("malformed run logs are rejected")
{
    auto reject = [](const std::string& text) {
        std::stringstream ss(text);
        CHECK_THROWS_AS(read_runlog(ss), RunLogError);
    };
    reject("");
    reject("{\"type\":\"frame\"}\n");
    reject("{\"type\":\"runlog\",\"schema\":\"psched.runlog\",\"version\":99}\n");
    reject("{\"type\":\"runlog\",\"schema\":\"psched.runlog\",\"version\":1,\"policy\":\"parallel\",\"seed\":1,"
           "\"archetype\":\"x\",\"frames\":2,\"frame_period_ms\":33.3,\"modules\":[]}\n");
    CHECK_THROWS_AS(parse_policy("greedy"), StructuralError);
    CHECK(parse_policy(to_string(PolicyKind::Oracle)) == PolicyKind::Oracle);
}

}
