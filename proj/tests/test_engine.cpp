#include <doctest.h>

#include <map>
#include <sstream>

#include "psched/config.hpp"
#include "psched/engine.hpp"
#include "psched/generator.hpp"
#include "support.hpp"

using namespace psched;

namespace {

PipelineConfig default_pipeline(double lambda = default_lambda_info_per_ms)
{
    PipelineConfig cfg = default_run_config().pipeline;
    cfg.reward.lambda_info_per_ms = lambda;
    return cfg;
}

Trace generated(Archetype a, int frames, std::uint64_t seed)
{
    GeneratorOptions opt;
    opt.archetype = a;
    opt.frames = frames;
    opt.seed = seed;
    return generate_trace(opt);
}

// Random scripted scene: a few objects and humans drifting with random velocities, entering and leaving.
Trace random_scene(test::Gen& g, int frames)
{
    struct Actor {
        int id;
        bool human;
        int from, to;
        double x, y, vx, vy, w, h, r;
    };
    std::vector<Actor> actors;
    for (int i = g.integer(1, 5); i > 0; --i) {
        const int from = g.coin(0.5) ? 0 : g.integer(0, frames - 1);
        actors.push_back({static_cast<int>(actors.size()) + 1, g.coin(0.5), from, g.integer(from, frames), g.uniform(50, 500),
                          g.uniform(50, 350), g.coin(0.5) ? 0.0 : g.uniform(-4, 4), g.coin(0.5) ? 0.0 : g.uniform(-3, 3),
                          g.uniform(20, 80), g.uniform(30, 120), g.coin(0.2) ? 0.0 : g.uniform(0.1, 1.0)});
    }
    return test::scripted_trace(frames, [actors](int k) {
        std::vector<TraceEntity> out;
        for (const auto& a : actors) {
            if (k < a.from || k >= a.to) continue;
            const double x = std::clamp(a.x + a.vx * (k - a.from), 0.0, 540.0);
            const double y = std::clamp(a.y + a.vy * (k - a.from), 0.0, 340.0);
            out.push_back(a.human ? test::human_at(a.id, x, y, a.w, a.h, 133, a.r) : test::object_at(a.id, x, y, a.w, a.h, a.r));
        }
        return out;
    });
}

void check_busy_discipline(const RunLog& log)
{
    std::map<ModuleId, double> busy_until;
    for (const auto& f : log.frames)
        for (const auto& m : f.honored) {
            if (busy_until.contains(m)) CHECK(f.time_ms + 1e-9 >= busy_until[m]);
            busy_until[m] = f.time_ms + log.inference_ms(m);
        }
}

void check_applied_once(const RunLog& log)
{
    std::map<std::pair<ModuleId, std::int64_t>, int> applied;
    for (const auto& f : log.frames)
        for (const auto& a : f.applied) {
            ++applied[{a.module, a.issued}];
            CHECK(a.ready == f.index);
            CHECK(a.ready == ready_stamp(FrameStamp::at(a.issued, log.frame_period_ms), log.inference_ms(a.module),
                                         log.frame_period_ms)
                                 .index);
        }
    const auto n = static_cast<std::int64_t>(log.frames.size());
    for (const auto& f : log.frames)
        for (const auto& m : f.honored) {
            const auto ready = ready_stamp(FrameStamp::at(f.index, log.frame_period_ms), log.inference_ms(m), log.frame_period_ms);
            const int expect = ready.index < n ? 1 : 0;
            CHECK(applied[{m, f.index}] == expect);
        }
    for (const auto& [key, count] : applied) CHECK(count <= 1);
}

}  // namespace

TEST_SUITE("sim_engine") {

TEST_CASE("parallel activates both idle modules")
{
    const auto t = generated(Archetype::Static, 30, 1);
    Engine e(t, PolicyKind::Parallel, default_pipeline(), make_simulated_modules(default_pipeline(), t.header));
    const auto& f0 = e.step();
    CHECK(f0.was_honored(ModuleId::detection()));
    CHECK(f0.was_honored(ModuleId::pose()));
    const auto& f1 = e.step();
    CHECK(f1.was_honored(ModuleId::detection()));
    CHECK_FALSE(f1.was_requested(ModuleId::pose()));
}

TEST_CASE("parallel activations form a completion chain")
{
    const auto log = run_pipeline(generated(Archetype::Interaction, 300, 2), PolicyKind::Parallel, default_pipeline());
    for (const auto& m : {ModuleId::detection(), ModuleId::pose()}) {
        std::vector<std::int64_t> on;
        for (const auto& f : log.frames)
            if (f.was_honored(m)) on.push_back(f.index);
        REQUIRE(on.size() > 10);
        CHECK(on.front() == 0);
        for (std::size_t i = 1; i < on.size(); ++i)
            CHECK(on[i] == ready_stamp(FrameStamp::at(on[i - 1]), log.inference_ms(m), log.frame_period_ms).index);
    }
}

TEST_CASE("oracle follows its labels")
{
    const auto t = generated(Archetype::Static, 20, 1);
    KeyframeSets labels{{ModuleId::detection(), {3, 7}}, {ModuleId::pose(), {3, 7}}};
    const auto log = run_pipeline(t, PolicyKind::Oracle, default_pipeline(), labels);
    for (const auto& f : log.frames) {
        const bool labelled = f.index == 3 || f.index == 7;
        CHECK(f.was_requested(ModuleId::detection()) == labelled);
        CHECK(f.was_honored(ModuleId::detection()) == labelled);
        CHECK(f.was_honored(ModuleId::pose()) == labelled);
    }
}

TEST_CASE("oracle drops labels that land on a busy module")
{
    const auto t = generated(Archetype::Static, 20, 1);
    KeyframeSets labels{{ModuleId::pose(), {3, 4}}};
    const auto log = run_pipeline(t, PolicyKind::Oracle, default_pipeline(), labels);
    CHECK(log.frames[3].was_honored(ModuleId::pose()));
    CHECK(log.frames[4].was_requested(ModuleId::pose()));
    CHECK_FALSE(log.frames[4].was_honored(ModuleId::pose()));
    CHECK(log.frames[4].dropped == std::vector<ModuleId>{ModuleId::pose()});
}

TEST_CASE("scheduled stays quiet on an empty scene")
{
    const auto t = test::scripted_trace(300, [](int) { return std::vector<TraceEntity>{}; });
    const auto log = run_pipeline(t, PolicyKind::Scheduled, default_pipeline());
    CHECK(log.frames[0].was_requested(ModuleId::detection()));
    for (std::size_t k = 1; k < log.frames.size(); ++k) CHECK(log.frames[k].requested.empty());
}

TEST_CASE("stationary objects need detection less often than moving ones")
{
    auto scene = [](double speed) {
        return test::scripted_trace(600, [speed](int k) {
            return std::vector<TraceEntity>{test::object_at(1, 100 + speed * (k % 200), 100, 80, 60, 0.5),
                                            test::object_at(2, 300, 200 + speed * (k % 100), 40, 90, 1.0)};
        });
    };
    auto detections = [](const Trace& t) {
        int n = 0;
        for (const auto& f : run_pipeline(t, PolicyKind::Scheduled, default_pipeline()).frames)
            n += f.was_requested(ModuleId::detection());
        return n;
    };
    const int still = detections(scene(0.0));
    CHECK(still < 600);
    CHECK(still < detections(scene(2.0)));
    for (const auto& f : run_pipeline(scene(0.0), PolicyKind::Scheduled, default_pipeline()).frames)
        CHECK_FALSE(f.was_requested(ModuleId::pose()));
}

TEST_CASE("no humans means no pose under scheduled")
{
    test::Gen g(101);
    for (int trial = 0; trial < 5; ++trial) {
        const auto t = test::scripted_trace(200, [x = g.uniform(0, 300)](int k) {
            return std::vector<TraceEntity>{test::object_at(1, x + k, 100, 50, 50), test::object_at(2, 200, 50 + 0.5 * k, 30, 30)};
        });
        const auto log = run_pipeline(t, PolicyKind::Scheduled, default_pipeline());
        for (const auto& f : log.frames) CHECK_FALSE(f.was_requested(ModuleId::pose()));
    }
}

TEST_CASE("zero cost activates exactly when the gain is positive")
{
    const auto t = generated(Archetype::Interaction, 300, 3);
    const auto log = run_pipeline(t, PolicyKind::Scheduled, default_pipeline(0.0));
    for (const auto& f : log.frames)
        for (const auto& r : f.rewards) CHECK(f.was_requested(r.module) == (r.info_gain > 0.0 || r.forced));
}

TEST_CASE("detection is at least as frequent without a cost")
{
    for (auto a : {Archetype::Static, Archetype::Interaction, Archetype::Walking}) {
        const auto t = generated(a, 400, 5);
        auto count = [&](double lambda) {
            int n = 0;
            for (const auto& f : run_pipeline(t, PolicyKind::Scheduled, default_pipeline(lambda)).frames)
                n += f.was_requested(ModuleId::detection());
            return n;
        };
        CHECK(count(0.0) >= count(0.05));
    }
}

TEST_CASE("busy discipline and single application hold under every policy")
{
    test::Gen g(103);
    for (int trial = 0; trial < 6; ++trial) {
        const auto t = trial < 3 ? random_scene(g, 240) : generated(static_cast<Archetype>(trial - 3), 240, 7);
        auto cfg = default_pipeline(g.uniform(0.0, 0.1));
        cfg.engine.busy = g.coin() ? BusyPolicy::Drop : BusyPolicy::Queue;
        cfg.engine.accounting = g.coin() ? Accounting::Overlapped : Accounting::Serial;
        const auto gt_like = KeyframeSets{{ModuleId::detection(), {0, 1, 2, 5, 9, 30}}, {ModuleId::pose(), {0, 1, 2, 40, 41}}};
        for (auto p : {PolicyKind::Parallel, PolicyKind::Oracle, PolicyKind::Scheduled}) {
            const auto log = run_pipeline(t, p, cfg, gt_like);
            check_busy_discipline(log);
            check_applied_once(log);
        }
    }
}

TEST_CASE("zero-noise detections reproduce ground truth")
{
    const auto t = generated(Archetype::Walking, 200, 4);
    auto cfg = default_pipeline();
    cfg.engine.log_outputs = true;
    cfg.detection_noise = DetectionNoise{0.0, 0.0, 0.0, 0.0};
    const auto log = run_pipeline(t, PolicyKind::Scheduled, cfg);
    int checked = 0;
    for (const auto& f : log.frames)
        for (const auto& a : f.applied) {
            if (a.module != ModuleId::detection()) continue;
            REQUIRE(a.payload);
            const auto& det = std::get<DetectionOutput>(*a.payload);
            const auto& truth = t.frames[static_cast<std::size_t>(a.issued)];
            REQUIRE(det.boxes.size() == truth.entities.size());
            for (std::size_t i = 0; i < det.boxes.size(); ++i) {
                CHECK(det.boxes[i].entity_id == truth.entities[i].id);
                CHECK(det.boxes[i].w == truth.entities[i].box.w);
                CHECK(det.boxes[i].x_c == doctest::Approx(truth.entities[i].box.center_x()));
            }
            ++checked;
        }
    CHECK(checked > 20);
}

TEST_CASE("runs are reproducible")
{
    const auto t = generated(Archetype::Walking, 200, 6);
    for (auto p : {PolicyKind::Parallel, PolicyKind::Scheduled}) {
        std::ostringstream a, b;
        write_runlog(a, run_pipeline(t, p, default_pipeline()));
        write_runlog(b, run_pipeline(t, p, default_pipeline()));
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("queue mode serves a dropped request later")
{
    const auto t = generated(Archetype::Static, 20, 1);
    auto cfg = default_pipeline();
    cfg.engine.busy = BusyPolicy::Queue;
    KeyframeSets labels{{ModuleId::pose(), {3, 4}}};
    const auto log = run_pipeline(t, PolicyKind::Oracle, cfg, labels);
    CHECK(log.frames[3].was_honored(ModuleId::pose()));
    CHECK_FALSE(log.frames[4].was_honored(ModuleId::pose()));
    CHECK(log.frames[6].was_honored(ModuleId::pose()));
}

TEST_CASE("decision overhead is charged only to scheduled runs")
{
    const auto t = generated(Archetype::Static, 40, 1);
    for (const auto& f : run_pipeline(t, PolicyKind::Parallel, default_pipeline()).frames) CHECK(f.decision_ms == 0.0);
    for (const auto& f : run_pipeline(t, PolicyKind::Scheduled, default_pipeline()).frames) CHECK(f.decision_ms == 0.5);
}

TEST_CASE("stepping past the end is an error")
{
    const auto t = generated(Archetype::Static, 2, 1);
    Engine e(t, PolicyKind::Parallel, default_pipeline(), make_simulated_modules(default_pipeline(), t.header));
    e.step();
    e.step();
    CHECK(e.done());
    CHECK_THROWS_AS(e.step(), StructuralError);
}

TEST_CASE("scene view carries last known entities")
{
    const auto t = generated(Archetype::Interaction, 10, 1);
    Engine e(t, PolicyKind::Parallel, default_pipeline(), make_simulated_modules(default_pipeline(), t.header));
    for (int i = 0; i < 3; ++i) e.step();
    const auto scene = e.scene();
    CHECK(scene.entities.size() == e.tracks().size());
    CHECK_NOTHROW(scene.validate());
}

TEST_CASE("engine config validation")
{
    auto cfg = default_pipeline();
    cfg.engine.modules.push_back(cfg.engine.modules.front());
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
    CHECK(parse_busy_policy("queue") == BusyPolicy::Queue);
    CHECK_THROWS_AS(parse_accounting("lazy"), StructuralError);
}

}
