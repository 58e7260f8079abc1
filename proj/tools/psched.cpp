// psched: trace generation, single runs, policy comparison, metric reports and config handling.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "psched/config.hpp"

namespace fs = std::filesystem;
using namespace psched;

namespace {

enum Exit { ok = 0, config_error = 2, trace_error = 3, runtime_error = 4 };

struct Overrides {
    std::string config;
    std::string trace;
    std::string policy;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string archetype;
    std::optional<int> frames;
    std::optional<double> lambda;
    std::optional<double> cost_yolo;
    std::optional<double> cost_pose;

    void attach(CLI::App* app, bool with_policy)
    {
        app->add_option("--config", config, "JSON config file");
        app->add_option("--trace", trace, "trace file (JSON Lines); generated from the config when absent");
        if (with_policy) app->add_option("--policy", policy, "parallel | oracle | scheduled");
        app->add_option("--seed", seed, "seed for generation and simulated modules");
        app->add_option("--out", out, "output directory");
        app->add_option("--archetype", archetype, "static | interaction | walking");
        app->add_option("--frames", frames, "generated trace length");
        app->add_option("--lambda", lambda, "information value per ms of inference (nats/ms)");
        app->add_option("--cost-yolo-ms", cost_yolo, "detection inference time and cost in ms");
        app->add_option("--cost-pose-ms", cost_pose, "pose inference time and cost in ms");
    }

    RunConfig resolve() const
    {
        RunConfig c = config.empty() ? default_run_config() : load_config(config);
        if (!trace.empty()) c.trace_path = trace;
        if (!policy.empty()) c.policy = parse_policy(policy);
        if (seed) c.pipeline.seed = *seed;
        if (!out.empty()) c.out_dir = out;
        if (!archetype.empty()) c.generator.archetype = parse_archetype(archetype);
        if (frames) c.generator.frames = *frames;
        if (lambda) c.pipeline.reward.lambda_info_per_ms = *lambda;
        auto set_cost = [&](const ModuleId& id, double ms) {
            c.pipeline.reward.cost_ms[id] = ms;
            for (auto& m : c.pipeline.engine.modules)
                if (m.id == id) m.inference_ms = ms;
        };
        if (cost_yolo) set_cost(ModuleId::detection(), *cost_yolo);
        if (cost_pose) set_cost(ModuleId::pose(), *cost_pose);
        c.finalize();
        return c;
    }
};

Trace load_trace(const RunConfig& c)
{
    if (!c.trace_path.empty()) return read_trace(fs::path(c.trace_path));
    return generate_trace(c.generator);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<MetricsReport> run_policies(const RunConfig& c, const std::vector<PolicyKind>& policies)
{
    const Trace trace = load_trace(c);
    const auto gt = ground_truth(trace, c.pipeline, c.metrics);
    fs::create_directories(c.out_dir);
    write_text(fs::path(c.out_dir) / "keyframes.json", keyframes_json(gt) + "\n");
    write_text(fs::path(c.out_dir) / "config.json", dump_config(c));
    std::vector<MetricsReport> reports;
    for (auto p : policies) {
        const auto log = run_pipeline(trace, p, c.pipeline, gt.required);
        write_runlog(fs::path(c.out_dir) / ("runlog_" + std::string(to_string(p)) + ".jsonl"), log);
        reports.push_back(make_report(log, gt, c.metrics));
        write_text(fs::path(c.out_dir) / ("report_" + std::string(to_string(p)) + ".json"),
                   report_json(reports.back()) + "\n");
    }
    return reports;
}

int guarded(const std::function<void()>& body)
{
    try {
        body();
        return ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const TraceError& e) {
        std::cerr << "trace error: " << e.what() << '\n';
        return trace_error;
    } catch (const StructuralError& e) {
        // Bad flag values land here before any run starts.
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime_error;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"perception scheduling simulator"};
    app.require_subcommand(1);

    Overrides gen_o;
    std::string gen_path = "trace.jsonl";
    bool no_raster = false;
    auto* gen = app.add_subcommand("gen-trace", "generate a synthetic trace");
    gen->add_option("--config", gen_o.config, "JSON config file");
    gen->add_option("--archetype", gen_o.archetype, "static | interaction | walking");
    gen->add_option("--frames", gen_o.frames, "trace length in frames");
    gen->add_option("--seed", gen_o.seed, "generator seed");
    gen->add_option("--out", gen_path, "output trace path");
    gen->add_flag("--no-raster", no_raster, "emit precomputed change statistics instead of rasters");

    Overrides run_o;
    auto* run = app.add_subcommand("run", "run one policy and report metrics");
    run_o.attach(run, true);

    Overrides cmp_o;
    std::vector<std::string> cmp_policies;
    std::string csv_path;
    auto* cmp = app.add_subcommand("compare", "run several policies on the same trace");
    cmp_o.attach(cmp, false);
    cmp->add_option("--policies", cmp_policies, "policies to compare (default from config)");
    cmp->add_option("--csv", csv_path, "also write plot-ready columns here");

    std::vector<std::string> runlogs;
    std::string keyframes_path;
    std::string offline_path;
    std::string metrics_config;
    auto* met = app.add_subcommand("metrics", "recompute metrics from run logs");
    met->add_option("runlogs", runlogs, "run log files")->required();
    met->add_option("--keyframes", keyframes_path, "keyframes.json written by run or compare");
    met->add_option("--offline", offline_path, "offline every-frame run log to extract keyframes from");
    met->add_option("--config", metrics_config, "config supplying metric thresholds");

    auto* cfg = app.add_subcommand("config", "print or check configuration");
    Overrides cfg_o;
    cfg_o.attach(cfg, true);
    bool check_only = false;
    cfg->add_flag("--check", check_only, "validate only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    if (*gen)
        return guarded([&] {
            RunConfig c = gen_o.resolve();
            if (no_raster) c.generator.raster = false;
            const auto trace = generate_trace(c.generator);
            write_trace(fs::path(gen_path), trace);
            std::cout << "wrote " << trace.frames.size() << " frames to " << gen_path << '\n';
        });
    if (*run)
        return guarded([&] {
            const RunConfig c = run_o.resolve();
            const auto reports = run_policies(c, {c.policy});
            std::cout << format_table(reports);
        });
    if (*cmp)
        return guarded([&] {
            RunConfig c = cmp_o.resolve();
            if (!cmp_policies.empty()) {
                c.compare.clear();
                for (const auto& p : cmp_policies) c.compare.push_back(parse_policy(p));
                c.finalize();
            }
            const auto reports = run_policies(c, c.compare);
            std::cout << format_table(reports);
            if (!csv_path.empty()) write_text(csv_path, format_csv(reports));
        });
    if (*met)
        return guarded([&] {
            const RunConfig c = metrics_config.empty() ? default_run_config() : load_config(metrics_config);
            GroundTruthKeyframes gt;
            if (!keyframes_path.empty())
                gt = parse_keyframes(read_text(keyframes_path));
            else if (!offline_path.empty())
                gt = extract_keyframes(read_runlog(fs::path(offline_path)), c.metrics);
            else
                throw ConfigError("metrics needs --keyframes or --offline");
            std::vector<MetricsReport> reports;
            for (const auto& path : runlogs) reports.push_back(make_report(read_runlog(fs::path(path)), gt, c.metrics));
            std::cout << format_table(reports);
        });
    if (*cfg)
        return guarded([&] {
            const RunConfig c = cfg_o.resolve();
            if (check_only)
                std::cout << "config ok\n";
            else
                std::cout << dump_config(c);
        });
    return ok;
}
