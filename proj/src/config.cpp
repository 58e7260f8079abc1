#include "psched/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace psched {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects whatever was not read.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    template <class T>
    void get(const std::string& key, T& out)
    {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        used_.insert(key);
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + " has the wrong type");
        }
    }

    template <class E, class Parse>
    void get_enum(const std::string& key, E& out, Parse parse)
    {
        std::string text;
        if (!j_.contains(key)) return;
        get(key, text);
        try {
            out = parse(text);
        } catch (const StructuralError& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    const json* sub(const std::string& key)
    {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    std::string child(const std::string& key) const { return path_ + "." + key; }

    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!used_.contains(key)) throw ConfigError("unknown config key " + path_ + "." + key);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

ChiSquareForm parse_form(std::string_view s)
{
    if (s == "symmetric") return ChiSquareForm::Symmetric;
    if (s == "asymmetric") return ChiSquareForm::Asymmetric;
    throw StructuralError("unknown chi-square form " + std::string(s));
}

std::string_view form_name(ChiSquareForm f) { return f == ChiSquareForm::Symmetric ? "symmetric" : "asymmetric"; }

InfoUnit parse_unit(std::string_view s)
{
    if (s == "nats") return InfoUnit::Nats;
    if (s == "bits") return InfoUnit::Bits;
    throw StructuralError("unknown information unit " + std::string(s));
}

OutputKind parse_output_kind(std::string_view s)
{
    if (s == "detections") return OutputKind::Detections;
    if (s == "keypoints") return OutputKind::Keypoints;
    throw StructuralError("unknown output kind " + std::string(s));
}

std::string_view output_kind_name(OutputKind k) { return k == OutputKind::Detections ? "detections" : "keypoints"; }

void read_change(const json& j, ChangeDetectConfig& c)
{
    Section s(j, "change_detect");
    std::vector<double> coeffs(c.luminance_coeffs.begin(), c.luminance_coeffs.end());
    s.get("luminance_coeffs", coeffs);
    if (coeffs.size() != 3) throw ConfigError("change_detect.luminance_coeffs must hold three values");
    std::copy(coeffs.begin(), coeffs.end(), c.luminance_coeffs.begin());
    s.get("intensity_threshold", c.intensity_threshold);
    s.get("patch_change_threshold", c.patch_change_threshold);
    s.get("histogram_bins", c.histogram_bins);
    s.get("histogram_threshold", c.histogram_threshold);
    s.get_enum("chi_square_form", c.chi_square_form, parse_form);
    s.get("normalize_histograms", c.normalize_histograms);
    s.get("background_tile", c.background_tile);
    s.get("min_tile_coverage", c.min_tile_coverage);
    s.finish();
}

void read_kalman(const json& j, KalmanConfig& k)
{
    Section s(j, "kalman");
    s.get("std_weight_position", k.std_weight_position);
    s.get("std_weight_velocity", k.std_weight_velocity);
    s.get("std_weight_measurement", k.std_weight_measurement);
    s.get("max_frames_since_update", k.max_frames_since_update);
    s.get("joseph_form", k.joseph_form);
    s.get("stationary_noise_scale", k.stationary_noise_scale);
    s.finish();
}

void read_reward(const json& j, RunConfig& cfg)
{
    auto& r = cfg.pipeline.reward;
    Section s(j, "reward");
    s.get("lambda_info_per_ms", r.lambda_info_per_ms);
    if (const auto* costs = s.sub("cost_ms")) {
        if (!costs->is_object()) throw ConfigError("reward.cost_ms must be an object");
        r.cost_ms.clear();
        for (const auto& [name, value] : costs->items()) {
            if (!value.is_number()) throw ConfigError("reward.cost_ms." + name + " must be a number");
            r.cost_ms[ModuleId(name)] = value.get<double>();
        }
    }
    s.get("keypoint_count", r.keypoint_count);
    s.get("sigma_base", cfg.sigma_base);
    s.get("confidence_floor", r.confidence_floor);
    s.get("sigma_floor", r.sigma_floor);
    s.get("prior_confidence", r.prior_confidence);
    s.get_enum("unit", r.unit, parse_unit);
    s.finish();
}

void read_engine(const json& j, EngineConfig& e)
{
    Section s(j, "engine");
    if (const auto* mods = s.sub("modules")) {
        if (!mods->is_array()) throw ConfigError("engine.modules must be an array");
        e.modules.clear();
        for (const auto& m : *mods) {
            Section ms(m, "engine.modules[]");
            std::string id;
            ModuleSpec spec;
            ms.get("id", id);
            if (id.empty()) throw ConfigError("engine.modules[].id is required");
            spec.id = ModuleId(id);
            ms.get("inference_ms", spec.inference_ms);
            ms.get_enum("output", spec.output_kind, parse_output_kind);
            ms.finish();
            e.modules.push_back(spec);
        }
    }
    s.get_enum("busy", e.busy, parse_busy_policy);
    s.get_enum("overhead", e.overhead, parse_overhead_mode);
    s.get("simulated_decision_ms", e.simulated_decision_ms);
    s.get_enum("accounting", e.accounting, parse_accounting);
    s.get("instant_outputs", e.instant_outputs);
    s.get("max_missed_detections", e.max_missed_detections);
    s.get("log_outputs", e.log_outputs);
    s.finish();
}

void read_noise(const json& j, PipelineConfig& p)
{
    Section s(j, "noise");
    if (const auto* d = s.sub("detection")) {
        Section ds(*d, "noise.detection");
        ds.get("center_std_px", p.detection_noise.center_std_px);
        ds.get("size_std_px", p.detection_noise.size_std_px);
        ds.get("miss_rate", p.detection_noise.miss_rate);
        ds.get("false_positive_rate", p.detection_noise.false_positive_rate);
        ds.finish();
    }
    if (const auto* q = s.sub("pose")) {
        Section ps(*q, "noise.pose");
        ps.get("position_std_px", p.pose_noise.position_std_px);
        ps.get("confidence_spread", p.pose_noise.confidence_spread);
        ps.get("beta_a", p.pose_noise.beta_a);
        ps.get("beta_b", p.pose_noise.beta_b);
        ps.get("floor_margin", p.pose_noise.floor_margin);
        ps.get("miss_rate", p.pose_noise.miss_rate);
        ps.finish();
    }
    s.finish();
}

void read_metrics(const json& j, MetricsConfig& m)
{
    Section s(j, "metrics");
    s.get("tau_box_px", m.tau_box_px);
    s.get("tau_kp_px", m.tau_kp_px);
    s.get_enum("latency_denominator", m.latency_denominator, parse_latency_denominator);
    s.finish();
}

void read_generator(const json& j, GeneratorOptions& g)
{
    Section s(j, "generator");
    s.get_enum("archetype", g.archetype, parse_archetype);
    s.get("frames", g.frames);
    s.get("raster", g.raster);
    s.get("frame_width", g.frame_width);
    s.get("frame_height", g.frame_height);
    s.get("raster_scale", g.raster_scale);
    s.get("frame_period_ms", g.frame_period_ms);
    s.finish();
}

json to_json(const RunConfig& c)
{
    const auto& p = c.pipeline;
    json policies = json::array();
    for (auto pk : c.compare) policies.push_back(std::string(to_string(pk)));
    json costs = json::object();
    for (const auto& [id, v] : p.reward.cost_ms) costs[id.name()] = v;
    json modules = json::array();
    for (const auto& m : p.engine.modules)
        modules.push_back(
            {{"id", m.id.name()}, {"inference_ms", m.inference_ms}, {"output", std::string(output_kind_name(m.output_kind))}});
    const auto& cd = p.change;
    return {
        {"trace", c.trace_path},
        {"policy", std::string(to_string(c.policy))},
        {"compare", policies},
        {"seed", p.seed},
        {"out", c.out_dir},
        {"change_detect",
         {{"luminance_coeffs", cd.luminance_coeffs},
          {"intensity_threshold", cd.intensity_threshold},
          {"patch_change_threshold", cd.patch_change_threshold},
          {"histogram_bins", cd.histogram_bins},
          {"histogram_threshold", cd.histogram_threshold},
          {"chi_square_form", std::string(form_name(cd.chi_square_form))},
          {"normalize_histograms", cd.normalize_histograms},
          {"background_tile", cd.background_tile},
          {"min_tile_coverage", cd.min_tile_coverage}}},
        {"kalman",
         {{"std_weight_position", p.kalman.std_weight_position},
          {"std_weight_velocity", p.kalman.std_weight_velocity},
          {"std_weight_measurement", p.kalman.std_weight_measurement},
          {"max_frames_since_update", p.kalman.max_frames_since_update},
          {"joseph_form", p.kalman.joseph_form},
          {"stationary_noise_scale", p.kalman.stationary_noise_scale}}},
        {"reward",
         {{"lambda_info_per_ms", p.reward.lambda_info_per_ms},
          {"cost_ms", costs},
          {"keypoint_count", p.reward.keypoint_count},
          {"sigma_base", c.sigma_base},
          {"confidence_floor", p.reward.confidence_floor},
          {"sigma_floor", p.reward.sigma_floor},
          {"prior_confidence", p.reward.prior_confidence},
          {"unit", p.reward.unit == InfoUnit::Nats ? "nats" : "bits"}}},
        {"engine",
         {{"modules", modules},
          {"busy", std::string(to_string(p.engine.busy))},
          {"overhead", std::string(to_string(p.engine.overhead))},
          {"simulated_decision_ms", p.engine.simulated_decision_ms},
          {"accounting", std::string(to_string(p.engine.accounting))},
          {"instant_outputs", p.engine.instant_outputs},
          {"max_missed_detections", p.engine.max_missed_detections},
          {"log_outputs", p.engine.log_outputs}}},
        {"noise",
         {{"detection",
           {{"center_std_px", p.detection_noise.center_std_px},
            {"size_std_px", p.detection_noise.size_std_px},
            {"miss_rate", p.detection_noise.miss_rate},
            {"false_positive_rate", p.detection_noise.false_positive_rate}}},
          {"pose",
           {{"position_std_px", p.pose_noise.position_std_px},
            {"confidence_spread", p.pose_noise.confidence_spread},
            {"beta_a", p.pose_noise.beta_a},
            {"beta_b", p.pose_noise.beta_b},
            {"floor_margin", p.pose_noise.floor_margin},
            {"miss_rate", p.pose_noise.miss_rate}}}}},
        {"metrics",
         {{"tau_box_px", c.metrics.tau_box_px},
          {"tau_kp_px", c.metrics.tau_kp_px},
          {"latency_denominator", std::string(to_string(c.metrics.latency_denominator))}}},
        {"generator",
         {{"archetype", std::string(to_string(c.generator.archetype))},
          {"frames", c.generator.frames},
          {"raster", c.generator.raster},
          {"frame_width", c.generator.frame_width},
          {"frame_height", c.generator.frame_height},
          {"raster_scale", c.generator.raster_scale},
          {"frame_period_ms", c.generator.frame_period_ms}}},
    };
}

}  // namespace

void RunConfig::finalize()
{
    auto& r = pipeline.reward;
    try {
        if (sigma_base == "coco_wholebody") {
            if (r.keypoint_count != 133) throw ConfigError("the coco_wholebody sigma table needs keypoint_count 133");
            r.sigma_base = coco_wholebody_sigmas();
        } else if (sigma_base == "uniform") {
            r.sigma_base = uniform_sigma_base(r.keypoint_count);
        } else {
            r.sigma_base = load_sigma_base(sigma_base);
        }
        generator.seed = pipeline.seed;
        generator.keypoint_count = r.keypoint_count;
        pipeline.validate();
        metrics.validate();
        if (generator.frames < 2) throw ConfigError("generator.frames must be at least 2");
        if (compare.size() < 2) throw ConfigError("compare needs at least two policies");
    } catch (const ConfigError&) {
        throw;
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
}

bool operator==(const RunConfig& a, const RunConfig& b) { return dump_config(a) == dump_config(b); }

RunConfig default_run_config()
{
    RunConfig c;
    c.pipeline.reward.lambda_info_per_ms = default_lambda_info_per_ms;
    c.finalize();
    return c;
}

RunConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = default_run_config();
    try {
        Section s(j, "config");
        s.get("trace", c.trace_path);
        s.get_enum("policy", c.policy, parse_policy);
        if (const auto* list = s.sub("compare")) {
            if (!list->is_array()) throw ConfigError("config.compare must be an array");
            c.compare.clear();
            for (const auto& p : *list) {
                if (!p.is_string()) throw ConfigError("config.compare entries must be policy names");
                c.compare.push_back(parse_policy(p.get<std::string>()));
            }
        }
        s.get("seed", c.pipeline.seed);
        s.get("out", c.out_dir);
        if (const auto* x = s.sub("change_detect")) read_change(*x, c.pipeline.change);
        if (const auto* x = s.sub("kalman")) read_kalman(*x, c.pipeline.kalman);
        if (const auto* x = s.sub("reward")) read_reward(*x, c);
        if (const auto* x = s.sub("engine")) read_engine(*x, c.pipeline.engine);
        if (const auto* x = s.sub("noise")) read_noise(*x, c.pipeline);
        if (const auto* x = s.sub("metrics")) read_metrics(*x, c.metrics);
        if (const auto* x = s.sub("generator")) read_generator(*x, c.generator);
        s.finish();
    } catch (const ConfigError&) {
        throw;
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
    c.finalize();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace psched
