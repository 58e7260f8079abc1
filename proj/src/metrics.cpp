#include "psched/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

namespace psched {

namespace {

bool relevant(const FrameLog& f, int id)
{
    auto it = f.relevance.find(id);
    return it != f.relevance.end() && it->second > 0.0;
}

const ModuleOutput* payload_for(const FrameLog& f, const ModuleId& m)
{
    for (const auto& a : f.applied)
        if (a.module == m && a.issued == f.index && a.payload) return &*a.payload;
    return nullptr;
}

// Required frames for one detection module.
std::set<std::int64_t> detection_keyframes(const RunLog& run, const ModuleId& m, double tau)
{
    std::set<std::int64_t> out;
    std::map<int, std::pair<double, double>> ref;
    for (const auto& f : run.frames) {
        const auto* p = payload_for(f, m);
        if (!p) throw RunLogError("offline run lacks a logged " + m.name() + " output at frame " + std::to_string(f.index));
        const auto& det = std::get<DetectionOutput>(*p);
        std::map<int, std::pair<double, double>> now;
        for (const auto& b : det.boxes) now[b.entity_id] = {b.x_c, b.y_c};
        bool required = f.index == 0;
        std::set<int> a, b;
        for (const auto& [id, c] : ref) a.insert(id);
        for (const auto& [id, c] : now) b.insert(id);
        required = required || a != b;
        for (const auto& [id, c] : now) {
            if (required) break;
            if (!relevant(f, id)) continue;
            const auto& r = ref.at(id);
            if (std::hypot(c.first - r.first, c.second - r.second) > tau) required = true;
        }
        if (required) {
            out.insert(f.index);
            ref = std::move(now);
        }
    }
    return out;
}

std::set<std::int64_t> pose_keyframes(const RunLog& run, const ModuleId& m, double tau)
{
    std::set<std::int64_t> out;
    std::map<int, std::vector<PosedKeypoint>> ref;
    for (const auto& f : run.frames) {
        const auto* p = payload_for(f, m);
        if (!p) throw RunLogError("offline run lacks a logged " + m.name() + " output at frame " + std::to_string(f.index));
        const auto& pose = std::get<PoseOutput>(*p);
        std::map<int, std::vector<PosedKeypoint>> now;
        for (const auto& h : pose.per_human) now[h.entity_id] = h.keypoints;
        bool required = f.index == 0;
        std::set<int> a, b;
        for (const auto& [id, k] : ref) a.insert(id);
        for (const auto& [id, k] : now) b.insert(id);
        required = required || a != b;
        for (const auto& [id, kps] : now) {
            if (required) break;
            if (!relevant(f, id)) continue;
            const auto& r = ref.at(id);
            if (r.size() != kps.size()) {
                required = true;
                break;
            }
            for (std::size_t i = 0; i < kps.size() && !required; ++i)
                if (std::hypot(kps[i].x - r[i].x, kps[i].y - r[i].y) > tau) required = true;
        }
        if (required) {
            out.insert(f.index);
            ref = std::move(now);
        }
    }
    return out;
}

std::map<ModuleId, Ratio> count_required(const RunLog& run, const GroundTruthKeyframes& gt, bool honored_only)
{
    std::map<ModuleId, Ratio> out;
    for (const auto& [m, frames] : gt.required) {
        Ratio r;
        for (auto k : frames) {
            if (k < 0 || k >= static_cast<std::int64_t>(run.frames.size()))
                throw RunLogError("required frame " + std::to_string(k) + " lies outside the run");
            const auto& f = run.frames[static_cast<std::size_t>(k)];
            ++r.denominator;
            if (honored_only ? f.was_honored(m) : f.was_requested(m)) ++r.numerator;
        }
        out[m] = r;
    }
    return out;
}

std::string fmt(double v, int prec)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string fmt(const std::optional<double>& v, int prec) { return v ? fmt(*v, prec) : "undef"; }

std::string delta(const std::optional<double>& v, const std::optional<double>& base)
{
    if (!v || !base || *base == 0.0) return "undef";
    const double d = 100.0 * (*v - *base) / *base;
    return (d >= 0.0 ? "+" : "") + fmt(d, 1) + "%";
}

nlohmann::json ratio_json(const Ratio& r)
{
    nlohmann::json j = {{"numerator", r.numerator}, {"denominator", r.denominator}};
    if (auto v = r.value())
        j["value"] = *v;
    else
        j["value"] = nullptr;
    return j;
}

}  // namespace

std::string_view to_string(LatencyDenominator d)
{
    return d == LatencyDenominator::ActivatedFrames ? "activated_frames" : "all_frames";
}

LatencyDenominator parse_latency_denominator(std::string_view text)
{
    if (text == "activated_frames") return LatencyDenominator::ActivatedFrames;
    if (text == "all_frames") return LatencyDenominator::AllFrames;
    throw StructuralError("unknown latency denominator " + std::string(text));
}

void MetricsConfig::validate() const
{
    if (!(tau_box_px >= 0.0) || !std::isfinite(tau_box_px)) throw StructuralError("tau_box_px must be non-negative");
    if (!(tau_kp_px >= 0.0) || !std::isfinite(tau_kp_px)) throw StructuralError("tau_kp_px must be non-negative");
}

GroundTruthKeyframes extract_keyframes(const RunLog& offline, const MetricsConfig& cfg)
{
    cfg.validate();
    GroundTruthKeyframes gt;
    if (offline.frames.empty()) return gt;
    for (const auto& m : offline.modules) {
        // The payload kind decides which rule applies.
        const ModuleOutput* first = payload_for(offline.frames.front(), m.id);
        if (!first) throw RunLogError("offline run lacks logged outputs for " + m.id.name());
        gt.required[m.id] = std::holds_alternative<DetectionOutput>(*first)
                                ? detection_keyframes(offline, m.id, cfg.tau_box_px)
                                : pose_keyframes(offline, m.id, cfg.tau_kp_px);
    }
    return gt;
}

GroundTruthKeyframes ground_truth(const Trace& trace, const PipelineConfig& cfg, const MetricsConfig& metrics)
{
    PipelineConfig offline = cfg;
    offline.engine.instant_outputs = true;
    offline.engine.log_outputs = true;
    return extract_keyframes(run_pipeline(trace, PolicyKind::Parallel, offline), metrics);
}

std::string keyframes_json(const GroundTruthKeyframes& gt)
{
    nlohmann::json req = nlohmann::json::object();
    for (const auto& [m, frames] : gt.required) req[m.name()] = frames;
    return nlohmann::json{{"schema", "psched.keyframes"}, {"version", 1}, {"required", req}}.dump();
}

GroundTruthKeyframes parse_keyframes(const std::string& text)
{
    GroundTruthKeyframes gt;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema").get<std::string>() != "psched.keyframes" || j.at("version").get<int>() != 1)
            throw RunLogError("not a version 1 keyframe document");
        for (const auto& [name, frames] : j.at("required").items())
            gt.required[ModuleId(name)] = frames.get<std::set<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw RunLogError(std::string("malformed keyframe document: ") + e.what());
    }
    return gt;
}

std::optional<double> Ratio::value() const
{
    if (denominator <= 0) return std::nullopt;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::optional<double> LatencyStat::value() const
{
    if (frames <= 0) return std::nullopt;
    return total_ms / static_cast<double>(frames);
}

std::map<ModuleId, Ratio> activation_recall(const RunLog& run, const GroundTruthKeyframes& gt)
{
    return count_required(run, gt, true);
}

std::map<ModuleId, Ratio> keyframe_accuracy(const RunLog& run, const GroundTruthKeyframes& gt)
{
    return count_required(run, gt, false);
}

LatencyStat latency(const RunLog& run, LatencyDenominator denominator)
{
    LatencyStat s;
    for (const auto& f : run.frames) {
        s.total_ms += f.decision_ms;
        for (const auto& m : f.honored) s.total_ms += run.inference_ms(m);
        if (denominator == LatencyDenominator::AllFrames || !f.honored.empty()) ++s.frames;
    }
    return s;
}

MetricsReport make_report(const RunLog& run, const GroundTruthKeyframes& gt, const MetricsConfig& cfg)
{
    MetricsReport r;
    r.policy = run.policy;
    r.frames = static_cast<std::int64_t>(run.frames.size());
    r.latency = latency(run, cfg.latency_denominator);
    r.recall = activation_recall(run, gt);
    r.keyframe_accuracy = keyframe_accuracy(run, gt);
    for (const auto& m : run.modules) {
        r.requested[m.id] = 0;
        r.honored[m.id] = 0;
    }
    for (const auto& f : run.frames) {
        for (const auto& m : f.requested) ++r.requested[m];
        for (const auto& m : f.honored) ++r.honored[m];
    }
    return r;
}

std::string report_json(const MetricsReport& r)
{
    nlohmann::json j;
    j["policy"] = std::string(to_string(r.policy));
    j["frames"] = r.frames;
    j["latency_ms"] = {{"total_ms", r.latency.total_ms}, {"frames", r.latency.frames}};
    if (auto v = r.latency.value())
        j["latency_ms"]["value"] = *v;
    else
        j["latency_ms"]["value"] = nullptr;
    for (const auto& [m, ratio] : r.recall) j["recall"][m.name()] = ratio_json(ratio);
    for (const auto& [m, ratio] : r.keyframe_accuracy) j["keyframe_accuracy"][m.name()] = ratio_json(ratio);
    for (const auto& [m, n] : r.requested) j["requested"][m.name()] = n;
    for (const auto& [m, n] : r.honored) j["honored"][m.name()] = n;
    return j.dump();
}

std::string format_table(const std::vector<MetricsReport>& reports)
{
    std::set<ModuleId> modules;
    for (const auto& r : reports)
        for (const auto& [m, x] : r.recall) modules.insert(m);
    const MetricsReport* base = nullptr;
    for (const auto& r : reports)
        if (r.policy == PolicyKind::Parallel) {
            base = &r;
            break;
        }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"policy", "latency_ms", "d_latency"};
    for (const auto& m : modules) {
        head.push_back(m.name() + "_recall");
        head.push_back("d_" + m.name() + "_recall");
    }
    for (const auto& m : modules) head.push_back(m.name() + "_kf_acc");
    for (const auto& m : modules) head.push_back(m.name() + "_runs");
    rows.push_back(head);

    auto ratio_of = [](const std::map<ModuleId, Ratio>& map, const ModuleId& m) -> std::optional<double> {
        auto it = map.find(m);
        return it == map.end() ? std::nullopt : it->second.value();
    };
    for (const auto& r : reports) {
        std::vector<std::string> row{std::string(to_string(r.policy)), fmt(r.latency.value(), 2),
                                     base ? delta(r.latency.value(), base->latency.value()) : "undef"};
        for (const auto& m : modules) {
            row.push_back(fmt(ratio_of(r.recall, m), 3));
            row.push_back(base ? delta(ratio_of(r.recall, m), ratio_of(base->recall, m)) : "undef");
        }
        for (const auto& m : modules) row.push_back(fmt(ratio_of(r.keyframe_accuracy, m), 3));
        for (const auto& m : modules) {
            auto it = r.honored.find(m);
            row.push_back(std::to_string(it == r.honored.end() ? 0 : it->second));
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i == 0)
                out << row[i] << std::string(width[i] - row[i].size(), ' ');
            else
                out << "  " << std::string(width[i] - row[i].size(), ' ') << row[i];
        }
        out << '\n';
    }
    return out.str();
}

std::string format_csv(const std::vector<MetricsReport>& reports)
{
    std::set<ModuleId> modules;
    for (const auto& r : reports)
        for (const auto& [m, x] : r.recall) modules.insert(m);
    std::ostringstream out;
    out << "policy,latency_ms";
    for (const auto& m : modules) out << ',' << m.name() << "_recall," << m.name() << "_kf_acc";
    out << '\n';
    for (const auto& r : reports) {
        out << to_string(r.policy) << ',' << fmt(r.latency.value(), 6);
        for (const auto& m : modules) {
            auto rec = r.recall.find(m);
            auto acc = r.keyframe_accuracy.find(m);
            out << ',' << (rec == r.recall.end() ? "undef" : fmt(rec->second.value(), 6)) << ','
                << (acc == r.keyframe_accuracy.end() ? "undef" : fmt(acc->second.value(), 6));
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace psched
