#include "psched/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "output_json.hpp"

namespace psched {

using nlohmann::json;

namespace {

constexpr std::uint64_t detection_stream = 0xD37EC7ull;
constexpr std::uint64_t pose_stream = 0x9057ull;

double sample_beta(std::mt19937_64& rng, double a, double b)
{
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng), y = gb(rng);
    return x + y > 0.0 ? x / (x + y) : 0.0;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    // splitmix64 over the combined value
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void ModuleSpec::validate() const
{
    if (!(inference_ms > 0.0)) throw StructuralError("module " + id.name() + ": inference_ms must be positive");
}

FrameStamp ready_stamp(const FrameStamp& issued, double inference_ms, double frame_period_ms)
{
    // Tolerance keeps an inference of exactly k frame periods from spilling into frame k + 1.
    const double frames = inference_ms / frame_period_ms;
    const auto offset = static_cast<std::int64_t>(std::ceil(frames - 1e-9));
    return FrameStamp::at(issued.index + std::max<std::int64_t>(offset, 0), frame_period_ms);
}

void DetectionNoise::validate() const
{
    if (center_std_px < 0.0 || size_std_px < 0.0) throw StructuralError("detection noise std must be non-negative");
    if (!(miss_rate >= 0.0 && miss_rate <= 1.0) || !(false_positive_rate >= 0.0 && false_positive_rate <= 1.0))
        throw StructuralError("detection miss/false-positive rates must lie in [0, 1]");
}

void PoseNoise::validate() const
{
    if (position_std_px < 0.0) throw StructuralError("pose position std must be non-negative");
    if (!(confidence_spread >= 0.0 && confidence_spread <= 1.0))
        throw StructuralError("pose confidence_spread must lie in [0, 1]");
    if (!(beta_a > 0.0 && beta_b > 0.0)) throw StructuralError("pose beta parameters must be positive");
    if (!(floor_margin >= 0.0 && floor_margin < 1.0)) throw StructuralError("pose floor_margin must lie in [0, 1)");
    if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) throw StructuralError("pose miss_rate must lie in [0, 1]");
}

DetectionOutput simulate_detection(const TraceFrame& frame, const ModuleSpec& spec, const DetectionNoise& noise,
                                   std::uint64_t seed, const TraceHeader& header)
{
    (void)spec;
    std::mt19937_64 rng(mix_seed(mix_seed(seed, detection_stream), static_cast<std::uint64_t>(frame.stamp.index)));
    std::normal_distribution<double> center(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    DetectionOutput out;
    out.stamp_issued = frame.stamp;
    out.stamp_ready = frame.stamp;
    for (const auto& e : frame.entities) {
        if (e.kind == EntityKind::Background) continue;
        if (noise.miss_rate > 0.0 && unit(rng) < noise.miss_rate) continue;
        DetectedBox b;
        b.entity_id = e.id;
        b.kind = e.kind;
        b.x_c = e.box.center_x();
        b.y_c = e.box.center_y();
        b.w = e.box.w;
        b.h = e.box.h;
        if (noise.center_std_px > 0.0) {
            b.x_c += noise.center_std_px * center(rng);
            b.y_c += noise.center_std_px * center(rng);
        }
        if (noise.size_std_px > 0.0) {
            b.w = std::max(1.0, b.w + noise.size_std_px * center(rng));
            b.h = std::max(1.0, b.h + noise.size_std_px * center(rng));
        }
        out.boxes.push_back(b);
    }
    if (noise.false_positive_rate > 0.0 && unit(rng) < noise.false_positive_rate) {
        DetectedBox fp;
        fp.entity_id = -1 - static_cast<int>(frame.stamp.index % 1000000);
        fp.kind = EntityKind::Object;
        fp.w = 20.0 + 60.0 * unit(rng);
        fp.h = 20.0 + 60.0 * unit(rng);
        fp.x_c = fp.w / 2 + (header.frame_width - fp.w) * unit(rng);
        fp.y_c = fp.h / 2 + (header.frame_height - fp.h) * unit(rng);
        fp.score = 0.3 + 0.3 * unit(rng);
        out.boxes.push_back(fp);
    }
    return out;
}

PoseOutput simulate_pose(const TraceFrame& frame, const ModuleSpec& spec, const PoseNoise& noise, std::uint64_t seed,
                         const TraceHeader& header)
{
    (void)spec;
    (void)header;
    std::mt19937_64 rng(mix_seed(mix_seed(seed, pose_stream), static_cast<std::uint64_t>(frame.stamp.index)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    PoseOutput out;
    out.stamp_issued = frame.stamp;
    out.stamp_ready = frame.stamp;
    const double top = 1.0 - noise.floor_margin;
    for (const auto& e : frame.entities) {
        if (e.kind != EntityKind::Human) continue;
        if (noise.miss_rate > 0.0 && unit(rng) < noise.miss_rate) continue;
        HumanPose pose;
        pose.entity_id = e.id;
        pose.keypoints.reserve(e.keypoints.size());
        for (const auto& k : e.keypoints) {
            PosedKeypoint p{k.x, k.y, top};
            if (noise.position_std_px > 0.0) {
                p.x += noise.position_std_px * gauss(rng);
                p.y += noise.position_std_px * gauss(rng);
            }
            if (noise.confidence_spread > 0.0)
                p.confidence = top * (1.0 - noise.confidence_spread * sample_beta(rng, noise.beta_a, noise.beta_b));
            p.confidence = std::clamp(p.confidence, 1e-6, 1.0);
            pose.keypoints.push_back(p);
        }
        out.per_human.push_back(std::move(pose));
    }
    return out;
}

// Replay

ReplayLog ReplayLog::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open replay log " + path.string());
    return parse(in);
}

ReplayLog ReplayLog::parse(std::istream& in)
{
    ReplayLog log;
    std::string line;
    double& period = log.frame_period_ms_;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                if (j.at("schema").get<std::string>() != "psched.replay") throw TraceError("not a psched replay log");
                if (j.at("version").get<int>() != 1) throw TraceError("unsupported replay schema version");
                period = j.at("frame_period_ms").get<double>();
                have_header = true;
            } else if (type == "output") {
                if (!have_header) throw TraceError("output record before header");
                auto [module, output] = detail::output_from_json(j, period);
                log.add(module, std::move(output));
            } else {
                throw TraceError("unknown record type " + type);
            }
        } catch (const json::exception& e) {
            throw TraceError("replay line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw TraceError("replay log has no header record");
    return log;
}

void ReplayLog::add(const ModuleId& module, ModuleOutput output)
{
    const auto index = std::visit([](const auto& o) { return o.stamp_issued.index; }, output);
    records_[module].insert_or_assign(index, std::move(output));
}

void ReplayLog::write(std::ostream& out) const
{
    out << json{{"type", "header"}, {"schema", "psched.replay"}, {"version", 1}, {"frame_period_ms", frame_period_ms_}}
               .dump()
        << '\n';
    for (const auto& [module, frames] : records_)
        for (const auto& [index, output] : frames) {
            auto j = detail::output_to_json(module, output);
            j["type"] = "output";
            out << j.dump() << '\n';
        }
}

const ModuleOutput& ReplayLog::output(const ModuleId& module, const FrameStamp& stamp) const
{
    auto mod = records_.find(module);
    if (mod == records_.end()) throw ReplayError("replay log has no records for module " + module.name(), std::nullopt);
    const auto& frames = mod->second;
    if (auto it = frames.find(stamp.index); it != frames.end()) return it->second;

    std::optional<std::int64_t> nearest;
    auto above = frames.lower_bound(stamp.index);
    if (above != frames.end()) nearest = above->first;
    if (above != frames.begin()) {
        const auto below = std::prev(above)->first;
        if (!nearest || stamp.index - below <= *nearest - stamp.index) nearest = below;
    }
    std::string msg = "replay log for " + module.name() + " has no frame " + std::to_string(stamp.index);
    if (nearest) msg += " (nearest recorded frame " + std::to_string(*nearest) + ")";
    throw ReplayError(msg, nearest);
}

ModuleOutput replay_output(const ReplayLog& log, const ModuleId& module, const FrameStamp& stamp)
{
    return log.output(module, stamp);
}

SimulatedDetector::SimulatedDetector(ModuleSpec spec, DetectionNoise noise, std::uint64_t seed, TraceHeader header)
    : spec_(std::move(spec)), noise_(noise), seed_(seed), header_(std::move(header))
{
    spec_.validate();
    noise_.validate();
}

ModuleOutput SimulatedDetector::infer(const TraceFrame& frame)
{
    return simulate_detection(frame, spec_, noise_, seed_, header_);
}

SimulatedPoseEstimator::SimulatedPoseEstimator(ModuleSpec spec, PoseNoise noise, std::uint64_t seed, TraceHeader header)
    : spec_(std::move(spec)), noise_(noise), seed_(seed), header_(std::move(header))
{
    spec_.validate();
    noise_.validate();
}

ModuleOutput SimulatedPoseEstimator::infer(const TraceFrame& frame)
{
    return simulate_pose(frame, spec_, noise_, seed_, header_);
}

ReplayModule::ReplayModule(ModuleSpec spec, std::shared_ptr<const ReplayLog> log)
    : spec_(std::move(spec)), log_(std::move(log))
{
    spec_.validate();
    if (!log_ || !log_->has_module(spec_.id))
        throw ReplayError("replay log has no records for module " + spec_.id.name(), std::nullopt);
}

ModuleOutput ReplayModule::infer(const TraceFrame& frame) { return log_->output(spec_.id, frame.stamp); }

// JSON

namespace detail {

json output_to_json(const ModuleId& module, const ModuleOutput& output)
{
    json j;
    j["module"] = module.name();
    if (const auto* d = std::get_if<DetectionOutput>(&output)) {
        j["kind"] = "detections";
        j["issued"] = d->stamp_issued.index;
        j["ready"] = d->stamp_ready.index;
        json boxes = json::array();
        for (const auto& b : d->boxes)
            boxes.push_back({{"id", b.entity_id},
                             {"kind", std::string(to_string(b.kind))},
                             {"box", json::array({b.x_c, b.y_c, b.w, b.h})},
                             {"score", b.score}});
        j["boxes"] = std::move(boxes);
    } else {
        const auto& p = std::get<PoseOutput>(output);
        j["kind"] = "keypoints";
        j["issued"] = p.stamp_issued.index;
        j["ready"] = p.stamp_ready.index;
        json humans = json::array();
        for (const auto& h : p.per_human) {
            json kps = json::array();
            for (const auto& k : h.keypoints) kps.push_back(json::array({k.x, k.y, k.confidence}));
            humans.push_back({{"id", h.entity_id}, {"keypoints", std::move(kps)}});
        }
        j["humans"] = std::move(humans);
    }
    return j;
}

std::pair<ModuleId, ModuleOutput> output_from_json(const json& j, double frame_period_ms)
{
    ModuleId module(j.at("module").get<std::string>());
    const auto kind = j.at("kind").get<std::string>();
    const auto issued = FrameStamp::at(j.at("issued").get<std::int64_t>(), frame_period_ms);
    const auto ready = FrameStamp::at(j.at("ready").get<std::int64_t>(), frame_period_ms);
    if (kind == "detections") {
        DetectionOutput d{issued, ready, {}};
        for (const auto& b : j.at("boxes")) {
            const auto& box = b.at("box");
            d.boxes.push_back({b.at("id").get<int>(), parse_entity_kind(b.at("kind").get<std::string>()),
                               box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>(),
                               box.at(3).get<double>(), b.value("score", 1.0)});
        }
        return {module, d};
    }
    if (kind == "keypoints") {
        PoseOutput p{issued, ready, {}};
        for (const auto& h : j.at("humans")) {
            HumanPose pose{h.at("id").get<int>(), {}};
            for (const auto& k : h.at("keypoints"))
                pose.keypoints.push_back({k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>()});
            p.per_human.push_back(std::move(pose));
        }
        return {module, p};
    }
    throw TraceError("unknown output kind " + kind);
}

}  // namespace detail

}  // namespace psched
