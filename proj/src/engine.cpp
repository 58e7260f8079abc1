#include "psched/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "psched/scheduler.hpp"

namespace psched {

namespace {

constexpr double time_eps = 1e-9;
constexpr std::int64_t noise_history = 64;

int items_of(const ModuleOutput& o)
{
    if (const auto* d = std::get_if<DetectionOutput>(&o)) return static_cast<int>(d->boxes.size());
    return static_cast<int>(std::get<PoseOutput>(o).per_human.size());
}

void set_stamps(ModuleOutput& o, const FrameStamp& issued, const FrameStamp& ready)
{
    std::visit(
        [&](auto& out) {
            out.stamp_issued = issued;
            out.stamp_ready = ready;
        },
        o);
}

// FNV-1a, stable across platforms unlike std::hash.
std::uint64_t name_hash(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Re-labels a reward computed for the built-in module id.
RewardBreakdown for_module(RewardBreakdown r, const ModuleId& id, const RewardConfig& cfg)
{
    if (r.module == id) return r;
    r.module = id;
    r.cost_penalty_nats = cfg.lambda_info_per_ms * cfg.cost(id);
    r.net = r.info_gain_nats - r.cost_penalty_nats;
    return r;
}

}  // namespace

std::string_view to_string(BusyPolicy b) { return b == BusyPolicy::Drop ? "drop" : "queue"; }
std::string_view to_string(OverheadMode m) { return m == OverheadMode::Simulated ? "simulated" : "measured"; }
std::string_view to_string(Accounting a) { return a == Accounting::Overlapped ? "overlapped" : "serial"; }

BusyPolicy parse_busy_policy(std::string_view text)
{
    if (text == "drop") return BusyPolicy::Drop;
    if (text == "queue") return BusyPolicy::Queue;
    throw StructuralError("unknown busy policy " + std::string(text));
}

OverheadMode parse_overhead_mode(std::string_view text)
{
    if (text == "simulated") return OverheadMode::Simulated;
    if (text == "measured") return OverheadMode::Measured;
    throw StructuralError("unknown overhead mode " + std::string(text));
}

Accounting parse_accounting(std::string_view text)
{
    if (text == "overlapped") return Accounting::Overlapped;
    if (text == "serial") return Accounting::Serial;
    throw StructuralError("unknown accounting mode " + std::string(text));
}

const ModuleSpec& EngineConfig::spec(const ModuleId& id) const
{
    for (const auto& m : modules)
        if (m.id == id) return m;
    throw StructuralError("no module " + id.name() + " configured");
}

void EngineConfig::validate() const
{
    if (modules.empty()) throw StructuralError("engine needs at least one module");
    std::set<ModuleId> seen;
    for (const auto& m : modules) {
        m.validate();
        if (!seen.insert(m.id).second) throw StructuralError("duplicate module " + m.id.name());
    }
    if (!(simulated_decision_ms >= 0.0) || !std::isfinite(simulated_decision_ms))
        throw StructuralError("simulated_decision_ms must be a finite non-negative number");
    if (max_missed_detections < 1) throw StructuralError("max_missed_detections must be at least 1");
}

void PipelineConfig::validate() const
{
    engine.validate();
    reward.validate();
    kalman.validate();
    change.validate();
    detection_noise.validate();
    pose_noise.validate();
    for (const auto& m : engine.modules) reward.cost(m.id);
}

std::vector<std::unique_ptr<PerceptionModule>> make_simulated_modules(const PipelineConfig& cfg,
                                                                      const TraceHeader& header)
{
    std::vector<std::unique_ptr<PerceptionModule>> out;
    for (const auto& spec : cfg.engine.modules) {
        const auto stream = mix_seed(cfg.seed, name_hash(spec.id.name()));
        if (spec.output_kind == OutputKind::Detections)
            out.push_back(std::make_unique<SimulatedDetector>(spec, cfg.detection_noise, stream, header));
        else
            out.push_back(std::make_unique<SimulatedPoseEstimator>(spec, cfg.pose_noise, stream, header));
    }
    return out;
}

Engine::Engine(const Trace& trace, PolicyKind policy, PipelineConfig cfg,
               std::vector<std::unique_ptr<PerceptionModule>> modules, KeyframeSets oracle_labels)
    : trace_(&trace), policy_(policy), cfg_(std::move(cfg)), oracle_(std::move(oracle_labels))
{
    if (trace.frames.empty()) throw StructuralError("engine needs a non-empty trace");
    cfg_.validate();
    if (cfg_.reward.keypoint_count != trace.header.keypoint_count)
        throw StructuralError("reward keypoint_count differs from the trace header");
    for (auto& m : modules) {
        if (!m) throw StructuralError("null perception module");
        const auto id = m->spec().id;
        if (!modules_.emplace(id, std::move(m)).second) throw StructuralError("duplicate module " + id.name());
    }
    for (const auto& spec : cfg_.engine.modules) {
        if (!modules_.contains(spec.id)) throw StructuralError("no implementation for module " + spec.id.name());
        busy_until_[spec.id] = -std::numeric_limits<double>::infinity();
    }
    if (modules_.size() != cfg_.engine.modules.size())
        throw StructuralError("module implementations differ from the configured modules");

    log_.policy = policy_;
    log_.seed = cfg_.seed;
    log_.archetype = trace.header.archetype;
    log_.frame_period_ms = trace.header.frame_period_ms;
    for (const auto& spec : cfg_.engine.modules) log_.modules.push_back({spec.id, spec.inference_ms});
}

double Engine::relevance_of(int id, std::int64_t k) const
{
    if (k > 0)
        if (const auto* e = trace_->frames[static_cast<std::size_t>(k - 1)].find(id)) return e->relevance;
    if (const auto* e = trace_->frames[static_cast<std::size_t>(k)].find(id)) return e->relevance;
    if (auto it = last_relevance_.find(id); it != last_relevance_.end()) return it->second;
    return 0.0;
}

void Engine::apply_detection(const InFlight& job, const DetectionOutput& det, std::int64_t now)
{
    const auto& kcfg = cfg_.kalman;
    auto replay = [&](TrackState s, const std::map<std::int64_t, double>* scales) {
        for (std::int64_t j = job.issued.index + 1; j < now; ++j) {
            double scale = 1.0;
            if (scales)
                if (auto it = scales->find(j); it != scales->end()) scale = it->second;
            s = predict(s, kcfg, scale);
        }
        return s;
    };

    std::set<int> seen;
    for (const auto& b : det.boxes) {
        if (b.entity_id < 0) continue;  // unassociated detections
        if (!(b.w > 0.0 && b.h > 0.0)) continue;
        seen.insert(b.entity_id);
        const Vector4 z{b.x_c, b.y_c, b.w, b.h};
        auto it = tracks_.find(b.entity_id);
        auto snap = job.snapshot.find(b.entity_id);
        if (it != tracks_.end() && snap != job.snapshot.end()) {
            it->second.state = replay(update(snap->second, z, kcfg), &it->second.noise_scales);
            it->second.missed = 0;
            it->second.kind = b.kind;
        } else {
            Track t;
            t.state = replay(init_track(z, kcfg, b.entity_id), nullptr);
            t.kind = b.kind;
            t.relevance = relevance_of(b.entity_id, std::min<std::int64_t>(now, trace_->frames.size() - 1));
            tracks_[b.entity_id] = std::move(t);
        }
    }
    for (const auto& [id, snap] : job.snapshot) {
        if (seen.contains(id)) continue;
        auto it = tracks_.find(id);
        if (it == tracks_.end()) continue;
        if (++it->second.missed >= cfg_.engine.max_missed_detections) {
            tracks_.erase(it);
            confidence_.erase(id);
        }
    }
}

void Engine::apply_pose(const PoseOutput& pose)
{
    for (const auto& h : pose.per_human) {
        std::vector<double> conf;
        conf.reserve(h.keypoints.size());
        for (const auto& k : h.keypoints) conf.push_back(k.confidence);
        if (static_cast<int>(conf.size()) != cfg_.reward.keypoint_count)
            throw StructuralError("pose output keypoint count differs from the reward configuration");
        confidence_[h.entity_id].record(static_cast<long>(pose.stamp_issued.index), std::move(conf));
    }
}

void Engine::apply(const InFlight& job, std::int64_t now, FrameLog& out)
{
    if (const auto* d = std::get_if<DetectionOutput>(&job.output))
        apply_detection(job, *d, now);
    else
        apply_pose(std::get<PoseOutput>(job.output));
    AppliedOutput rec{job.module, job.issued.index, job.ready.index, items_of(job.output), std::nullopt};
    if (cfg_.engine.log_outputs) rec.payload = job.output;
    out.applied.push_back(std::move(rec));
}

void Engine::detect_changes(const TraceFrame& frame, FrameLog& out)
{
    const auto& cd = cfg_.change;
    const std::int64_t k = frame.stamp.index;
    const TraceFrame* prev = k > 0 ? &trace_->frames[static_cast<std::size_t>(k - 1)] : nullptr;

    if (prev && prev->raster && frame.raster) {
        PixelMask mask(frame.raster->width, frame.raster->height, true);
        for (auto& [id, t] : tracks_) {
            const auto r = trace_->to_raster(t.state.box());
            t.motion = motion_status(patch_change_ratio(*prev->raster, *frame.raster, r, cd), cd);
            mask.exclude(r);
        }
        out.change.background_cr = background_change_ratio(*prev->raster, *frame.raster, mask, cd);
        out.change.histogram_shift = chi_square_shift(channel_histograms(*prev->raster, mask, cd.histogram_bins),
                                                      channel_histograms(*frame.raster, mask, cd.histogram_bins), cd)
                                         .mean;
    } else if (prev && frame.change) {
        for (auto& [id, t] : tracks_) {
            const auto* e = frame.find(id);
            t.motion = e && e->change_ratio ? motion_status(*e->change_ratio, cd) : MotionStatus::Moving;
        }
        out.change.background_cr = frame.change->background_change_ratio;
        out.change.histogram_shift = frame.change->histogram_shift;
    } else {
        for (auto& [id, t] : tracks_) t.motion = MotionStatus::Moving;
    }
    HistogramShift shift;
    shift.mean = out.change.histogram_shift;
    out.change.composition_change = prev && composition_change_trigger(out.change.background_cr, shift, cd);

    // Moving tracks receive the full process noise for this frame.
    const double s = cfg_.kalman.stationary_noise_scale;
    for (auto& [id, t] : tracks_) {
        if (t.motion == MotionStatus::Moving && s < 1.0) t.state = inflate(t.state, cfg_.kalman, 1.0 - s);
        t.noise_scales[k] = t.motion == MotionStatus::Moving ? 1.0 : s;
        t.noise_scales.erase(t.noise_scales.begin(), t.noise_scales.lower_bound(k - noise_history));
    }
}

std::map<ModuleId, bool> Engine::decide(const TraceFrame& frame, bool human_set_changed, FrameLog& out)
{
    const std::int64_t k = frame.stamp.index;
    const double t = frame.stamp.time_ms;
    std::map<ModuleId, bool> wants;
    switch (policy_) {
    case PolicyKind::Parallel:
        for (const auto& spec : cfg_.engine.modules)
            wants[spec.id] = cfg_.engine.instant_outputs || busy_until_.at(spec.id) <= t + time_eps;
        return wants;
    case PolicyKind::Oracle:
        for (const auto& spec : cfg_.engine.modules) {
            auto it = oracle_.find(spec.id);
            wants[spec.id] = it != oracle_.end() && it->second.contains(k);
        }
        return wants;
    case PolicyKind::Scheduled: break;
    }

    const auto& rcfg = cfg_.reward;
    std::vector<RelevantTrack> relevant;
    std::vector<HumanBoxPrior> priors;
    std::vector<HumanKeypointEstimate> estimates;
    for (const auto& [id, tr] : tracks_) {
        if (!(tr.relevance > 0.0)) continue;
        relevant.push_back({&tr.state, tr.relevance});
        if (tr.kind != EntityKind::Human) continue;
        const auto& m = tr.state.mean;
        const auto& p = tr.state.covariance;
        const double w = std::max(m(2), 1.0);
        const double h = std::max(m(3), 1.0);
        priors.push_back({w, h, std::sqrt(p(2, 2)), std::sqrt(p(3, 3)), tr.relevance});
        HumanKeypointEstimate est;
        auto c = confidence_.find(id);
        est.confidences = c != confidence_.end() ? c->second.estimate(static_cast<long>(k), rcfg)
                                                 : ConfidenceHistory{}.estimate(static_cast<long>(k), rcfg);
        est.sigma_base = scaled_sigma_base(rcfg, w, h);
        est.relevance = tr.relevance;
        estimates.push_back(std::move(est));
    }

    RewardMap rewards;
    for (const auto& spec : cfg_.engine.modules) {
        if (spec.output_kind == OutputKind::Detections) {
            const bool forced = k == 0 || out.change.composition_change;
            rewards[spec.id] =
                for_module(detection_reward(detection_info_gain(relevant, rcfg, cfg_.kalman), forced, rcfg), spec.id, rcfg);
        } else {
            const double pre = pre_execution_entropy(priors, rcfg);
            const double post = post_execution_entropy(estimates, rcfg);
            rewards[spec.id] = for_module(pose_reward(pre, post, human_set_changed, rcfg), spec.id, rcfg);
        }
    }
    std::vector<ModuleId> registered;
    for (const auto& spec : cfg_.engine.modules) registered.push_back(spec.id);
    const auto decision = select(rewards, registered);
    for (const auto& [id, r] : rewards)
        out.rewards.push_back({id, r.info_gain_nats, r.cost_penalty_nats, r.net, r.forced});
    return decision.activations;
}

const FrameLog& Engine::step()
{
    if (done()) throw StructuralError("trace underrun: no frame left to process");
    const std::int64_t k = next_;
    const auto& frame = trace_->frames[static_cast<std::size_t>(k)];
    const double t = frame.stamp.time_ms;
    FrameLog out;
    out.index = k;
    out.time_ms = t;

    // (1) outputs that became ready
    std::stable_sort(pending_.begin(), pending_.end(),
                     [](const InFlight& a, const InFlight& b) { return a.ready.time_ms < b.ready.time_ms; });
    auto split = std::stable_partition(pending_.begin(), pending_.end(),
                                       [k](const InFlight& j) { return j.ready.index <= k; });
    std::vector<InFlight> ready(std::make_move_iterator(pending_.begin()), std::make_move_iterator(split));
    pending_.erase(pending_.begin(), split);
    for (const auto& job : ready) apply(job, k, out);

    // (2) predict, then retire stale or departed tracks
    const auto start = std::chrono::steady_clock::now();
    for (auto it = tracks_.begin(); it != tracks_.end();) {
        auto& tr = it->second;
        tr.state = predict(tr.state, cfg_.kalman, cfg_.kalman.stationary_noise_scale);
        const double cx = tr.state.mean(0);
        const double cy = tr.state.mean(1);
        const bool outside = cx < 0.0 || cy < 0.0 || cx > trace_->header.frame_width || cy > trace_->header.frame_height;
        if (tr.state.frames_since_update > cfg_.kalman.max_frames_since_update || outside) {
            confidence_.erase(it->first);
            it = tracks_.erase(it);
        } else {
            tr.relevance = relevance_of(it->first, k);
            ++it;
        }
    }

    // (3) change detection
    detect_changes(frame, out);

    std::set<int> humans;
    for (const auto& [id, tr] : tracks_)
        if (tr.kind == EntityKind::Human) humans.insert(id);
    const bool human_set_changed = humans != last_humans_;
    last_humans_ = std::move(humans);

    // (4) decisions
    const auto wants = decide(frame, human_set_changed, out);
    const auto stop = std::chrono::steady_clock::now();
    if (policy_ == PolicyKind::Scheduled)
        out.decision_ms = cfg_.engine.overhead == OverheadMode::Simulated
                              ? cfg_.engine.simulated_decision_ms
                              : std::chrono::duration<double, std::milli>(stop - start).count();

    // (5) dispatch to idle modules
    for (const auto& spec : cfg_.engine.modules) {
        const bool want = wants.contains(spec.id) && wants.at(spec.id);
        if (want) out.requested.push_back(spec.id);
        const bool idle = cfg_.engine.instant_outputs || busy_until_.at(spec.id) <= t + time_eps;
        bool dispatch = want && idle;
        if (want && !idle) {
            if (cfg_.engine.busy == BusyPolicy::Drop)
                out.dropped.push_back(spec.id);
            else
                queued_[spec.id] = k;
        }
        if (!want && idle && queued_.contains(spec.id)) dispatch = true;
        if (!dispatch) continue;
        queued_.erase(spec.id);

        const double offset = cfg_.engine.accounting == Accounting::Serial ? out.decision_ms : 0.0;
        InFlight job;
        job.module = spec.id;
        job.issued = frame.stamp;
        job.ready = cfg_.engine.instant_outputs ? frame.stamp
                                                : ready_stamp(frame.stamp, spec.inference_ms + offset, log_.frame_period_ms);
        job.output = modules_.at(spec.id)->infer(frame);
        set_stamps(job.output, job.issued, job.ready);
        if (spec.output_kind == OutputKind::Detections)
            for (const auto& [id, tr] : tracks_) job.snapshot.emplace(id, tr.state);
        busy_until_[spec.id] = cfg_.engine.instant_outputs ? t : t + offset + spec.inference_ms;
        out.honored.push_back(spec.id);
        if (cfg_.engine.instant_outputs)
            apply(job, k + 1, out);
        else
            pending_.push_back(std::move(job));
    }

    // (6) log
    for (const auto& [id, tr] : tracks_)
        out.tracks.push_back({id, tr.kind, tr.relevance, tr.motion, tr.state.box()});
    for (const auto& e : frame.entities) {
        out.relevance[e.id] = e.relevance;
        last_relevance_[e.id] = e.relevance;
    }

    // (7) advance
    ++next_;
    log_.frames.push_back(std::move(out));
    return log_.frames.back();
}

RunLog Engine::run()
{
    while (!done()) step();
    return log_;
}

SceneState Engine::scene() const
{
    SceneState s;
    const auto idx = std::clamp<std::int64_t>(next_ - 1, 0, static_cast<std::int64_t>(trace_->frames.size()) - 1);
    s.stamp = trace_->frames[static_cast<std::size_t>(idx)].stamp;
    s.background_region = {0.0, 0.0, trace_->header.frame_width, trace_->header.frame_height};
    for (const auto& [id, tr] : tracks_) {
        Entity e;
        e.id = id;
        e.kind = tr.kind;
        e.region = tr.state.box();
        e.motion = tr.motion;
        e.relevance = tr.relevance;
        if (auto c = confidence_.find(id); c != confidence_.end() && c->second.last)
            e.keypoint_confidences = c->second.last->confidences;
        s.entities.push_back(std::move(e));
    }
    return s;
}

RunLog run_pipeline(const Trace& trace, PolicyKind policy, const PipelineConfig& cfg, const KeyframeSets& oracle)
{
    Engine engine(trace, policy, cfg, make_simulated_modules(cfg, trace.header), oracle);
    return engine.run();
}

}  // namespace psched
