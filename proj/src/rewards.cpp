#include "psched/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace psched {

namespace {

const double ln_2pi_e = std::log(2.0 * std::numbers::pi * std::numbers::e);

double to_unit(double nats, const RewardConfig& cfg)
{
    return cfg.unit == InfoUnit::Bits ? nats / std::numbers::ln2 : nats;
}

RewardBreakdown make_reward(const ModuleId& id, double gain_nats, bool forced, const RewardConfig& cfg)
{
    RewardBreakdown r;
    r.module = id;
    r.info_gain_nats = to_unit(gain_nats, cfg);
    r.cost_penalty_nats = cfg.lambda_info_per_ms * cfg.cost(id);
    r.net = r.info_gain_nats - r.cost_penalty_nats;
    r.forced = forced;
    return r;
}

}  // namespace

double RewardConfig::cost(const ModuleId& id) const
{
    auto it = cost_ms.find(id);
    if (it == cost_ms.end()) throw StructuralError("no cost configured for module " + id.name());
    return it->second;
}

void RewardConfig::validate() const
{
    if (!(lambda_info_per_ms >= 0.0) || !std::isfinite(lambda_info_per_ms))
        throw StructuralError("lambda_info_per_ms must be a finite non-negative number");
    for (const auto& [id, c] : cost_ms)
        if (!(c > 0.0)) throw StructuralError("cost for module " + id.name() + " must be positive");
    if (keypoint_count <= 0) throw StructuralError("keypoint_count must be positive");
    if (static_cast<int>(sigma_base.size()) != keypoint_count)
        throw StructuralError("sigma_base must hold keypoint_count entries");
    for (double s : sigma_base)
        if (!(s > 0.0)) throw StructuralError("sigma_base entries must be positive");
    if (!(confidence_floor > 0.0 && confidence_floor < 1.0))
        throw StructuralError("confidence_floor must lie in (0, 1)");
    if (!(sigma_floor > 0.0)) throw StructuralError("sigma_floor must be positive");
    if (!(prior_confidence > 0.0 && prior_confidence <= 1.0))
        throw StructuralError("prior_confidence must lie in (0, 1]");
}

std::vector<double> uniform_sigma_base(int keypoint_count, double relative_sigma)
{
    return std::vector<double>(static_cast<std::size_t>(keypoint_count), relative_sigma);
}

std::vector<double> coco_wholebody_sigmas()
{
    return {
        0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087,
        0.089, 0.089, 0.068, 0.066, 0.066, 0.092, 0.094, 0.094, 0.042, 0.043, 0.044, 0.043, 0.04, 0.035, 0.031,
        0.025, 0.02, 0.023, 0.029, 0.032, 0.037, 0.038, 0.043, 0.041, 0.045, 0.013, 0.012, 0.011, 0.011, 0.012,
        0.012, 0.011, 0.011, 0.013, 0.015, 0.009, 0.007, 0.007, 0.007, 0.012, 0.009, 0.008, 0.016, 0.01, 0.017,
        0.011, 0.009, 0.011, 0.009, 0.007, 0.013, 0.008, 0.011, 0.012, 0.01, 0.034, 0.008, 0.008, 0.009, 0.008,
        0.008, 0.007, 0.01, 0.008, 0.009, 0.009, 0.009, 0.007, 0.007, 0.008, 0.011, 0.008, 0.008, 0.008, 0.01,
        0.008, 0.029, 0.022, 0.035, 0.037, 0.047, 0.026, 0.025, 0.024, 0.035, 0.018, 0.024, 0.022, 0.026, 0.017,
        0.021, 0.021, 0.032, 0.02, 0.019, 0.022, 0.031, 0.029, 0.022, 0.035, 0.037, 0.047, 0.026, 0.025, 0.024,
        0.035, 0.018, 0.024, 0.022, 0.026, 0.017, 0.021, 0.021, 0.032, 0.02, 0.019, 0.022, 0.031
    };
}

std::vector<double> load_sigma_base(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open sigma table " + path.string());
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double v;
        while (fields >> v) out.push_back(v);
        if (!fields.eof()) throw StructuralError("malformed value in sigma table " + path.string());
    }
    return out;
}

double detection_info_gain(std::span<const RelevantTrack> tracks, const RewardConfig& cfg, const KalmanConfig& kalman)
{
    (void)cfg;
    double gain = 0.0;
    for (const auto& t : tracks) {
        if (t.relevance == 0.0) continue;
        const double prior = log_det_spd(measurement_covariance(*t.track));
        const double noise = log_det_spd(measurement_noise(*t.track, kalman));
        gain += 0.5 * t.relevance * (prior - noise);
    }
    return gain;
}

RewardBreakdown detection_reward(double gain, bool forced, const RewardConfig& cfg)
{
    return make_reward(ModuleId::detection(), gain, forced, cfg);
}

double box_uniform_entropy(double w, double h)
{
    if (!(w > 0.0 && h > 0.0)) throw StructuralError("box_uniform_entropy: dimensions must be positive");
    return std::log(w * h);
}

double pre_execution_entropy(std::span<const HumanBoxPrior> humans, const RewardConfig& cfg)
{
    double acc = 0.0;
    for (const auto& s : humans) {
        const double a = s.w + s.sigma_w, b = s.h + s.sigma_h;
        if (!(a > 0.0 && b > 0.0)) throw StructuralError("pre_execution_entropy: non-positive inflated box");
        acc += s.relevance * std::log(a * b);
    }
    return cfg.keypoint_count * acc;
}

double extrapolate_confidence(double s_last, double s_prev, long k_last, long k_prev, long k, const RewardConfig& cfg)
{
    if (k_last == k_prev) throw StructuralError("extrapolate_confidence: k_last equals k_prev");
    const double slope = (s_last - s_prev) / static_cast<double>(k_last - k_prev);
    return std::clamp(s_last + slope * static_cast<double>(k - k_last), cfg.confidence_floor, 1.0);
}

double keypoint_sigma(double conf, double base, const RewardConfig& cfg)
{
    return std::max(-base * std::log(conf), cfg.sigma_floor);
}

double keypoint_entropy(double sigma) { return ln_2pi_e + 2.0 * std::log(sigma); }

double post_execution_entropy(std::span<const HumanKeypointEstimate> humans, const RewardConfig& cfg)
{
    const auto d = static_cast<std::size_t>(cfg.keypoint_count);
    double acc = 0.0;
    for (const auto& s : humans) {
        if (s.confidences.size() != d || s.sigma_base.size() != d)
            throw StructuralError("post_execution_entropy: keypoint list length differs from keypoint_count");
        if (s.relevance == 0.0) continue;
        double log_sigma = 0.0;
        for (std::size_t i = 0; i < d; ++i) log_sigma += 2.0 * std::log(keypoint_sigma(s.confidences[i], s.sigma_base[i], cfg));
        acc += s.relevance * (static_cast<double>(d) * ln_2pi_e + log_sigma);
    }
    return acc;
}

RewardBreakdown pose_reward(double pre, double post, bool forced, const RewardConfig& cfg)
{
    return make_reward(ModuleId::pose(), pre - post, forced, cfg);
}

std::vector<double> scaled_sigma_base(const RewardConfig& cfg, double w, double h)
{
    const double scale = std::sqrt(std::max(w, 0.0) * std::max(h, 0.0));
    std::vector<double> out(cfg.sigma_base.size());
    std::transform(cfg.sigma_base.begin(), cfg.sigma_base.end(), out.begin(), [scale](double s) { return s * scale; });
    return out;
}

void ConfidenceHistory::record(long frame, std::vector<double> confidences)
{
    if (last && last->frame == frame) {
        last->confidences = std::move(confidences);
        return;
    }
    prev = std::move(last);
    last = Sample{frame, std::move(confidences)};
}

std::vector<double> ConfidenceHistory::estimate(long k, const RewardConfig& cfg) const
{
    const auto d = static_cast<std::size_t>(cfg.keypoint_count);
    if (!last) return std::vector<double>(d, cfg.prior_confidence);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double s_last = last->confidences.at(i);
        out[i] = prev ? extrapolate_confidence(s_last, prev->confidences.at(i), last->frame, prev->frame, k, cfg)
                      : std::clamp(s_last, cfg.confidence_floor, 1.0);
    }
    return out;
}

}  // namespace psched
