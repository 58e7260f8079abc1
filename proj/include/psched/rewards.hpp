#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "psched/scene.hpp"
#include "psched/tracker.hpp"

namespace psched {

enum class InfoUnit { Nats, Bits };

struct RewardConfig {
    /// Information value of one millisecond of inference, in `unit` per ms. No default is claimed.
    double lambda_info_per_ms = 0.0;
    std::map<ModuleId, double> cost_ms{{ModuleId::detection(), 15.0}, {ModuleId::pose(), 80.0}};
    int keypoint_count = 133;
    /// Per-keypoint relative sigmas; multiplied by sqrt(w * h) of the human box.
    std::vector<double> sigma_base;
    double confidence_floor = 1e-6;
    double sigma_floor = 1e-3;
    /// Confidence assumed for a human the pose module has never seen.
    double prior_confidence = 0.5;
    InfoUnit unit = InfoUnit::Nats;

    double cost(const ModuleId& id) const;
    void validate() const;
};

/// Uniform relative sigma of 0.05 for every keypoint.
std::vector<double> uniform_sigma_base(int keypoint_count, double relative_sigma = 0.05);

/// COCO-WholeBody per-keypoint sigmas (133 entries: body, feet, face, left hand, right hand).
std::vector<double> coco_wholebody_sigmas();

/// Reads whitespace/comma separated reals, `#` starts a comment.
std::vector<double> load_sigma_base(const std::filesystem::path& path);

struct RewardBreakdown {
    ModuleId module;
    double info_gain_nats = 0.0;
    double cost_penalty_nats = 0.0;
    double net = 0.0;
    bool forced = false;
};

struct RelevantTrack {
    const TrackState* track = nullptr;
    double relevance = 0.0;
};

/// Sum over tracks of 0.5 * r * ln(det(H P H^T) / det(R)).
double detection_info_gain(std::span<const RelevantTrack> tracks, const RewardConfig& cfg, const KalmanConfig& kalman);

RewardBreakdown detection_reward(double gain, bool forced, const RewardConfig& cfg);

/// Differential entropy of a point uniform over a w x h box: ln(w h).
double box_uniform_entropy(double w, double h);

struct HumanBoxPrior {
    double w = 0.0;
    double h = 0.0;
    double sigma_w = 0.0;
    double sigma_h = 0.0;
    double relevance = 0.0;
};

/// D * sum_s r^s ln((w + sigma_w)(h + sigma_h)).
double pre_execution_entropy(std::span<const HumanBoxPrior> humans, const RewardConfig& cfg);

/// Linear extrapolation of a keypoint confidence, clamped to [confidence_floor, 1].
double extrapolate_confidence(double s_last, double s_prev, long k_last, long k_prev, long k, const RewardConfig& cfg);

/// max(-base ln(conf), sigma_floor).
double keypoint_sigma(double conf, double base, const RewardConfig& cfg);

/// Entropy of an isotropic 2D Gaussian with standard deviation sigma: ln(2 pi e) + 2 ln sigma.
double keypoint_entropy(double sigma);

struct HumanKeypointEstimate {
    std::vector<double> confidences;  // extrapolated to the current frame
    std::vector<double> sigma_base;   // per-keypoint base sigma in pixels
    double relevance = 0.0;
};

/// sum_s r^s [D ln(2 pi e) + sum_d 2 ln sigma^{d,s}].
double post_execution_entropy(std::span<const HumanKeypointEstimate> humans, const RewardConfig& cfg);

RewardBreakdown pose_reward(double pre, double post, bool forced, const RewardConfig& cfg);

/// Pixel sigma bases for one human box of size w x h.
std::vector<double> scaled_sigma_base(const RewardConfig& cfg, double w, double h);

/// Confidence observations for one human from the two most recent pose executions.
struct ConfidenceHistory {
    struct Sample {
        long frame = 0;
        std::vector<double> confidences;
    };
    std::optional<Sample> last;
    std::optional<Sample> prev;

    void record(long frame, std::vector<double> confidences);
    /// Confidences expected at frame k: prior before any execution, s_last after one, extrapolated after two.
    std::vector<double> estimate(long k, const RewardConfig& cfg) const;
};

}  // namespace psched
