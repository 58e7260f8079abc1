#pragma once

#include <Eigen/Dense>

#include "psched/scene.hpp"

namespace psched {

using Vector4 = Eigen::Matrix<double, 4, 1>;
using Vector8 = Eigen::Matrix<double, 8, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;

/// Noise weights of the constant-velocity box filter. Standard deviations are the weight times the
/// box width (x, w components) or height (y, h components), as in BoT-SORT's xywh filter.
struct KalmanConfig {
    double std_weight_position = 1.0 / 20.0;
    double std_weight_velocity = 1.0 / 160.0;
    double std_weight_measurement = 1.0 / 20.0;
    int max_frames_since_update = 90;
    bool joseph_form = false;
    /// Fraction of the process noise applied to tracks whose patch was classified stationary.
    double stationary_noise_scale = 0.3;

    void validate() const;
};

/// Box state (x_c, y_c, w, h, vx, vy, vw, vh) in pixels and pixels per frame.
struct TrackState {
    Vector8 mean = Vector8::Zero();
    Matrix8 covariance = Matrix8::Identity();
    int entity_id = 0;
    int frames_since_update = 0;

    PatchRegion box() const { return PatchRegion::from_center(mean(0), mean(1), mean(2), mean(3)); }
};

/// Box measurement (x_c, y_c, w, h).
inline Vector4 measurement_of(const PatchRegion& r) { return {r.center_x(), r.center_y(), r.w, r.h}; }

TrackState init_track(const Vector4& measurement, const KalmanConfig& cfg, int entity_id = 0);

/// Process noise covariance for the box the track currently holds.
Matrix8 process_noise(const TrackState& track, const KalmanConfig& cfg);

/// Constant-velocity prediction one frame ahead with `noise_scale` times the process noise.
TrackState predict(const TrackState& track, const KalmanConfig& cfg, double noise_scale = 1.0);

/// Adds `scale` times the process noise to the covariance without moving the mean.
TrackState inflate(const TrackState& track, const KalmanConfig& cfg, double scale);

TrackState update(const TrackState& track, const Vector4& measurement, const KalmanConfig& cfg);

/// H P H^T with H = [I4 | 0]: the top-left 4x4 block.
Matrix4 measurement_covariance(const TrackState& track);

/// Measurement noise R for the track's current box size.
Matrix4 measurement_noise(const TrackState& track, const KalmanConfig& cfg);

/// log det of a symmetric positive-definite matrix; throws NumericalError otherwise.
double log_det_spd(const Matrix4& m);

}  // namespace psched
