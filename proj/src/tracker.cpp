#include "psched/tracker.hpp"

#include <cmath>

namespace psched {

namespace {

void symmetrize(Matrix8& p) { p = 0.5 * (p + p.transpose()).eval(); }

void require_pd(const Matrix8& p, const char* where)
{
    Eigen::LLT<Matrix8> llt(p);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(where) + ": covariance lost positive definiteness");
}

Vector4 box_scales(const Vector8& mean) { return {mean(2), mean(3), mean(2), mean(3)}; }

}  // namespace

void KalmanConfig::validate() const
{
    if (!(std_weight_position > 0.0 && std_weight_velocity > 0.0 && std_weight_measurement > 0.0))
        throw StructuralError("kalman noise weights must be positive");
    if (max_frames_since_update <= 0) throw StructuralError("max_frames_since_update must be positive");
    if (!(stationary_noise_scale >= 0.0 && stationary_noise_scale <= 1.0))
        throw StructuralError("stationary_noise_scale must lie in [0, 1]");
}

TrackState init_track(const Vector4& measurement, const KalmanConfig& cfg, int entity_id)
{
    if (!(measurement(2) > 0.0 && measurement(3) > 0.0))
        throw StructuralError("init_track: box width and height must be positive");
    TrackState t;
    t.entity_id = entity_id;
    t.mean.head<4>() = measurement;
    t.mean.tail<4>().setZero();
    const Vector4 s = box_scales(t.mean);
    Vector8 std;
    std.head<4>() = 2.0 * cfg.std_weight_position * s;
    std.tail<4>() = 10.0 * cfg.std_weight_velocity * s;
    t.covariance = std.array().square().matrix().asDiagonal();
    t.frames_since_update = 0;
    return t;
}

Matrix8 process_noise(const TrackState& track, const KalmanConfig& cfg)
{
    const Vector4 s = box_scales(track.mean);
    Vector8 std;
    std.head<4>() = cfg.std_weight_position * s;
    std.tail<4>() = cfg.std_weight_velocity * s;
    return std.array().square().matrix().asDiagonal();
}

TrackState predict(const TrackState& track, const KalmanConfig& cfg, double noise_scale)
{
    Matrix8 f = Matrix8::Identity();
    f.topRightCorner<4, 4>() = Matrix4::Identity();

    TrackState out = track;
    out.mean = f * track.mean;
    out.covariance = f * track.covariance * f.transpose() + noise_scale * process_noise(track, cfg);
    symmetrize(out.covariance);
    require_pd(out.covariance, "predict");
    out.frames_since_update = track.frames_since_update + 1;
    return out;
}

TrackState inflate(const TrackState& track, const KalmanConfig& cfg, double scale)
{
    TrackState out = track;
    out.covariance += scale * process_noise(track, cfg);
    symmetrize(out.covariance);
    return out;
}

TrackState update(const TrackState& track, const Vector4& measurement, const KalmanConfig& cfg)
{
    Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
    h.leftCols<4>() = Matrix4::Identity();

    const Matrix4 r = measurement_noise(track, cfg);
    const Matrix4 s = h * track.covariance * h.transpose() + r;
    Eigen::LLT<Matrix4> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("update: singular innovation covariance");

    // K = P H^T S^-1, solved as S K^T = H P.
    const Eigen::Matrix<double, 8, 4> gain = llt.solve(h * track.covariance).transpose();
    const Vector4 innovation = measurement - h * track.mean;

    TrackState out = track;
    out.mean = track.mean + gain * innovation;
    if (cfg.joseph_form) {
        const Matrix8 i_kh = Matrix8::Identity() - gain * h;
        out.covariance = i_kh * track.covariance * i_kh.transpose() + gain * r * gain.transpose();
    } else {
        out.covariance = track.covariance - gain * s * gain.transpose();
    }
    symmetrize(out.covariance);
    require_pd(out.covariance, "update");
    out.frames_since_update = 0;
    return out;
}

Matrix4 measurement_covariance(const TrackState& track) { return track.covariance.topLeftCorner<4, 4>(); }

Matrix4 measurement_noise(const TrackState& track, const KalmanConfig& cfg)
{
    const Vector4 std = cfg.std_weight_measurement * box_scales(track.mean);
    return std.array().square().matrix().asDiagonal();
}

double log_det_spd(const Matrix4& m)
{
    Eigen::LLT<Matrix4> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError("log_det_spd: matrix is not positive definite");
    const Matrix4 l = llt.matrixL();
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) acc += std::log(l(i, i));
    return 2.0 * acc;
}

}  // namespace psched
