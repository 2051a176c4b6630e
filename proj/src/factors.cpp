#include "fieldloc/factors.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "fieldloc/errors.hpp"

namespace fieldloc {

namespace {

template <int N>
Eigen::Matrix<double, N, N> inverse_pd(const Eigen::Matrix<double, N, N>& cov, const char* what) {
    if (!cov.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite covariance");
    const Eigen::Matrix<double, N, N> sym = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(sym);
    if (llt.info() != Eigen::Success) {
        throw InvalidArgument(std::string(what) + ": covariance is not positive definite");
    }
    Eigen::Matrix<double, N, N> inv = llt.solve(Eigen::Matrix<double, N, N>::Identity());
    inv = 0.5 * (inv + inv.transpose());
    if (!inv.allFinite()) throw InvalidArgument(std::string(what) + ": covariance is singular");
    return inv;
}

// Rx(a) * Ry(b) * Rz(c) decomposition.
Eigen::Vector3d xyz_angles(const Eigen::Matrix3d& R) {
    const double b = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
    const double a = std::atan2(-R(1, 2), R(2, 2));
    const double c = std::atan2(-R(0, 1), R(0, 0));
    return {a, b, c};
}

}  // namespace

std::string_view to_string(FactorKind k) {
    switch (k) {
        case FactorKind::WO: return "WO";
        case FactorKind::VO: return "VO";
        case FactorKind::LID: return "LID";
        case FactorKind::AMM: return "AMM";
        case FactorKind::MRF: return "MRF";
        case FactorKind::GPS: return "GPS";
        case FactorKind::IMU: return "IMU";
        case FactorKind::DEM: return "DEM";
    }
    return "?";
}

std::optional<FactorKind> parse_factor_kind(std::string_view s) {
    for (FactorKind k : kAllFactorKinds) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::array<bool, 6> active_mask(FactorKind k) {
    switch (k) {
        case FactorKind::WO: return {true, true, false, false, false, true};
        case FactorKind::VO:
        case FactorKind::LID:
        case FactorKind::AMM: return {true, true, true, true, true, true};
        case FactorKind::MRF:
        case FactorKind::DEM: return {false, false, true, false, false, false};
        case FactorKind::GPS: return {true, true, true, false, false, false};
        case FactorKind::IMU: return {false, false, false, true, true, false};
    }
    return {};
}

void WeightParams::validate() const {
    if (!(lambda_vo_r > 0 && lambda_vo_t > 0 && lambda_mrf > 0 && w_dem_z > 0 && vo_fail_threshold > 0 &&
          vo_fail_scale > 0)) {
        throw InvalidArgument("weight parameters must be positive");
    }
    if (!(vo_fail_scale < 1.0)) throw InvalidArgument("vo_fail_scale must be < 1");
}

Vector6d ackermann_project(const Transform& X_rel) {
    const Eigen::Matrix3d& R = X_rel.linear();
    const Eigen::Vector3d angles = xyz_angles(R);
    const Eigen::Matrix3d tilt = (Eigen::AngleAxisd(angles.x(), Eigen::Vector3d::UnitX()) *
                                  Eigen::AngleAxisd(angles.y(), Eigen::Vector3d::UnitY()))
                                     .toRotationMatrix();
    const Eigen::Vector3d planar = tilt.transpose() * X_rel.translation();
    const double rho = std::copysign(std::hypot(planar.x(), planar.y()), planar.x() < 0.0 ? -1.0 : 1.0);

    const double half = 0.5 * angles.z();
    Transform icr = Transform::Identity();
    icr.linear() = Eigen::AngleAxisd(angles.z(), Eigen::Vector3d::UnitZ()).toRotationMatrix();
    icr.translation() = Eigen::Vector3d(rho * std::cos(half), rho * std::sin(half), 0.0);

    Transform slope = Transform::Identity();
    slope.linear() = tilt;
    return phi(slope * icr);
}

Vector6d predict(FactorKind kind, const Transform& X_i, const Transform* X_j) {
    if (is_binary(kind) && X_j == nullptr) {
        throw InvalidArgument(std::string("predict: ") + std::string(to_string(kind)) + " needs two nodes");
    }
    Vector6d zh = Vector6d::Zero();
    switch (kind) {
        case FactorKind::VO:
        case FactorKind::LID: zh = phi(relative(X_i, *X_j)); break;
        case FactorKind::WO: {
            const Vector6d full = phi(relative(X_i, *X_j));
            zh[0] = full[0];
            zh[1] = full[1];
            zh[5] = full[5];
            break;
        }
        case FactorKind::AMM: zh = ackermann_project(relative(X_i, *X_j)); break;
        case FactorKind::MRF: zh[2] = X_i.translation().z() - X_j->translation().z(); break;
        case FactorKind::DEM: zh[2] = X_i.translation().z(); break;
        case FactorKind::GPS: zh.head<3>() = X_i.translation(); break;
        case FactorKind::IMU: {
            const Eigen::Vector3d rpy = to_rpy(X_i.linear());
            zh[3] = rpy[0];
            zh[4] = rpy[1];
            break;
        }
    }
    return zh;
}

Vector6d error(const Factor& f, const Transform& X_i, const Transform* X_j) {
    if (is_binary(f.kind) && X_j == nullptr) {
        throw InvalidArgument(std::string("error: ") + std::string(to_string(f.kind)) + " needs two nodes");
    }
    Vector6d e = Vector6d::Zero();
    switch (f.kind) {
        case FactorKind::VO:
        case FactorKind::LID: {
            const Vector6d zh = predict(f.kind, X_i, X_j);
            e.head<3>() = f.z.head<3>() - zh.head<3>();
            e.tail<3>() = rot_diff(zh.tail<3>(), f.z.tail<3>());
            break;
        }
        case FactorKind::AMM: {
            // Measurement is the current relative motion itself; the residual
            // is its departure from the Ackermann model.
            const Transform rel = relative(X_i, *X_j);
            const Vector6d z = phi(rel);
            const Vector6d zh = ackermann_project(rel);
            e.head<3>() = z.head<3>() - zh.head<3>();
            e.tail<3>() = rot_diff(zh.tail<3>(), z.tail<3>());
            break;
        }
        case FactorKind::WO: {
            const Vector6d zh = predict(f.kind, X_i, X_j);
            e[0] = f.z[0] - zh[0];
            e[1] = f.z[1] - zh[1];
            e[5] = wrap_angle(f.z[5] - zh[5]);
            break;
        }
        case FactorKind::MRF:
        case FactorKind::DEM: e[2] = f.z[2] - predict(f.kind, X_i, X_j)[2]; break;
        case FactorKind::GPS: e.head<3>() = f.z.head<3>() - X_i.translation(); break;
        case FactorKind::IMU: {
            const Vector6d zh = predict(f.kind, X_i, X_j);
            e[3] = wrap_angle(f.z[3] - zh[3]);
            e[4] = wrap_angle(f.z[4] - zh[4]);
            break;
        }
    }
    return e;
}

double weighted_error(const Factor& f, const Transform& X_i, const Transform* X_j) {
    const Vector6d e = error(f, X_i, X_j);
    return e.dot(f.info * e);
}

Matrix6d build_wo_info(const Eigen::Matrix3d& sigma_wo, double dist, double rot) {
    if (!(dist >= 0.0) || !(rot >= 0.0)) throw InvalidArgument("build_wo_info: negative motion");
    const double scale = std::max(dist + rot, kEpsScale);
    const Eigen::Matrix3d inv = inverse_pd<3>(sigma_wo * scale, "WO");
    constexpr int idx[3] = {0, 1, 5};
    Matrix6d info = Matrix6d::Zero();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) info(idx[a], idx[b]) = inv(a, b);
    }
    return info;
}

Matrix6d build_vo_info(const Eigen::Matrix3d& sigma_t, const Eigen::Matrix3d& sigma_r,
                       const WeightParams& params) {
    Matrix6d info = Matrix6d::Zero();
    info.topLeftCorner<3, 3>() = inverse_pd<3>(params.lambda_vo_t * sigma_t, "VO translation");
    info.bottomRightCorner<3, 3>() = inverse_pd<3>(params.lambda_vo_r * sigma_r, "VO rotation");
    return info;
}

Matrix6d build_amm_info(double dist) {
    if (!(dist >= 0.0)) throw InvalidArgument("build_amm_info: negative distance");
    return Matrix6d::Identity() / std::max(dist, kEpsScale);
}

double mrf_weight(const Pose6D& est_i, const Pose6D& est_j, const WeightParams& params) {
    const double planar = (est_i.t.head<2>() - est_j.t.head<2>()).norm();
    return params.lambda_mrf / std::max(planar, kMrfMinDistance);
}

Factor build_wo_factor(int i, int j, const Eigen::Vector3d& delta_xy_yaw, const Eigen::Matrix3d& sigma_wo,
                       double dist, double rot) {
    Factor f;
    f.kind = FactorKind::WO;
    f.node_i = i;
    f.node_j = j;
    f.z[0] = delta_xy_yaw[0];
    f.z[1] = delta_xy_yaw[1];
    f.z[5] = delta_xy_yaw[2];
    f.info = build_wo_info(sigma_wo, dist, rot);
    return f;
}

Factor build_vo_factor(int i, int j, const Pose6D& delta, const Matrix6d& cov, const WeightParams& params,
                       double info_scale) {
    Factor f;
    f.kind = FactorKind::VO;
    f.node_i = i;
    f.node_j = j;
    f.z = delta.vec();
    f.info = info_scale * build_vo_info(cov.topLeftCorner<3, 3>(), cov.bottomRightCorner<3, 3>(), params);
    return f;
}

Factor build_lid_factor(int i, int j, const Pose6D& delta, const Matrix6d& cov) {
    Factor f;
    f.kind = FactorKind::LID;
    f.node_i = i;
    f.node_j = j;
    f.z = delta.vec();
    f.info = inverse_pd<6>(cov, "LID");
    return f;
}

Factor build_amm_factor(int i, int j, double dist) {
    Factor f;
    f.kind = FactorKind::AMM;
    f.node_i = i;
    f.node_j = j;
    f.info = build_amm_info(dist);
    return f;
}

Factor build_mrf_factor(int i, int j, const Pose6D& est_i, const Pose6D& est_j, const WeightParams& params) {
    if (i == j) throw InvalidArgument("build_mrf_factor: nodes must differ");
    Factor f;
    f.kind = FactorKind::MRF;
    f.node_i = i;
    f.node_j = j;
    f.info(2, 2) = mrf_weight(est_i, est_j, params);
    return f;
}

std::optional<Factor> build_dem_factor(int i, const Pose6D& est_i, const DemGrid& dem, const WeightParams& params) {
    if (!dem.contains(est_i.t.x(), est_i.t.y())) return std::nullopt;
    Factor f;
    f.kind = FactorKind::DEM;
    f.node_i = i;
    f.z[2] = dem.query(est_i.t.x(), est_i.t.y());
    f.info(2, 2) = params.w_dem_z;
    return f;
}

Factor build_gps_factor(int i, const Eigen::Vector3d& position, const Eigen::Matrix3d& cov) {
    Factor f;
    f.kind = FactorKind::GPS;
    f.node_i = i;
    f.z.head<3>() = position;
    f.info.topLeftCorner<3, 3>() = inverse_pd<3>(cov, "GPS");
    return f;
}

Factor build_imu_factor(int i, double roll, double pitch, const Eigen::Matrix2d& cov) {
    Factor f;
    f.kind = FactorKind::IMU;
    f.node_i = i;
    f.z[3] = roll;
    f.z[4] = pitch;
    f.info.block<2, 2>(3, 3) = inverse_pd<2>(cov, "IMU");
    return f;
}

double vo_failure_scale(const Pose6D& wo_delta, const Pose6D& vo_delta, const WeightParams& params) {
    const double gap = (wo_delta.t.head<2>() - vo_delta.t.head<2>()).norm();
    return gap <= params.vo_fail_threshold ? 1.0 : params.vo_fail_scale;
}

}  // namespace fieldloc
