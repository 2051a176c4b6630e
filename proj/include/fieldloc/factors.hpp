#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "fieldloc/dem.hpp"
#include "fieldloc/geometry.hpp"

namespace fieldloc {

/// Constraint kinds. WO, VO, LID, AMM and MRF link two nodes; GPS, IMU and DEM
/// constrain a single node.
enum class FactorKind { WO, VO, LID, AMM, MRF, GPS, IMU, DEM };

inline constexpr std::array<FactorKind, 8> kAllFactorKinds = {
    FactorKind::GPS, FactorKind::WO, FactorKind::VO, FactorKind::IMU,
    FactorKind::AMM, FactorKind::DEM, FactorKind::LID, FactorKind::MRF};

std::string_view to_string(FactorKind k);
std::optional<FactorKind> parse_factor_kind(std::string_view s);

constexpr bool is_binary(FactorKind k) {
    return k == FactorKind::WO || k == FactorKind::VO || k == FactorKind::LID || k == FactorKind::AMM ||
           k == FactorKind::MRF;
}

/// Residual components a kind can observe, in (t_x, t_y, t_z, r_x, r_y, r_z) order.
std::array<bool, 6> active_mask(FactorKind k);

struct Factor {
    FactorKind kind = FactorKind::GPS;
    int node_i = 0;
    std::optional<int> node_j;
    Vector6d z = Vector6d::Zero();
    Matrix6d info = Matrix6d::Zero();

    bool operator==(const Factor&) const = default;
};

/// Tunable weighting. Defaults for the four lambdas/weights are the values
/// used in the field experiments; the VO failure pair is ours.
struct WeightParams {
    double lambda_vo_r = 5.0;
    double lambda_vo_t = 1.0;
    double lambda_mrf = 0.8;
    double w_dem_z = 5.0;
    double vo_fail_threshold = 0.1;
    double vo_fail_scale = 0.01;

    void validate() const;
};

/// Floor for every motion-proportional information scaling.
inline constexpr double kEpsScale = 1e-4;
/// Floor on the planar distance in the MRF weight.
inline constexpr double kMrfMinDistance = 0.05;

/// Expected measurement for a kind given node transforms. Throws
/// InvalidArgument when a binary kind is missing X_j.
Vector6d predict(FactorKind kind, const Transform& X_i, const Transform* X_j = nullptr);

/// Projects a relative motion onto the tilted-plane Ackermann model: the
/// rotation is split as Rx(a) Ry(b) Rz(c), the translation is un-tilted and
/// replaced by a chord of signed length rho at heading c/2.
Vector6d ackermann_project(const Transform& X_rel);

/// e = z (-) z_hat. Translations subtract; rotations use rot_diff (planar and
/// attitude angles wrap). Components outside the kind's mask are zero.
Vector6d error(const Factor& f, const Transform& X_i, const Transform* X_j = nullptr);

/// e^T info e.
double weighted_error(const Factor& f, const Transform& X_i, const Transform* X_j = nullptr);

// Information matrices -------------------------------------------------------

/// Inverse of sigma_wo * max(dist + rot, eps) on (t_x, t_y, r_z).
Matrix6d build_wo_info(const Eigen::Matrix3d& sigma_wo, double dist, double rot);

/// Translation block inverse(lambda_vo_t * sigma_t), rotation block
/// inverse(lambda_vo_r * sigma_r), no cross terms.
Matrix6d build_vo_info(const Eigen::Matrix3d& sigma_t, const Eigen::Matrix3d& sigma_r, const WeightParams& params);

/// I6 / max(dist, eps).
Matrix6d build_amm_info(double dist);

/// lambda_mrf / max(planar distance, 5 cm).
double mrf_weight(const Pose6D& est_i, const Pose6D& est_j, const WeightParams& params);

// Factor builders --------------------------------------------------------------

Factor build_wo_factor(int i, int j, const Eigen::Vector3d& delta_xy_yaw, const Eigen::Matrix3d& sigma_wo,
                       double dist, double rot);
Factor build_vo_factor(int i, int j, const Pose6D& delta, const Matrix6d& cov, const WeightParams& params,
                       double info_scale = 1.0);
Factor build_lid_factor(int i, int j, const Pose6D& delta, const Matrix6d& cov);
Factor build_amm_factor(int i, int j, double dist);
Factor build_mrf_factor(int i, int j, const Pose6D& est_i, const Pose6D& est_j, const WeightParams& params);
std::optional<Factor> build_dem_factor(int i, const Pose6D& est_i, const DemGrid& dem, const WeightParams& params);
Factor build_gps_factor(int i, const Eigen::Vector3d& position, const Eigen::Matrix3d& cov);
Factor build_imu_factor(int i, double roll, double pitch, const Eigen::Matrix2d& cov);

/// 1 when WO and VO agree on planar translation within the threshold
/// (inclusive), vo_fail_scale otherwise.
double vo_failure_scale(const Pose6D& wo_delta, const Pose6D& vo_delta, const WeightParams& params);

}  // namespace fieldloc
