#include "fieldloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fieldloc/errors.hpp"

namespace fieldloc {

namespace {

constexpr double kPi = std::numbers::pi;

// First nonzero component positive; used only for (near-)exact half-turns.
Eigen::Vector3d canonical_half_turn(Eigen::Vector3d r) {
    const double tol = 1e-9 * r.norm();
    for (int k = 0; k < 3; ++k) {
        if (std::abs(r[k]) > tol) {
            if (r[k] < 0.0) r = -r;
            break;
        }
    }
    return r;
}

}  // namespace

Vector6d Pose6D::vec() const {
    Vector6d v;
    v << t, r;
    return v;
}

Pose6D Pose6D::from_vec(const Vector6d& v) { return {v.head<3>(), v.tail<3>()}; }

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d S;
    S << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return S;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& r) {
    const double theta2 = r.squaredNorm();
    const Eigen::Matrix3d K = skew(r);
    if (theta2 < 1e-16) {
        return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
    }
    const double theta = std::sqrt(theta2);
    return Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * K +
           ((1.0 - std::cos(theta)) / theta2) * K * K;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Eigen::Vector3d v = q.vec();
    const double n = v.norm();
    const double w = q.w();
    if (n < 1e-8) {
        // theta / sin(theta/2) expanded around zero
        return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
    }
    const double theta = 2.0 * std::atan2(n, w);
    Eigen::Vector3d r = (theta / n) * v;
    if (w < 1e-12) r = canonical_half_turn(r);
    return r;
}

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

Eigen::Vector3d normalize_rotation(const Eigen::Vector3d& r) {
    const double theta = r.norm();
    if (theta < kPi) return r;
    if (theta == kPi) return canonical_half_turn(r);
    const Eigen::Vector3d axis = r / theta;
    const double wrapped = wrap_angle(theta);
    if (std::abs(wrapped) == kPi) return canonical_half_turn(kPi * axis);
    return wrapped * axis;
}

Transform to_transform(const Pose6D& p) {
    Transform X = Transform::Identity();
    X.linear() = so3_exp(p.r);
    X.translation() = p.t;
    return X;
}

Vector6d phi(const Transform& X) {
    Vector6d v;
    v << X.translation(), so3_log(X.linear());
    return v;
}

Transform compose(const Transform& A, const Transform& B) { return A * B; }

Transform invert(const Transform& A) {
    Transform inv = Transform::Identity();
    inv.linear() = A.linear().transpose();
    inv.translation() = -(A.linear().transpose() * A.translation());
    return inv;
}

Transform relative(const Transform& A, const Transform& B) { return invert(A) * B; }

Pose6D interp_pose(const Pose6D& a, const Pose6D& b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidArgument("interp_pose: alpha must lie in [0, 1]");
    }
    if (alpha == 0.0) return a;
    if (alpha == 1.0) return b;
    const Eigen::Matrix3d Ra = so3_exp(a.r);
    const Eigen::Vector3d step = so3_log(Ra.transpose() * so3_exp(b.r));
    Pose6D out;
    out.t = (1.0 - alpha) * a.t + alpha * b.t;
    out.r = so3_log(Ra * so3_exp(alpha * step));
    return out;
}

Eigen::Vector3d rot_diff(const Eigen::Vector3d& r_a, const Eigen::Vector3d& r_b) {
    return so3_log(so3_exp(r_a).transpose() * so3_exp(r_b));
}

Eigen::Vector3d to_rpy(const Eigen::Matrix3d& R) {
    const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    const double roll = std::atan2(R(2, 1), R(2, 2));
    const double yaw = std::atan2(R(1, 0), R(0, 0));
    return {roll, pitch, yaw};
}

Eigen::Matrix3d from_rpy(double roll, double pitch, double yaw) {
    return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Pose6D box_plus(const Pose6D& p, const Vector6d& delta) {
    Pose6D out;
    out.t = p.t + delta.head<3>();
    out.r = so3_log(so3_exp(p.r) * so3_exp(delta.tail<3>()));
    return out;
}

}  // namespace fieldloc
