#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fieldloc {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid-body transform; the rotation block is kept orthonormal by construction.
using Transform = Eigen::Isometry3d;

/// Node state: translation in meters plus axis-angle rotation in radians.
struct Pose6D {
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::Vector3d r = Eigen::Vector3d::Zero();

    Pose6D() = default;
    Pose6D(const Eigen::Vector3d& translation, const Eigen::Vector3d& rotation)
        : t(translation), r(rotation) {}

    Vector6d vec() const;
    static Pose6D from_vec(const Vector6d& v);

    bool operator==(const Pose6D& o) const { return t == o.t && r == o.r; }
};

/// Rodrigues exponential of an axis-angle vector.
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& r);

/// Minimal axis-angle of a rotation matrix: norm <= pi, and at exactly pi the
/// first nonzero component is positive.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

/// Skew-symmetric cross-product matrix.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Wraps an axis-angle vector onto its canonical representative.
Eigen::Vector3d normalize_rotation(const Eigen::Vector3d& r);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Transform to_transform(const Pose6D& p);

/// Translation followed by the minimal axis-angle of the rotation block.
Vector6d phi(const Transform& X);

inline Pose6D to_pose(const Transform& X) { return Pose6D::from_vec(phi(X)); }

Transform compose(const Transform& A, const Transform& B);
Transform invert(const Transform& A);

/// invert(A) * B: B expressed in the frame of A.
Transform relative(const Transform& A, const Transform& B);

/// Linear in translation, geodesic in rotation. Throws InvalidArgument for
/// alpha outside [0, 1].
Pose6D interp_pose(const Pose6D& a, const Pose6D& b, double alpha);

/// Rotation carrying r_a onto r_b, expressed in the frame of r_a:
/// log(R(r_a)^T R(r_b)).
Eigen::Vector3d rot_diff(const Eigen::Vector3d& r_a, const Eigen::Vector3d& r_b);

/// Z-Y-X Euler angles (roll, pitch, yaw) with R = Rz(yaw) Ry(pitch) Rx(roll).
Eigen::Vector3d to_rpy(const Eigen::Matrix3d& R);
Eigen::Matrix3d from_rpy(double roll, double pitch, double yaw);

/// Right-composed manifold increment: additive translation, R * exp(dr).
Pose6D box_plus(const Pose6D& p, const Vector6d& delta);

}  // namespace fieldloc
