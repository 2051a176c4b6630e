#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "fieldloc/geometry.hpp"

namespace testing {

inline constexpr double kPi = 3.14159265358979323846;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Eigen::Vector3d random_vec(Rng& rng, double scale) {
    return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

// Uniform direction, angle in [0, max_angle).
inline Eigen::Vector3d random_rotation(Rng& rng, double max_angle = kPi - 1e-3) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d axis(n(rng), n(rng), n(rng));
    axis.normalize();
    return axis * uniform(rng, 0.0, max_angle);
}

inline fieldloc::Pose6D random_pose(Rng& rng, double t_scale = 10.0, double max_angle = kPi - 1e-3) {
    return {random_vec(rng, t_scale), random_rotation(rng, max_angle)};
}

inline fieldloc::Transform random_transform(Rng& rng) { return fieldloc::to_transform(random_pose(rng)); }

// Rotation vector from the principal matrix logarithm.
inline Eigen::Vector3d logm_rotation(const Eigen::Matrix3d& R) {
    const Eigen::Matrix3d L = R.log();
    return {0.5 * (L(2, 1) - L(1, 2)), 0.5 * (L(0, 2) - L(2, 0)), 0.5 * (L(1, 0) - L(0, 1))};
}

// Rotation vector from the matrix exponential series, independent of Rodrigues.
inline Eigen::Matrix3d expm_rotation(const Eigen::Vector3d& r) {
    Eigen::Matrix3d K;
    K << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
    return K.exp();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("fieldloc_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
