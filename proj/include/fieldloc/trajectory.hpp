#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fieldloc/geometry.hpp"

namespace fieldloc {

/// Stamped position plus Z-Y-X Euler attitude.
struct TrajSample {
    double stamp = 0.0;
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::Vector3d rpy = Eigen::Vector3d::Zero();

    bool operator==(const TrajSample&) const = default;
};

using Trajectory = std::vector<TrajSample>;

TrajSample to_sample(double stamp, const Pose6D& p);
Pose6D to_pose(const TrajSample& s);

/// Linear position interpolation; nullopt outside the stamp span.
std::optional<Eigen::Vector3d> position_at(const Trajectory& traj, double stamp);

/// Pose interpolation (geodesic in rotation); nullopt outside the span.
std::optional<Pose6D> pose_at(const Trajectory& traj, double stamp);

/// `EST <stamp> <x y z roll pitch yaw>` lines.
void write_trajectory(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory(std::istream& in);
void write_trajectory_file(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_file(const std::string& path);

}  // namespace fieldloc
