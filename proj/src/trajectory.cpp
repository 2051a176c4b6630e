#include "fieldloc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

TrajSample to_sample(double stamp, const Pose6D& p) { return {stamp, p.t, to_rpy(so3_exp(p.r))}; }

Pose6D to_pose(const TrajSample& s) {
    return {s.t, so3_log(from_rpy(s.rpy[0], s.rpy[1], s.rpy[2]))};
}

namespace {

// Index k with traj[k].stamp <= stamp <= traj[k+1].stamp, plus alpha.
std::optional<std::pair<size_t, double>> bracket(const Trajectory& traj, double stamp) {
    if (traj.empty() || stamp < traj.front().stamp || stamp > traj.back().stamp) return std::nullopt;
    auto it = std::upper_bound(traj.begin(), traj.end(), stamp,
                               [](double s, const TrajSample& x) { return s < x.stamp; });
    size_t hi = static_cast<size_t>(it - traj.begin());
    if (hi == traj.size()) return std::make_pair(traj.size() - 1, 0.0);
    const size_t lo = hi - 1;
    if (traj[lo].stamp == stamp) return std::make_pair(lo, 0.0);
    return std::make_pair(lo, (stamp - traj[lo].stamp) / (traj[hi].stamp - traj[lo].stamp));
}

}  // namespace

std::optional<Eigen::Vector3d> position_at(const Trajectory& traj, double stamp) {
    const auto b = bracket(traj, stamp);
    if (!b) return std::nullopt;
    const auto [k, a] = *b;
    if (a == 0.0) return traj[k].t;
    const Eigen::Vector3d& p = traj[k].t;
    const Eigen::Vector3d& q = traj[k + 1].t;
    return Eigen::Vector3d(std::lerp(p.x(), q.x(), a), std::lerp(p.y(), q.y(), a), std::lerp(p.z(), q.z(), a));
}

std::optional<Pose6D> pose_at(const Trajectory& traj, double stamp) {
    const auto b = bracket(traj, stamp);
    if (!b) return std::nullopt;
    const auto [k, a] = *b;
    if (a == 0.0) return to_pose(traj[k]);
    return interp_pose(to_pose(traj[k]), to_pose(traj[k + 1]), a);
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    for (const auto& s : traj) {
        out << "EST " << text::fmt(s.stamp);
        for (int k = 0; k < 3; ++k) out << ' ' << text::fmt(s.t[k]);
        for (int k = 0; k < 3; ++k) out << ' ' << text::fmt(s.rpy[k]);
        out << '\n';
    }
}

Trajectory read_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = text::split(line);
        if (tok.empty()) continue;
        const std::string where = "trajectory line " + std::to_string(lineno);
        if (tok[0] != "EST" || tok.size() != 8) throw FormatError(where + ": expected EST with 7 values");
        TrajSample s;
        s.stamp = text::parse_double(tok[1], where);
        for (int k = 0; k < 3; ++k) s.t[k] = text::parse_double(tok[2 + k], where);
        for (int k = 0; k < 3; ++k) s.rpy[k] = text::parse_double(tok[5 + k], where);
        if (!traj.empty() && !(s.stamp > traj.back().stamp)) throw FormatError(where + ": stamps must increase");
        traj.push_back(s);
    }
    return traj;
}

void write_trajectory_file(const std::string& path, const Trajectory& traj) {
    auto out = text::open_out(path);
    write_trajectory(out, traj);
}

Trajectory read_trajectory_file(const std::string& path) {
    auto in = text::open_in(path);
    return read_trajectory(in);
}

}  // namespace fieldloc
