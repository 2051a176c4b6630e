#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fieldloc/dem.hpp"
#include "fieldloc/geometry.hpp"
#include "fieldloc/sensor_log.hpp"
#include "fieldloc/trajectory.hpp"

namespace fieldloc {

enum class SteeringMode { SAME_HEADING, SERPENTINE };

std::string_view to_string(SteeringMode m);
std::optional<SteeringMode> parse_steering_mode(std::string_view s);

struct FieldConfig {
    int rows = 6;
    double row_length = 30.0;
    double row_spacing = 1.5;
    double amplitude = 0.5;
    double wavelength_1 = 20.0;
    double wavelength_2 = 35.0;
    double slope_x = 0.01;
    double slope_y = 0.02;
    double speed = 0.5;
    SteeringMode mode = SteeringMode::SERPENTINE;
    std::uint64_t seed = 1;
    double dem_spacing = 5.0;

    void validate() const;
};

struct GpsOutage {
    double t_start = 0.0;
    double t_end = 0.0;
    GpsMode mode = GpsMode::PPP;
    bool operator==(const GpsOutage&) const = default;
};

struct NoiseConfig {
    double wo_sigma_t = 0.01;     ///< m per sqrt(m)
    double wo_sigma_yaw = 0.005;  ///< rad per sqrt(m)
    double vo_sigma_xy = 0.01;    ///< m per sqrt(m)
    double vo_sigma_z = 0.03;
    double vo_sigma_r = 0.002;  ///< rad per sqrt(m)
    double vo_fail_rate = 0.002;  ///< episode starts per VO reading
    double vo_fail_magnitude = 20.0;
    double vo_fail_duration = 2.0;  ///< seconds
    double lid_sigma_t = 0.01;  ///< per reading
    double lid_sigma_r = 0.002;
    double imu_sigma = 0.01;
    double rtk_sigma_xy = 0.02;
    double rtk_sigma_z = 0.05;
    double ppp_sigma_xy = 0.5;
    double ppp_sigma_z = 1.5;
    GpsMode gps_mode = GpsMode::RTK;
    std::vector<GpsOutage> outages;

    /// Every sigma and the failure rate zero.
    static NoiseConfig zero();
    void validate() const;
};

/// Smallest standard deviation written into a reported covariance.
inline constexpr double kReportedSigmaFloor = 1e-6;

double terrain_height(const FieldConfig& cfg, double x, double y);
Eigen::Vector2d terrain_gradient(const FieldConfig& cfg, double x, double y);

struct GtSample {
    double stamp = 0.0;
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
    int row_hint = -1;
    bool operator==(const GtSample&) const = default;
};

/// Ground truth as poses at 1 s knots joined by straight chords and geodesic
/// rotation, so any stamp on the 10 ms tick grid interpolates exactly.
struct Truth {
    double knot_dt = 1.0;
    std::vector<Pose6D> knots;
    std::vector<int> rows;  ///< row label per 10 ms tick
    std::vector<GtSample> samples;  ///< 20 Hz

    int last_tick() const { return static_cast<int>(rows.size()) - 1; }
    Pose6D pose_at_tick(int tick) const;
};

inline constexpr double kTick = 0.01;
inline double tick_stamp(int tick) { return tick * kTick; }

Truth generate_truth(const FieldConfig& cfg);

/// Elevation grid sampled from terrain_height at cfg.dem_spacing, covering the
/// field plus a margin.
DemGrid export_dem(const FieldConfig& cfg);

struct SimOutput {
    Truth truth;
    SensorLog log;
    DemGrid dem;
    std::vector<bool> vo_failed;  ///< per VO reading
};

SensorLog simulate_sensors(const Truth& truth, const NoiseConfig& noise, std::uint64_t seed,
                           std::vector<bool>* vo_failed = nullptr);

SimOutput simulate(const FieldConfig& field, const NoiseConfig& noise);

Trajectory truth_trajectory(const std::vector<GtSample>& gt);

/// `GT <stamp> <x y z roll pitch yaw> <row_hint>` lines.
void write_ground_truth(std::ostream& out, const std::vector<GtSample>& gt);
std::vector<GtSample> read_ground_truth(std::istream& in);
void write_ground_truth_file(const std::string& path, const std::vector<GtSample>& gt);
std::vector<GtSample> read_ground_truth_file(const std::string& path);

}  // namespace fieldloc
