#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldloc/geometry.hpp"

namespace fieldloc {

enum class GpsMode { RTK, PPP };

std::string_view to_string(GpsMode m);
std::optional<GpsMode> parse_gps_mode(std::string_view s);

/// Planar motion since the previous WO reading, expressed in that reading's
/// frame. Covariance is per metre of travel.
struct WoReading {
    double stamp = 0.0;
    Eigen::Vector3d delta = Eigen::Vector3d::Zero();  // dx, dy, dyaw
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
    bool operator==(const WoReading&) const = default;
};

/// 6-DoF motion since the previous reading of the same stream (VO or LID).
struct RelReading {
    double stamp = 0.0;
    Pose6D delta;
    Matrix6d cov = Matrix6d::Identity();
    bool operator==(const RelReading&) const = default;
};

struct GpsReading {
    double stamp = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
    GpsMode mode = GpsMode::RTK;
    bool operator==(const GpsReading&) const = default;
};

struct ImuReading {
    double stamp = 0.0;
    double roll = 0.0;
    double pitch = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
    bool operator==(const ImuReading&) const = default;
};

/// Crop-row label; -1 while on a headland.
struct RowReading {
    double stamp = 0.0;
    int row = -1;
    bool operator==(const RowReading&) const = default;
};

struct SensorLog {
    std::vector<WoReading> wo;
    std::vector<RelReading> vo;
    std::vector<RelReading> lid;
    std::vector<GpsReading> gps;
    std::vector<ImuReading> imu;
    std::vector<RowReading> rows;

    /// Throws InvalidArgument when a stream is not strictly stamp-sorted.
    void validate() const;

    bool operator==(const SensorLog&) const = default;
};

/// Parses the line format. Unknown tags are reported on `warn` and skipped.
/// Throws FormatError with the line number on malformed records.
SensorLog read_sensor_log(std::istream& in, std::ostream* warn = nullptr);
SensorLog read_sensor_log_file(const std::string& path, std::ostream* warn = nullptr);

/// Streams are written in the order WO, VO, LID, GPS, IMU, ROW.
void write_sensor_log(std::ostream& out, const SensorLog& log);
void write_sensor_log_file(const std::string& path, const SensorLog& log);

}  // namespace fieldloc
