#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fieldloc/pipeline.hpp"
#include "fieldloc/trajectory.hpp"

namespace fieldloc {

struct RunStats {
    double rmse = 0.0;
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double err_x = 0.0;
    double err_y = 0.0;
    double err_z = 0.0;
    int n = 0;
};

/// Truth positions are interpolated at the estimate stamps; samples outside
/// the truth span are skipped. RMSE, max and mean are over 3D error norms,
/// err_* are per-axis mean absolute errors. Throws InvalidArgument when no
/// estimate overlaps the truth.
RunStats compute_stats(const Trajectory& estimate, const Trajectory& truth);

struct AblationRow {
    std::string cues;
    std::string mode;  ///< "batch" or "online"
    RunStats stats;
};

/// One batch row per mask, followed by its online row when requested.
std::vector<AblationRow> ablation_table(const SensorLog& log, const DemGrid* dem, const Trajectory& truth,
                                        const std::vector<CueMask>& masks, const PipelineConfig& cfg,
                                        bool with_online = false);

/// Raw GPS readings interpolated at the node stamps.
Trajectory gps_trajectory(const SensorLog& log, const PipelineConfig& cfg);

void write_stats_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_stats_csv_file(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace fieldloc
