#include "fieldloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

RunStats compute_stats(const Trajectory& estimate, const Trajectory& truth) {
    RunStats s;
    double sq = 0.0, sum = 0.0;
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    for (const auto& e : estimate) {
        const auto gt = position_at(truth, e.stamp);
        if (!gt) continue;
        const Eigen::Vector3d d = e.t - *gt;
        const double norm = d.norm();
        sq += norm * norm;
        sum += norm;
        s.max_abs = std::max(s.max_abs, norm);
        axis += d.cwiseAbs();
        ++s.n;
    }
    if (s.n == 0) throw InvalidArgument("compute_stats: estimate and truth do not overlap");
    s.rmse = std::sqrt(sq / s.n);
    s.mean_abs = sum / s.n;
    s.err_x = axis.x() / s.n;
    s.err_y = axis.y() / s.n;
    s.err_z = axis.z() / s.n;
    return s;
}

Trajectory gps_trajectory(const SensorLog& log, const PipelineConfig& cfg) {
    const Synchronizer sync(log);
    Trajectory t;
    for (double stamp : trigger_nodes(log, cfg)) {
        const Readings r = sync.at(stamp);
        if (r.gps) t.push_back({stamp, r.gps->position, Eigen::Vector3d::Zero()});
    }
    return t;
}

std::vector<AblationRow> ablation_table(const SensorLog& log, const DemGrid* dem, const Trajectory& truth,
                                        const std::vector<CueMask>& masks, const PipelineConfig& cfg,
                                        bool with_online) {
    std::vector<AblationRow> rows;
    for (const CueMask& m : masks) {
        PipelineConfig c = cfg;
        c.cues = m;
        const auto batch = run_batch(log, c, dem);
        rows.push_back({m.str(), "batch", compute_stats(batch.trajectory, truth)});
        if (with_online) {
            const auto online = run_online(log, c, dem);
            rows.push_back({m.str(), "online", compute_stats(online.trajectory, truth)});
        }
    }
    return rows;
}

void write_stats_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "cues,mode,err_x,err_y,err_z,mean,max,rmse,n\n";
    for (const auto& r : rows) {
        const RunStats& s = r.stats;
        out << r.cues << ',' << r.mode << ',' << text::fmt(s.err_x) << ',' << text::fmt(s.err_y) << ','
            << text::fmt(s.err_z) << ',' << text::fmt(s.mean_abs) << ',' << text::fmt(s.max_abs) << ','
            << text::fmt(s.rmse) << ',' << s.n << '\n';
    }
}

void write_stats_csv_file(const std::string& path, const std::vector<AblationRow>& rows) {
    auto out = text::open_out(path);
    write_stats_csv(out, rows);
}

}  // namespace fieldloc
