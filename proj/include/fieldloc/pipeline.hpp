#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldloc/dem.hpp"
#include "fieldloc/factors.hpp"
#include "fieldloc/graph.hpp"
#include "fieldloc/sensor_log.hpp"
#include "fieldloc/solver.hpp"
#include "fieldloc/trajectory.hpp"

namespace fieldloc {

/// Set of enabled factor kinds.
class CueMask {
public:
    CueMask() = default;
    static CueMask all();
    static CueMask none() { return {}; }

    /// Plus-joined kind names ("GPS+WO+VO") or ALL. Throws InvalidArgument.
    static CueMask parse(std::string_view s);

    bool has(FactorKind k) const { return bits_[static_cast<size_t>(k)]; }
    CueMask& set(FactorKind k, bool on = true) {
        bits_[static_cast<size_t>(k)] = on;
        return *this;
    }
    CueMask with(FactorKind k) const { return CueMask(*this).set(k); }
    CueMask without(FactorKind k) const { return CueMask(*this).set(k, false); }

    /// Names in canonical order, or "ALL" when every kind is on.
    std::string str() const;

    bool operator==(const CueMask&) const = default;

private:
    std::array<bool, 8> bits_{};
};

/// Semicolon-separated list of masks.
std::vector<CueMask> parse_mask_list(std::string_view s);

struct PipelineConfig {
    double step_wo = 0.3;
    bool window = true;
    int w_min = 20;
    WeightParams weights;
    SolverConfig solver;
    CueMask cues = CueMask::all();
    MrfSearch mrf;

    void validate() const;
};

// Synchronization --------------------------------------------------------------

/// WO track integrated up to a stamp.
struct WoSample {
    Pose6D cumulative;  ///< planar pose in the frame of the first reading
    double travel = 0.0;  ///< accumulated planar distance
    double turned = 0.0;  ///< accumulated |dyaw|
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

/// VO or LID track integrated up to a stamp.
struct RelSample {
    Pose6D cumulative;
    Matrix6d cov = Matrix6d::Identity();
    double reading_dt = 0.0;  ///< interval covered by the nearest reading
};

struct GpsSample {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
    GpsMode mode = GpsMode::RTK;
};

struct ImuSample {
    double roll = 0.0;
    double pitch = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

/// Every sensor's value at one stamp; absent when the stamp is outside the
/// stream's span.
struct Readings {
    double stamp = 0.0;
    std::optional<WoSample> wo;
    std::optional<RelSample> vo;
    std::optional<RelSample> lid;
    std::optional<GpsSample> gps;
    std::optional<ImuSample> imu;
    std::optional<int> row;
};

/// Precomputes the integrated relative tracks of a log so repeated queries
/// are cheap. Keeps a reference to the log.
class Synchronizer {
public:
    explicit Synchronizer(const SensorLog& log);
    Readings at(double stamp) const;

private:
    const SensorLog& log_;
    std::vector<Pose6D> wo_cum_;
    std::vector<double> wo_travel_;
    std::vector<double> wo_turned_;
    std::vector<Pose6D> vo_cum_;
    std::vector<Pose6D> lid_cum_;
};

Readings synchronize(const SensorLog& log, double stamp);

/// Stamps of the WO readings at which cumulative planar travel since the
/// previous node reaches step_wo; the first WO reading always starts a node.
std::vector<double> trigger_nodes(const SensorLog& log, const PipelineConfig& cfg);

/// Relative motion between two synchronized samples.
Pose6D wo_delta(const WoSample& a, const WoSample& b);
Pose6D rel_delta(const RelSample& a, const RelSample& b);

/// Initial state of the next node: prev composed with the planar WO motion
/// (VO motion when WO is absent), with roll and pitch taken from the IMU
/// when it has a reading at b.
Pose6D dead_reckon(const Pose6D& prev, const Readings& a, const Readings& b);

/// Node 0 state: first GPS position, IMU roll/pitch, zero yaw.
Pose6D initial_state(const Readings& r, const SensorLog& log);

/// Adds the factors of node `id` (unary terms plus links to id - 1 and MRF
/// links to existing cross-row neighbours) and returns them. `prev` holds the
/// readings at node id - 1.
std::vector<Factor> assemble_node(PoseGraph& g, int id, const Readings* prev, const Readings& cur,
                                  const PipelineConfig& cfg, const DemGrid* dem);

/// Contiguous id range [k, newest]: the last w_min nodes, widened to the
/// smallest cross-row MRF neighbour of any node in that base range.
std::vector<int> window_extent(const PoseGraph& g, int newest, int w_min = 20);

/// cfg.solver, with roll and pitch locked when no enabled cue observes
/// attitude (none of IMU, VO, LID, AMM).
SolverConfig solver_settings(const PipelineConfig& cfg);

struct StepReport {
    int node = 0;
    int window_begin = 0;
    int window_nodes = 0;
    int window_factors = 0;
    SolveReport solve;
};

struct OnlineResult {
    PoseGraph graph;
    Trajectory trajectory;
    std::vector<StepReport> steps;
};

struct BatchResult {
    PoseGraph graph;
    Trajectory trajectory;
    SolveReport report;
};

/// Sliding-window optimization after every new node. Throws
/// LinearSolveFailure naming the node on solver failure.
OnlineResult run_online(const SensorLog& log, const PipelineConfig& cfg, const DemGrid* dem = nullptr);

/// Full-graph optimization. With `initial` the graph is built around that
/// trajectory; otherwise a dead-reckoned graph without DEM/MRF is solved
/// first and its result seeds the full graph.
BatchResult run_batch(const SensorLog& log, const PipelineConfig& cfg, const DemGrid* dem = nullptr,
                      const Trajectory* initial = nullptr);

Trajectory graph_trajectory(const PoseGraph& g);

}  // namespace fieldloc
