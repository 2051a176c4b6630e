#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "fieldloc/graph.hpp"

namespace fieldloc {

struct SolverConfig {
    int max_iterations = 50;
    double chi2_rel_tol = 1e-6;
    double step_tol = 1e-8;
    double lm_lambda_init = 1e-4;
    double lm_lambda_factor = 10.0;
    double jacobian_eps = 1e-6;
    /// Closed-form Jacobians for GPS, MRF and DEM instead of differencing.
    bool analytic_fast_paths = true;
    /// Local coordinates held at their current value on every node.
    std::array<bool, 6> locked{};

    void validate() const;
};

struct SolveReport {
    int iterations = 0;
    double initial_chi2 = 0.0;
    double final_chi2 = 0.0;
    bool converged = false;
    double wall_time = 0.0;
    /// chi2 after every accepted step, starting with the initial value.
    std::vector<double> chi2_trace;
};

/// d(error)/d(local increment) for the factor's nodes. The increment is
/// additive in translation and right-composed axis-angle in rotation.
struct JacobianBlocks {
    Matrix6d J_i = Matrix6d::Zero();
    Matrix6d J_j = Matrix6d::Zero();
};

/// Central differences with step eps on each local coordinate.
JacobianBlocks numeric_jacobian(const Factor& f, const Transform& X_i, const Transform* X_j, double eps);

/// Closed-form blocks for the kinds that have them (GPS, MRF, DEM).
std::optional<JacobianBlocks> analytic_jacobian(const Factor& f);

/// Gauss-Newton system over the active nodes, 6 variables per node, ordered
/// as in `active`.
struct LinearSystem {
    Eigen::SparseMatrix<double> H;
    Eigen::VectorXd b;
    std::vector<int> nodes;
    double chi2 = 0.0;
};

/// H = sum J^T info J and b = sum J^T info e over factors touching an active
/// node. Nodes not listed in `active` are held constant.
LinearSystem linearize(const PoseGraph& g, const std::vector<int>& active, const SolverConfig& cfg = {});

/// Levenberg-Marquardt with Marquardt (diag H) damping over `active` minus
/// the nodes below g.frozen_below(). Coordinates no factor observes are held
/// fixed. Throws LinearSolveFailure if the damped system is still singular at
/// lambda >= 1e8.
SolveReport lm_optimize(PoseGraph& g, const std::vector<int>& active, const SolverConfig& cfg = {});

/// Every node id at or above the frozen watermark.
std::vector<int> free_nodes(const PoseGraph& g);

}  // namespace fieldloc
