#include "fieldloc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "fieldloc/errors.hpp"

namespace fieldloc {

namespace {

constexpr int kDenseBelow = 60;
constexpr double kLambdaFailCeiling = 1e8;
constexpr double kLambdaGiveUp = 1e12;
constexpr double kLambdaFloor = 1e-12;

void perturb(Transform& X, int k, double step) {
    if (k < 3) {
        X.translation()[k] += step;
    } else {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        d[k - 3] = step;
        X.linear() = X.linear() * so3_exp(d);
    }
}

Matrix6d numeric_block(const Factor& f, const Transform& X_i, const Transform* X_j, bool wrt_j, double eps) {
    Matrix6d J;
    for (int k = 0; k < 6; ++k) {
        Transform a_i = X_i, b_i = X_i;
        Transform a_j = X_j ? *X_j : Transform::Identity();
        Transform b_j = a_j;
        if (wrt_j) {
            perturb(a_j, k, eps);
            perturb(b_j, k, -eps);
        } else {
            perturb(a_i, k, eps);
            perturb(b_i, k, -eps);
        }
        const Vector6d ep = error(f, a_i, X_j ? &a_j : nullptr);
        const Vector6d em = error(f, b_i, X_j ? &b_j : nullptr);
        J.col(k) = (ep - em) / (2.0 * eps);
    }
    return J;
}

// Optimization problem restricted to a set of free nodes.
class Problem {
public:
    Problem(const PoseGraph& g, const std::vector<int>& active, const SolverConfig& cfg) : g_(g), cfg_(cfg) {
        var_of_.assign(static_cast<size_t>(g.size()), -1);
        for (int id : active) {
            if (id < 0 || id >= g.size()) throw InvalidArgument("active node " + std::to_string(id) + " missing");
            if (var_of_[static_cast<size_t>(id)] >= 0) continue;
            var_of_[static_cast<size_t>(id)] = static_cast<int>(nodes_.size());
            nodes_.push_back(id);
        }
        for (size_t fi = 0; fi < g.factors().size(); ++fi) {
            const Factor& f = g.factors()[fi];
            const bool ai = var_of_[static_cast<size_t>(f.node_i)] >= 0;
            const bool aj = f.node_j && var_of_[static_cast<size_t>(*f.node_j)] >= 0;
            if (ai || aj) factors_.push_back(fi);
        }
        // Block layout: one slot per diagonal block plus one per unordered
        // pair of distinct active nodes sharing a factor.
        std::map<std::pair<int, int>, int> slot;
        auto slot_of = [&](int a, int b) {
            auto key = std::make_pair(std::max(a, b), std::min(a, b));
            auto it = slot.find(key);
            if (it != slot.end()) return it->second;
            const int s = static_cast<int>(block_rc_.size());
            slot.emplace(key, s);
            block_rc_.push_back(key);
            return s;
        };
        for (int v = 0; v < static_cast<int>(nodes_.size()); ++v) slot_of(v, v);
        for (size_t fi : factors_) {
            const Factor& f = g.factors()[fi];
            const int vi = var_of_[static_cast<size_t>(f.node_i)];
            const int vj = f.node_j ? var_of_[static_cast<size_t>(*f.node_j)] : -1;
            Slots s;
            s.ii = vi >= 0 ? slot_of(vi, vi) : -1;
            s.jj = vj >= 0 ? slot_of(vj, vj) : -1;
            s.ij = (vi >= 0 && vj >= 0) ? slot_of(vi, vj) : -1;
            s.ij_lower_is_j = vj > vi;
            slots_.push_back(s);
        }
        states_.reserve(nodes_.size());
        for (int id : nodes_) states_.push_back(g.node(id).state);
        base_X_.reserve(static_cast<size_t>(g.size()));
        for (const auto& n : g.nodes()) base_X_.push_back(to_transform(n.state));
    }

    int num_vars() const { return 6 * static_cast<int>(nodes_.size()); }
    const std::vector<int>& nodes() const { return nodes_; }
    const std::vector<Pose6D>& states() const { return states_; }

    std::vector<Transform> transforms(const std::vector<Pose6D>& states) const {
        std::vector<Transform> X = base_X_;
        for (size_t v = 0; v < nodes_.size(); ++v) X[static_cast<size_t>(nodes_[v])] = to_transform(states[v]);
        return X;
    }

    double chi2(const std::vector<Pose6D>& states) const {
        const auto X = transforms(states);
        double sum = 0.0;
        for (size_t fi : factors_) {
            const Factor& f = g_.factors()[fi];
            const Transform* xj = f.node_j ? &X[static_cast<size_t>(*f.node_j)] : nullptr;
            sum += weighted_error(f, X[static_cast<size_t>(f.node_i)], xj);
        }
        return sum;
    }

    // Fills per-slot blocks and the gradient vector; returns chi2.
    double build(const std::vector<Pose6D>& states, std::vector<Matrix6d>& blocks, Eigen::VectorXd& b) const {
        const auto X = transforms(states);
        blocks.assign(block_rc_.size(), Matrix6d::Zero());
        b = Eigen::VectorXd::Zero(num_vars());
        double sum = 0.0;
        for (size_t k = 0; k < factors_.size(); ++k) {
            const Factor& f = g_.factors()[factors_[k]];
            const Slots& s = slots_[k];
            const Transform& xi = X[static_cast<size_t>(f.node_i)];
            const Transform* xj = f.node_j ? &X[static_cast<size_t>(*f.node_j)] : nullptr;
            const Vector6d e = error(f, xi, xj);
            sum += e.dot(f.info * e);

            JacobianBlocks J;
            std::optional<JacobianBlocks> analytic;
            if (cfg_.analytic_fast_paths) analytic = analytic_jacobian(f);
            if (analytic) {
                J = *analytic;
            } else {
                if (s.ii >= 0) J.J_i = numeric_block(f, xi, xj, false, cfg_.jacobian_eps);
                if (s.jj >= 0) J.J_j = numeric_block(f, xi, xj, true, cfg_.jacobian_eps);
            }
            const Vector6d We = f.info * e;
            const int vi = var_of_[static_cast<size_t>(f.node_i)];
            const int vj = f.node_j ? var_of_[static_cast<size_t>(*f.node_j)] : -1;
            Eigen::Matrix<double, 6, 6> JiT_W, JjT_W;
            if (s.ii >= 0) {
                JiT_W = J.J_i.transpose() * f.info;
                blocks[static_cast<size_t>(s.ii)] += JiT_W * J.J_i;
                b.segment<6>(6 * vi) += J.J_i.transpose() * We;
            }
            if (s.jj >= 0) {
                JjT_W = J.J_j.transpose() * f.info;
                blocks[static_cast<size_t>(s.jj)] += JjT_W * J.J_j;
                b.segment<6>(6 * vj) += J.J_j.transpose() * We;
            }
            if (s.ij >= 0) {
                // Stored as (row = larger var, col = smaller var).
                if (s.ij_lower_is_j) {
                    blocks[static_cast<size_t>(s.ij)] += JjT_W * J.J_i;
                } else {
                    blocks[static_cast<size_t>(s.ij)] += JiT_W * J.J_j;
                }
            }
        }
        return sum;
    }

    // Lower-triangular (or full) sparse matrix from blocks, optionally adding
    // `extra` to the diagonal.
    Eigen::SparseMatrix<double> assemble(const std::vector<Matrix6d>& blocks, bool full,
                                         const Eigen::VectorXd* extra = nullptr) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(blocks.size() * 36 * (full ? 2 : 1));
        for (size_t s = 0; s < blocks.size(); ++s) {
            const auto [rb, cb] = block_rc_[s];
            const Matrix6d& B = blocks[s];
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c) {
                    const int row = 6 * rb + r;
                    const int col = 6 * cb + c;
                    if (rb == cb) {
                        if (!full && c > r) continue;
                        double v = B(r, c);
                        if (r == c && extra) v += (*extra)[row];
                        trip.emplace_back(row, col, v);
                    } else {
                        trip.emplace_back(row, col, B(r, c));
                        if (full) trip.emplace_back(col, row, B(r, c));
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> M(num_vars(), num_vars());
        M.setFromTriplets(trip.begin(), trip.end());
        return M;
    }

    void decouple(std::vector<Matrix6d>& blocks, const std::array<bool, 6>& locked) const {
        for (Matrix6d& B : blocks) {
            for (int k = 0; k < 6; ++k) {
                if (!locked[static_cast<size_t>(k)]) continue;
                B.row(k).setZero();
                B.col(k).setZero();
            }
        }
    }

private:
    struct Slots {
        int ii = -1, jj = -1, ij = -1;
        bool ij_lower_is_j = false;
    };

    const PoseGraph& g_;
    const SolverConfig& cfg_;
    std::vector<int> var_of_;
    std::vector<int> nodes_;
    std::vector<size_t> factors_;
    std::vector<Slots> slots_;
    std::vector<std::pair<int, int>> block_rc_;
    std::vector<Pose6D> states_;
    std::vector<Transform> base_X_;
};

// Solves the damped system; nullopt when the factorization is not positive
// definite.
class DampedSolver {
public:
    explicit DampedSolver(int n) : n_(n) {}

    std::optional<Eigen::VectorXd> solve(const Problem& p, const std::vector<Matrix6d>& blocks,
                                         const Eigen::VectorXd& diag_add, const Eigen::VectorXd& rhs) {
        if (n_ < kDenseBelow) {
            const Eigen::MatrixXd A = Eigen::MatrixXd(p.assemble(blocks, true, &diag_add));
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) return std::nullopt;
            Eigen::VectorXd x = llt.solve(rhs);
            if (!x.allFinite()) return std::nullopt;
            return x;
        }
        const Eigen::SparseMatrix<double> A = p.assemble(blocks, false, &diag_add);
        if (!analyzed_) {
            ldlt_.analyzePattern(A);
            analyzed_ = true;
        }
        ldlt_.factorize(A);
        if (ldlt_.info() != Eigen::Success) return std::nullopt;
        if (ldlt_.vectorD().minCoeff() <= 0.0) return std::nullopt;
        Eigen::VectorXd x = ldlt_.solve(rhs);
        if (ldlt_.info() != Eigen::Success || !x.allFinite()) return std::nullopt;
        return x;
    }

private:
    int n_;
    bool analyzed_ = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

void SolverConfig::validate() const {
    if (max_iterations <= 0 || !(chi2_rel_tol > 0) || !(step_tol > 0) || !(lm_lambda_init > 0) ||
        !(jacobian_eps > 0)) {
        throw InvalidArgument("solver settings must be positive");
    }
    if (!(lm_lambda_factor > 1.0)) throw InvalidArgument("lm_lambda_factor must exceed 1");
}

JacobianBlocks numeric_jacobian(const Factor& f, const Transform& X_i, const Transform* X_j, double eps) {
    JacobianBlocks J;
    J.J_i = numeric_block(f, X_i, X_j, false, eps);
    if (X_j) J.J_j = numeric_block(f, X_i, X_j, true, eps);
    return J;
}

std::optional<JacobianBlocks> analytic_jacobian(const Factor& f) {
    JacobianBlocks J;
    switch (f.kind) {
        case FactorKind::GPS:
            J.J_i.topLeftCorner<3, 3>() = -Eigen::Matrix3d::Identity();
            return J;
        case FactorKind::DEM:
            J.J_i(2, 2) = -1.0;
            return J;
        case FactorKind::MRF:
            J.J_i(2, 2) = -1.0;
            J.J_j(2, 2) = 1.0;
            return J;
        default:
            return std::nullopt;
    }
}

std::vector<int> free_nodes(const PoseGraph& g) {
    std::vector<int> out;
    for (int id = g.frozen_below(); id < g.size(); ++id) out.push_back(id);
    return out;
}

LinearSystem linearize(const PoseGraph& g, const std::vector<int>& active, const SolverConfig& cfg) {
    Problem p(g, active, cfg);
    std::vector<Matrix6d> blocks;
    LinearSystem sys;
    sys.chi2 = p.build(p.states(), blocks, sys.b);
    sys.H = p.assemble(blocks, true);
    sys.nodes = p.nodes();
    return sys;
}

SolveReport lm_optimize(PoseGraph& g, const std::vector<int>& active, const SolverConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> free;
    for (int id : active) {
        if (id >= g.frozen_below()) free.push_back(id);
    }
    SolveReport report;
    Problem p(g, free, cfg);
    std::vector<Pose6D> states = p.states();
    report.initial_chi2 = p.chi2(states);
    report.final_chi2 = report.initial_chi2;
    report.chi2_trace.push_back(report.initial_chi2);
    if (p.num_vars() == 0 || report.initial_chi2 == 0.0) {
        report.converged = true;
        report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }

    const int n = p.num_vars();
    DampedSolver solver(n);
    std::vector<Matrix6d> blocks;
    Eigen::VectorXd b;
    double chi2 = p.build(states, blocks, b);
    double lambda = cfg.lm_lambda_init;

    // Coordinates with an empty Hessian diagonal carry no information; pin
    // them by giving them a unit diagonal and zero gradient. Locked
    // coordinates are decoupled first.
    Eigen::VectorXd hdiag(n);
    const bool any_locked = std::find(cfg.locked.begin(), cfg.locked.end(), true) != cfg.locked.end();
    auto prepare = [&]() {
        if (any_locked) p.decouple(blocks, cfg.locked);
        for (size_t s = 0; s < p.nodes().size(); ++s) {
            Matrix6d& B = blocks[s];  // first slots are the diagonal blocks
            for (int k = 0; k < 6; ++k) {
                const int row = 6 * static_cast<int>(s) + k;
                if (B(k, k) <= 0.0 || cfg.locked[static_cast<size_t>(k)]) {
                    B(k, k) = 1.0;
                    b[row] = 0.0;
                    hdiag[row] = 0.0;
                } else {
                    hdiag[row] = B(k, k);
                }
            }
        }
    };
    prepare();

    for (int it = 0; it < cfg.max_iterations; ++it) {
        report.iterations = it + 1;
        const Eigen::VectorXd diag_add = lambda * hdiag;
        const auto delta = solver.solve(p, blocks, diag_add, -b);
        if (!delta) {
            if (lambda >= kLambdaFailCeiling) {
                throw LinearSolveFailure("damped normal equations singular at lambda=" + std::to_string(lambda));
            }
            lambda *= cfg.lm_lambda_factor;
            continue;
        }
        if (delta->norm() < cfg.step_tol) {
            report.converged = true;
            break;
        }
        std::vector<Pose6D> candidate(states.size());
        for (size_t v = 0; v < states.size(); ++v) {
            candidate[v] = box_plus(states[v], delta->segment<6>(6 * static_cast<int>(v)));
        }
        const double chi2_new = p.chi2(candidate);
        if (std::isfinite(chi2_new) && chi2_new < chi2) {
            const double rel = (chi2 - chi2_new) / chi2;
            states = std::move(candidate);
            lambda = std::max(lambda / cfg.lm_lambda_factor, kLambdaFloor);
            report.chi2_trace.push_back(chi2_new);
            chi2 = p.build(states, blocks, b);
            prepare();
            if (rel < cfg.chi2_rel_tol || chi2 == 0.0) {
                report.converged = true;
                break;
            }
        } else {
            lambda *= cfg.lm_lambda_factor;
            if (lambda > kLambdaGiveUp) {
                // No descent direction left at any damping: local minimum.
                report.converged = true;
                break;
            }
        }
    }

    for (size_t v = 0; v < states.size(); ++v) g.set_state(p.nodes()[v], states[v]);
    report.final_chi2 = chi2;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace fieldloc
