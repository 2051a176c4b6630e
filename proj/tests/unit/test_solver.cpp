#include "doctest.h"
#include "support.hpp"
#include "../common/random_graph.hpp"

#include <limits>

#include "fieldloc/errors.hpp"
#include "fieldloc/solver.hpp"

using namespace fieldloc;

namespace {

// Runs to the bottom of slow valleys.
SolverConfig tight_config() {
    SolverConfig c;
    c.max_iterations = 2000;
    c.chi2_rel_tol = 1e-14;
    c.step_tol = 1e-12;
    return c;
}

std::vector<int> all_ids(const PoseGraph& g) {
    std::vector<int> ids;
    for (int k = 0; k < g.size(); ++k) ids.push_back(k);
    return ids;
}

// Inverse left Jacobian of SO(3).
Eigen::Matrix3d jl_inv(const Eigen::Vector3d& phi) {
    const double th = phi.norm();
    const Eigen::Matrix3d K = skew(phi);
    if (th < 1e-9) return Eigen::Matrix3d::Identity() - 0.5 * K;
    const double c = 1.0 / (th * th) - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
    return Eigen::Matrix3d::Identity() - 0.5 * K + c * K * K;
}

// Closed-form d e / d(local increments) of a full 6-DoF relative-pose factor.
JacobianBlocks vo_jacobian_oracle(const Factor& f, const Transform& Xi, const Transform& Xj) {
    const Eigen::Matrix3d Ri = Xi.linear();
    const Eigen::Vector3d p = Ri.transpose() * (Xj.translation() - Xi.translation());
    const Eigen::Matrix3d Z = so3_exp(f.z.tail<3>());
    const Eigen::Vector3d e = so3_log((Ri.transpose() * Xj.linear()).transpose() * Z);
    JacobianBlocks J;
    J.J_i.block<3, 3>(0, 0) = Ri.transpose();
    J.J_i.block<3, 3>(0, 3) = -skew(p);
    J.J_i.block<3, 3>(3, 3) = jl_inv(-e) * Z.transpose();
    J.J_j.block<3, 3>(0, 0) = -Ri.transpose();
    J.J_j.block<3, 3>(3, 3) = -jl_inv(e);
    return J;
}

double block_rel_err(const Matrix6d& A, const Matrix6d& B) {
    return (A - B).cwiseAbs().maxCoeff() / std::max(1.0, B.cwiseAbs().maxCoeff());
}

PoseGraph consistent_copy(const testing::RandomGraph& rg) {
    PoseGraph g;
    for (size_t k = 0; k < rg.truth.size(); ++k) g.add_node(0.5 * k, rg.truth[k]);
    for (Factor f : rg.graph.factors()) {
        const Transform Xi = to_transform(rg.truth[static_cast<size_t>(f.node_i)]);
        const Transform Xj = f.node_j ? to_transform(rg.truth[static_cast<size_t>(*f.node_j)]) : Transform();
        if (f.kind != FactorKind::AMM) f.z = predict(f.kind, Xi, f.node_j ? &Xj : nullptr);
        if (f.kind == FactorKind::AMM) continue;
        g.add_factor(f);
    }
    return g;
}

}  // namespace

TEST_CASE("linearize examples") {
    PoseGraph g;
    g.add_node(0, Pose6D());
    const LinearSystem empty = linearize(g, {0});
    CHECK(Eigen::MatrixXd(empty.H).isZero(0.0));
    CHECK(empty.b.isZero(0.0));

    g.add_factor(build_gps_factor(0, {1, 2, 3}, Eigen::Matrix3d::Identity()));
    const LinearSystem sys = linearize(g, {0});
    const Eigen::MatrixXd H(sys.H);
    CHECK(H.topLeftCorner<3, 3>().isApprox(Eigen::Matrix3d::Identity()));
    CHECK(H.bottomRightCorner<3, 3>().isZero(0.0));
    CHECK((sys.b.head<3>() + Eigen::Vector3d(1, 2, 3)).norm() < 1e-12);
    CHECK(sys.chi2 == doctest::Approx(14.0));
}

TEST_CASE("numeric_jacobian examples") {
    const Transform I = Transform::Identity();
    const Factor gps = build_gps_factor(0, {1, 2, 3}, Eigen::Matrix3d::Identity());
    const JacobianBlocks Jg = numeric_jacobian(gps, to_transform({{0.5, 0, 1}, {0.1, 0.2, 0.3}}), nullptr, 1e-6);
    CHECK(Jg.J_i.topLeftCorner<3, 3>().isApprox(-Eigen::Matrix3d::Identity(), 1e-8));
    CHECK(Jg.J_i.rightCols<3>().isZero(1e-8));

    const Factor mrf = build_mrf_factor(0, 1, Pose6D(), Pose6D(), WeightParams{});
    const JacobianBlocks Jm = numeric_jacobian(mrf, I, &I, 1e-6);
    CHECK(Jm.J_i(2, 2) == doctest::Approx(-1.0));
    CHECK(Jm.J_j(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("property: VO Jacobian matches the closed-form SE(3) oracle") {
    testing::Rng rng(41);
    for (int k = 0; k < 200; ++k) {
        const Transform Xi = to_transform(testing::random_pose(rng, 5.0, 2.5));
        const Transform Xj = to_transform(testing::random_pose(rng, 5.0, 2.5));
        const Pose6D meas = testing::jitter(rng, to_pose(relative(Xi, Xj)), 0.1, 0.1);
        const Factor f = build_vo_factor(0, 1, meas, Matrix6d::Identity(), WeightParams{});
        const JacobianBlocks num = numeric_jacobian(f, Xi, &Xj, 1e-6);
        const JacobianBlocks ref = vo_jacobian_oracle(f, Xi, Xj);
        REQUIRE(block_rel_err(num.J_i, ref.J_i) < 1e-5);
        REQUIRE(block_rel_err(num.J_j, ref.J_j) < 1e-5);
    }
}

TEST_CASE("property: analytic fast paths match central differences") {
    testing::Rng rng(42);
    const DemGrid dem({-50, -50}, 10.0, 11, 11, std::vector<double>(121, 0.3));
    for (int k = 0; k < 300; ++k) {
        const Pose6D a = testing::random_pose(rng, 5.0);
        const Pose6D b = testing::random_pose(rng, 5.0);
        const Transform Xa = to_transform(a), Xb = to_transform(b);
        const Factor gps = build_gps_factor(0, testing::random_vec(rng, 5), Eigen::Matrix3d::Identity());
        const Factor mrf = build_mrf_factor(0, 1, a, b, WeightParams{});
        const Factor demf = *build_dem_factor(0, a, dem, WeightParams{});
        for (const Factor* f : {&gps, &mrf, &demf}) {
            const auto an = analytic_jacobian(*f);
            REQUIRE(an.has_value());
            const JacobianBlocks num = numeric_jacobian(*f, Xa, f->node_j ? &Xb : nullptr, 1e-6);
            REQUIRE(block_rel_err(num.J_i, an->J_i) < 1e-5);
            if (f->node_j) REQUIRE(block_rel_err(num.J_j, an->J_j) < 1e-5);
        }
    }
    CHECK_FALSE(analytic_jacobian(build_amm_factor(0, 1, 1.0)).has_value());
}

TEST_CASE("property: numeric Jacobians of every kind match an independent difference quotient") {
    testing::Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const auto rg = testing::make_random_graph(rng, 4);
        for (const Factor& f : rg.graph.factors()) {
            const Transform Xi = to_transform(rg.graph.node(f.node_i).state);
            const Transform Xj = f.node_j ? to_transform(rg.graph.node(*f.node_j).state) : Transform::Identity();
            const JacobianBlocks J = numeric_jacobian(f, Xi, f.node_j ? &Xj : nullptr, 1e-6);
            // Five-point stencil through the public box_plus.
            for (int side = 0; side < (f.node_j ? 2 : 1); ++side) {
                const Pose6D base = rg.graph.node(side == 0 ? f.node_i : *f.node_j).state;
                for (int c = 0; c < 6; ++c) {
                    auto err_at = [&](double h) {
                        Vector6d d = Vector6d::Zero();
                        d[c] = h;
                        const Transform P = to_transform(box_plus(base, d));
                        if (side == 0) return error(f, P, f.node_j ? &Xj : nullptr);
                        return error(f, Xi, &P);
                    };
                    const double h = 1e-4;
                    const Vector6d col =
                        (-err_at(2 * h) + 8 * err_at(h) - 8 * err_at(-h) + err_at(-2 * h)) / (12 * h);
                    const Vector6d got = side == 0 ? J.J_i.col(c) : J.J_j.col(c);
                    INFO(to_string(f.kind));
                    REQUIRE((got - col).cwiseAbs().maxCoeff() / std::max(1.0, col.cwiseAbs().maxCoeff()) < 1e-5);
                }
            }
        }
    }
}

TEST_CASE("property: linearize matches finite differences of total_cost") {
    testing::Rng rng(44);
    for (int trial = 0; trial < 100; ++trial) {
        auto rg = testing::make_random_graph(rng, 5);
        const std::vector<int> ids = all_ids(rg.graph);
        const LinearSystem sys = linearize(rg.graph, ids);
        // cost = sum e^T W e, so grad = 2 b.
        const Eigen::VectorXd grad = testing::fd_gradient(rg.graph, ids, 1e-6);
        REQUIRE((2 * sys.b - grad).cwiseAbs().maxCoeff() / std::max(1.0, grad.cwiseAbs().maxCoeff()) < 1e-4);
        REQUIRE(sys.chi2 == doctest::Approx(total_cost(rg.graph)).epsilon(1e-12));

        // At a zero-residual point the Gauss-Newton H is half the exact Hessian.
        const PoseGraph exact = consistent_copy(rg);
        const LinearSystem zs = linearize(exact, ids);
        REQUIRE(zs.b.cwiseAbs().maxCoeff() < 1e-10);
        const Eigen::MatrixXd hess = testing::fd_hessian(exact, ids, 1e-4);
        const Eigen::MatrixXd H(zs.H);
        REQUIRE((2 * H - hess).cwiseAbs().maxCoeff() / std::max(1.0, hess.cwiseAbs().maxCoeff()) < 1e-4);
    }
}

TEST_CASE("linearize holds inactive nodes constant") {
    testing::Rng rng(45);
    auto rg = testing::make_random_graph(rng, 6);
    const LinearSystem sys = linearize(rg.graph, {2, 3});
    CHECK(sys.H.rows() == 12);
    CHECK(sys.nodes == std::vector<int>{2, 3});
    const Eigen::VectorXd grad = testing::fd_gradient(rg.graph, {2, 3}, 1e-6);
    CHECK((2 * sys.b - grad).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
}

TEST_CASE("lm_optimize: noise-free WO and GPS chain recovers the truth") {
    PoseGraph g;
    std::vector<Pose6D> truth;
    for (int k = 0; k < 5; ++k) {
        Pose6D p;
        p.t = Eigen::Vector3d(0.5 * k, 0.1 * k * k, 0.05 * k);
        p.r = Eigen::Vector3d(0, 0, 0.2 * k);
        truth.push_back(p);
    }
    testing::Rng rng(46);
    for (int k = 0; k < 5; ++k) {
        Pose6D init = truth[static_cast<size_t>(k)];
        init.t += testing::random_vec(rng, 0.2);
        init.r.z() += testing::uniform(rng, -0.1, 0.1);
        g.add_node(k, init);
        g.add_factor(build_gps_factor(k, truth[static_cast<size_t>(k)].t, 0.01 * Eigen::Matrix3d::Identity()));
        // Roll and pitch are invisible to WO and GPS.
        g.add_factor(build_imu_factor(k, 0.0, 0.0, 1e-4 * Eigen::Matrix2d::Identity()));
        if (k > 0) {
            const Transform Xp = to_transform(truth[static_cast<size_t>(k - 1)]);
            const Transform Xk = to_transform(truth[static_cast<size_t>(k)]);
            const Vector6d z = predict(FactorKind::WO, Xp, &Xk);
            g.add_factor(build_wo_factor(k - 1, k, {z[0], z[1], z[5]}, 1e-4 * Eigen::Matrix3d::Identity(), 0.5, 0.2));
        }
    }
    const SolveReport r = lm_optimize(g, all_ids(g));
    CHECK(r.converged);
    for (int k = 0; k < 5; ++k) {
        CHECK((g.node(k).state.t - truth[static_cast<size_t>(k)].t).norm() < 1e-6);
        CHECK(rot_diff(g.node(k).state.r, truth[static_cast<size_t>(k)].r).norm() < 1e-6);
    }
}

TEST_CASE("lm_optimize: weighted means of altitude priors") {
    {
        PoseGraph g;
        g.add_node(0, Pose6D());
        for (double z : {1.0, 3.0}) {
            Factor f;
            f.kind = FactorKind::DEM;
            f.z[2] = z;
            f.info(2, 2) = 1.0;
            g.add_factor(f);
        }
        lm_optimize(g, {0}, tight_config());
        CHECK(g.node(0).state.t.z() == doctest::Approx(2.0).epsilon(1e-9));
    }
    {
        PoseGraph g;
        g.add_node(0, Pose6D({0, 0, 3}, {0, 0, 0}));
        g.add_factor(build_gps_factor(0, {0, 0, 0}, 0.25 * Eigen::Matrix3d::Identity()));
        const DemGrid dem({-10, -10}, 10.0, 3, 3, std::vector<double>(9, 0.9));
        g.add_factor(*build_dem_factor(0, g.node(0).state, dem, WeightParams{}));
        lm_optimize(g, {0}, tight_config());
        CHECK(g.node(0).state.t.z() == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("property: chi2 trace is monotone and frozen nodes are untouched") {
    testing::Rng rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        auto rg = testing::make_random_graph(rng, 2 + static_cast<int>(rng() % 7), 0.05, 0.3);
        PoseGraph& g = rg.graph;
        const int frozen = static_cast<int>(rng() % static_cast<unsigned>(g.size()));
        g.set_frozen_below(frozen);
        std::vector<Pose6D> before;
        for (const auto& n : g.nodes()) before.push_back(n.state);

        const SolveReport r = lm_optimize(g, all_ids(g));
        REQUIRE(r.chi2_trace.front() == r.initial_chi2);
        REQUIRE(r.chi2_trace.back() == r.final_chi2);
        for (size_t k = 1; k < r.chi2_trace.size(); ++k) REQUIRE(r.chi2_trace[k] <= r.chi2_trace[k - 1]);
        REQUIRE(r.final_chi2 <= r.initial_chi2);
        // Factors among frozen nodes only are outside the problem.
        PoseGraph touching;
        for (const auto& n : g.nodes()) touching.add_node(n.stamp, n.state);
        for (const Factor& f : g.factors()) {
            if (f.node_i >= frozen || (f.node_j && *f.node_j >= frozen)) touching.add_factor(f);
        }
        REQUIRE(r.final_chi2 == doctest::Approx(total_cost(touching)).epsilon(1e-9));
        for (int k = 0; k < frozen; ++k) {
            REQUIRE(g.node(k).state.t == before[static_cast<size_t>(k)].t);
            REQUIRE(g.node(k).state.r == before[static_cast<size_t>(k)].r);
        }
    }
}

TEST_CASE("property: gauge consistency under a rigid pre-transform") {
    testing::Rng rng(48);
    const SolverConfig tight = tight_config();
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);
        std::vector<Pose6D> truth;
        Transform cur = testing::random_transform(rng);
        for (int k = 0; k < n; ++k) {
            truth.push_back(to_pose(cur));
            Transform step = Transform::Identity();
            step.translation() = Eigen::Vector3d(0.5, 0.1, 0.02);
            step.linear() = from_rpy(0.02, -0.03, 0.3);
            cur = cur * step;
        }
        // Relative factors only, with a loop so the optimum has residual.
        PoseGraph g;
        for (int k = 0; k < n; ++k) g.add_node(k, testing::jitter(rng, truth[static_cast<size_t>(k)], 0.05, 0.02));
        auto link = [&](int i, int j) {
            const Pose6D rel = to_pose(relative(to_transform(truth[static_cast<size_t>(i)]),
                                                to_transform(truth[static_cast<size_t>(j)])));
            g.add_factor(build_lid_factor(i, j, testing::jitter(rng, rel, 0.02, 0.01), 0.01 * Matrix6d::Identity()));
        };
        for (int k = 1; k < n; ++k) link(k - 1, k);
        link(0, n - 1);
        g.set_frozen_below(1);

        PoseGraph moved = g;
        const Transform T = testing::random_transform(rng);
        for (int k = 0; k < n; ++k) moved.set_state(k, to_pose(T * to_transform(g.node(k).state)));

        lm_optimize(g, all_ids(g), tight);
        lm_optimize(moved, all_ids(moved), tight);
        for (int k = 1; k < n; ++k) {
            const Vector6d a = phi(relative(to_transform(g.node(0).state), to_transform(g.node(k).state)));
            const Vector6d b = phi(relative(to_transform(moved.node(0).state), to_transform(moved.node(k).state)));
            REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("property: zero residual gives zero gradient") {
    testing::Rng rng(49);
    for (int trial = 0; trial < 100; ++trial) {
        const auto rg = testing::make_random_graph(rng, 2 + static_cast<int>(rng() % 7));
        const PoseGraph exact = consistent_copy(rg);
        const LinearSystem sys = linearize(exact, all_ids(exact));
        REQUIRE(sys.b.cwiseAbs().maxCoeff() < 1e-10);
        PoseGraph copy = exact;
        const SolveReport r = lm_optimize(copy, all_ids(copy));
        REQUIRE(r.final_chi2 <= r.initial_chi2);
    }
}

TEST_CASE("lm_optimize matches the dense oracle on small graphs") {
    testing::Rng rng(50);
    for (int trial = 0; trial < 20; ++trial) {
        auto rg = testing::make_random_graph(rng, 2 + static_cast<int>(rng() % 7), 0.02, 0.1, true);
        PoseGraph lm = rg.graph;
        PoseGraph ref = rg.graph;
        const SolveReport r = lm_optimize(lm, all_ids(lm), tight_config());
        const double best = testing::oracle_minimize(ref, all_ids(ref));
        REQUIRE(r.final_chi2 <= best * (1 + 1e-6) + 1e-12);
    }
}

TEST_CASE("locked coordinates keep their values") {
    testing::Rng rng(51);
    auto rg = testing::make_random_graph(rng, 6, 0.05, 0.3);
    SolverConfig cfg;
    cfg.locked[3] = cfg.locked[4] = true;
    std::vector<Pose6D> before;
    for (const auto& n : rg.graph.nodes()) before.push_back(n.state);
    lm_optimize(rg.graph, all_ids(rg.graph), cfg);
    for (int k = 0; k < rg.graph.size(); ++k) {
        // Right-composed increments with zero x/y components: roll and pitch
        // of the body-frame increment stay zero.
        const Eigen::Vector3d d = rot_diff(before[static_cast<size_t>(k)].r, rg.graph.node(k).state.r);
        CHECK(std::abs(d.x()) < 1e-12);
        CHECK(std::abs(d.y()) < 1e-12);
    }
}

TEST_CASE("solver failures and validation") {
    PoseGraph g;
    g.add_node(0, Pose6D());
    Factor f = build_gps_factor(0, {1, 0, 0}, Eigen::Matrix3d::Identity());
    f.info(0, 0) = std::numeric_limits<double>::infinity();
    g.add_factor(f);
    CHECK_THROWS_AS(lm_optimize(g, {0}), LinearSolveFailure);

    SolverConfig bad;
    bad.lm_lambda_factor = 1.0;
    CHECK_THROWS_AS(lm_optimize(g, {0}, bad), InvalidArgument);

    PoseGraph frozen;
    frozen.add_node(0, Pose6D());
    frozen.add_factor(build_gps_factor(0, {1, 0, 0}, Eigen::Matrix3d::Identity()));
    frozen.set_frozen_below(1);
    const SolveReport r = lm_optimize(frozen, {0});
    CHECK(r.iterations == 0);
    CHECK(frozen.node(0).state.t.isZero(0.0));
    CHECK(free_nodes(frozen).empty());
}
