#include "doctest.h"
#include "support.hpp"

#include "fieldloc/errors.hpp"
#include "fieldloc/geometry.hpp"

using namespace fieldloc;
using testing::kPi;

namespace {

constexpr int kCases = 1000;

bool near(const Transform& A, const Transform& B, double tol) {
    return (A.matrix() - B.matrix()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

TEST_CASE("to_transform examples") {
    CHECK(to_transform(Pose6D()).matrix().isIdentity(0.0));

    const Transform X = to_transform({Eigen::Vector3d(1, 2, 3), Eigen::Vector3d::Zero()});
    CHECK(X.linear().isIdentity(0.0));
    CHECK(X.translation() == Eigen::Vector3d(1, 2, 3));

    const Transform Q = to_transform({Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, kPi / 2)});
    Eigen::Matrix3d expect;
    expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((Q.linear() - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("phi examples") {
    CHECK(phi(Transform::Identity()) == Vector6d::Zero());

    const Vector6d v = phi(to_transform({Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 0, 0.3)}));
    Vector6d expect;
    expect << 1, 0, 0, 0, 0, 0.3;
    CHECK((v - expect).cwiseAbs().maxCoeff() < 1e-15);

    // Just below a half turn: no wrap, agrees with the matrix logarithm.
    const double a = kPi - 1e-8;
    Transform X = Transform::Identity();
    X.linear() = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix();
    const Vector6d p = phi(X);
    CHECK(p[3] == doctest::Approx(a).epsilon(1e-12));
    CHECK(std::abs(p[4]) < 1e-12);
    CHECK(std::abs(p[5]) < 1e-12);
    CHECK((p.tail<3>() - testing::logm_rotation(X.linear())).norm() < 1e-7);
}

TEST_CASE("half turn representative has a positive first nonzero component") {
    for (const Eigen::Vector3d axis : {Eigen::Vector3d(-1, 0, 0), Eigen::Vector3d(0, -1, 0),
                                       Eigen::Vector3d(0, 0, -1), Eigen::Vector3d(-1, 1, 0).normalized()}) {
        const Eigen::Vector3d r = so3_log(so3_exp(kPi * axis));
        CHECK(r.norm() == doctest::Approx(kPi).epsilon(1e-9));
        const int first = std::abs(r.x()) > 1e-9 ? 0 : (std::abs(r.y()) > 1e-9 ? 1 : 2);
        CHECK(r[first] > 0.0);
    }
    const Eigen::Vector3d n = normalize_rotation(Eigen::Vector3d(0, 0, -kPi));
    CHECK(n.z() == doctest::Approx(kPi));
}

TEST_CASE("relative examples") {
    testing::Rng rng(11);
    const Transform X = testing::random_transform(rng);
    CHECK(near(relative(X, X), Transform::Identity(), 1e-12));
    CHECK(near(relative(Transform::Identity(), X), X, 1e-12));
}

TEST_CASE("interp_pose examples") {
    const Pose6D a;
    const Pose6D b(Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(0, 0, 1.0));
    const Pose6D m = interp_pose(a, b, 0.5);
    CHECK((m.t - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
    CHECK((m.r - Eigen::Vector3d(0, 0, 0.5)).norm() < 1e-15);
    CHECK_THROWS_AS(interp_pose(a, b, -0.1), InvalidArgument);
    CHECK_THROWS_AS(interp_pose(a, b, 1.5), InvalidArgument);
}

TEST_CASE("rot_diff examples") {
    const Eigen::Vector3d r(0.3, -0.2, 0.9);
    CHECK(rot_diff(r, r).norm() < 1e-15);
    CHECK((rot_diff(Eigen::Vector3d(0, 0, 0.1), Eigen::Vector3d(0, 0, 0.4)) - Eigen::Vector3d(0, 0, 0.3)).norm() <
          1e-15);
}

TEST_CASE("wrap_angle range") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_angle(0.25) == 0.25);
}

TEST_CASE("property: phi(to_transform(p)) round trip") {
    testing::Rng rng(101);
    for (int k = 0; k < kCases; ++k) {
        const Pose6D p = testing::random_pose(rng, 50.0, kPi - 1e-6);
        const Vector6d v = phi(to_transform(p));
        REQUIRE((v - p.vec()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("property: so3_exp and so3_log agree with matrix exponential and logarithm") {
    testing::Rng rng(102);
    for (int k = 0; k < kCases; ++k) {
        const Eigen::Vector3d r = testing::random_rotation(rng, kPi - 1e-3);
        const Eigen::Matrix3d R = so3_exp(r);
        REQUIRE((R - testing::expm_rotation(r)).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((so3_log(R) - testing::logm_rotation(R)).norm() < 1e-9);
        REQUIRE((R.transpose() * R).isIdentity(1e-12));
        REQUIRE(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("property: group laws") {
    testing::Rng rng(103);
    for (int k = 0; k < kCases; ++k) {
        const Transform A = testing::random_transform(rng);
        const Transform B = testing::random_transform(rng);
        const Transform C = testing::random_transform(rng);
        REQUIRE(near(compose(compose(A, B), C), compose(A, compose(B, C)), 1e-9));
        REQUIRE(near(compose(A, Transform::Identity()), A, 1e-12));
        REQUIRE(near(compose(Transform::Identity(), A), A, 1e-12));
        REQUIRE(near(compose(A, invert(A)), Transform::Identity(), 1e-9));
        REQUIRE(near(compose(invert(A), A), Transform::Identity(), 1e-9));
        REQUIRE(near(relative(A, B), compose(invert(A), B), 1e-12));
        REQUIRE(near(compose(relative(A, B), relative(B, C)), relative(A, C), 1e-9));
    }
}

TEST_CASE("property: interp_pose endpoints and midpoint symmetry") {
    testing::Rng rng(104);
    for (int k = 0; k < kCases; ++k) {
        const Pose6D a = testing::random_pose(rng);
        const Pose6D b = testing::random_pose(rng);
        const Pose6D p0 = interp_pose(a, b, 0.0);
        const Pose6D p1 = interp_pose(a, b, 1.0);
        REQUIRE((p0.vec() - a.vec()).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE(near(to_transform(p1), to_transform(b), 1e-9));
        const Pose6D m1 = interp_pose(a, b, 0.5);
        const Pose6D m2 = interp_pose(b, a, 0.5);
        // Exactly antipodal pairs have two geodesic midpoints.
        if (rot_diff(a.r, b.r).norm() > kPi - 1e-3) continue;
        REQUIRE(near(to_transform(m1), to_transform(m2), 1e-9));
    }
}

TEST_CASE("property: rot_diff matches the matrix-log oracle") {
    testing::Rng rng(105);
    for (int k = 0; k < kCases; ++k) {
        const Eigen::Vector3d ra = testing::random_rotation(rng);
        const Eigen::Vector3d rb = testing::random_rotation(rng);
        const Eigen::Matrix3d Rrel = testing::expm_rotation(ra).transpose() * testing::expm_rotation(rb);
        const Eigen::Vector3d d = rot_diff(ra, rb);
        REQUIRE(d.norm() <= kPi + 1e-12);
        if (d.norm() > kPi - 1e-4) continue;  // log is ill-conditioned at a half turn
        REQUIRE((d - testing::logm_rotation(Rrel)).norm() < 1e-9);
    }
}

TEST_CASE("property: Euler angles round trip") {
    testing::Rng rng(106);
    for (int k = 0; k < kCases; ++k) {
        const double roll = testing::uniform(rng, -kPi + 1e-6, kPi);
        const double pitch = testing::uniform(rng, -kPi / 2 + 1e-3, kPi / 2 - 1e-3);
        const double yaw = testing::uniform(rng, -kPi + 1e-6, kPi);
        const Eigen::Vector3d rpy = to_rpy(from_rpy(roll, pitch, yaw));
        REQUIRE(rpy[0] == doctest::Approx(roll).epsilon(1e-9));
        REQUIRE(rpy[1] == doctest::Approx(pitch).epsilon(1e-9));
        REQUIRE(rpy[2] == doctest::Approx(yaw).epsilon(1e-9));
    }
}

TEST_CASE("property: box_plus composes on the right") {
    testing::Rng rng(107);
    for (int k = 0; k < kCases; ++k) {
        const Pose6D p = testing::random_pose(rng);
        Vector6d d;
        d << testing::random_vec(rng, 1.0), testing::random_vec(rng, 0.5);
        const Pose6D q = box_plus(p, d);
        REQUIRE((q.t - (p.t + d.head<3>())).norm() < 1e-12);
        const Eigen::Matrix3d expect = so3_exp(p.r) * so3_exp(d.tail<3>());
        REQUIRE((so3_exp(q.r) - expect).cwiseAbs().maxCoeff() < 1e-9);
    }
}
