#include <cmath>
#include <numbers>

#include "doctest.h"
#include "motionkit/geom.hpp"
#include "test_util.hpp"

using namespace motionkit;
using namespace motionkit::geom;
using motionkit::testing::random_rotation;

TEST_CASE("axis-angle of identity and quarter turn") {
  auto aa = matrix_to_axis_angle(RotationMatrix::Identity());
  CHECK(aa.angle == 0.0);
  CHECK(aa.axis.isApprox(Vec3::UnitX()));

  aa = matrix_to_axis_angle(rot_z(std::numbers::pi / 2));
  CHECK(aa.angle == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
  CHECK((aa.axis - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("axis-angle agrees with quaternion route") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const auto aa = matrix_to_axis_angle(r);
    CHECK(std::abs(aa.angle - testing::quaternion_angle(r)) < 1e-7);
    CHECK((aa.axis - testing::quaternion_axis(r)).norm() < 1e-7);
    CHECK((axis_angle_to_matrix(aa) - r).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("axis-angle near a half turn") {
  for (double eps : {0.0, 1e-12, 1e-8, 1e-4, 0.3}) {
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    const RotationMatrix r = Eigen::AngleAxisd(std::numbers::pi - eps, axis).toRotationMatrix();
    const auto aa = matrix_to_axis_angle(r);
    CHECK(std::abs(aa.angle - (std::numbers::pi - eps)) < 1e-7);
    CHECK((axis_angle_to_matrix(aa) - r).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("non-orthonormal input is rejected") {
  RotationMatrix bad = RotationMatrix::Identity();
  bad(0, 1) = 0.01;
  CHECK_THROWS_AS(matrix_to_axis_angle(bad), Error);
  RotationMatrix reflection = RotationMatrix::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(geodesic_delta(RotationMatrix::Identity(), reflection), Error);
}

TEST_CASE("geodesic delta") {
  Rng rng(3);
  const RotationMatrix r = random_rotation(rng);
  CHECK(geodesic_delta(r, r) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(geodesic_delta(RotationMatrix::Identity(), rot_x(std::numbers::pi)) ==
        doctest::Approx(std::numbers::pi).epsilon(1e-12));

  for (int i = 0; i < 1000; ++i) {
    const RotationMatrix a = random_rotation(rng);
    const RotationMatrix b = random_rotation(rng);
    const RotationMatrix c = random_rotation(rng);
    const double ab = geodesic_delta(a, b);
    // Quaternion oracle: angle = 2 acos |<qa, qb>|.
    const Eigen::Quaterniond qa(a), qb(b);
    const double oracle = 2.0 * std::acos(std::min(1.0, std::abs(qa.dot(qb))));
    CHECK(std::abs(ab - oracle) < 1e-7);
    CHECK(ab >= 0.0);
    CHECK(ab <= std::numbers::pi);
    CHECK(std::abs(ab - geodesic_delta(b, a)) < 1e-12);
    CHECK(geodesic_delta(a, c) <= ab + geodesic_delta(b, c) + 1e-6);
  }
}

TEST_CASE("6D encode/decode") {
  const Rotation6D id = rot6d_encode(RotationMatrix::Identity());
  CHECK(id == Rotation6D{{1, 0, 0, 0, 1, 0}});

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const RotationMatrix r = random_rotation(rng);
    CHECK((rot6d_decode(rot6d_encode(r)) - r).cwiseAbs().maxCoeff() < 1e-9);
    const Rotation6D e = rot6d_encode(r);
    const Rotation6D back = rot6d_encode(rot6d_decode(e));
    for (int k = 0; k < 6; ++k) CHECK(std::abs(back[k] - e[k]) < 1e-12);
  }
}

TEST_CASE("6D decode of perturbed columns by hand Gram-Schmidt") {
  // a = (3,0,4) -> (0.6, 0, 0.8); b = (1,2,0) minus 0.6 a_hat = (0.64, 2, -0.48).
  const RotationMatrix r = rot6d_decode(Rotation6D{{3, 0, 4, 1, 2, 0}});
  const double n = std::sqrt(0.64 * 0.64 + 4.0 + 0.48 * 0.48);
  const Vec3 c0(0.6, 0.0, 0.8);
  const Vec3 c1(0.64 / n, 2.0 / n, -0.48 / n);
  CHECK((r.col(0) - c0).norm() < 1e-12);
  CHECK((r.col(1) - c1).norm() < 1e-12);
  CHECK((r.col(2) - c0.cross(c1)).norm() < 1e-12);
  CHECK((r.transpose() * r - RotationMatrix::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.determinant() == doctest::Approx(1.0));
}

TEST_CASE("6D decode output is orthonormal for random finite inputs") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    Rotation6D r;
    for (auto& x : r.v) x = rng.normal(0.0, 3.0);
    const RotationMatrix m = rot6d_decode(r);
    CHECK((m.transpose() * m - RotationMatrix::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("6D decode rejects degenerate columns") {
  CHECK_THROWS_AS(rot6d_decode(Rotation6D{{0, 0, 0, 0, 1, 0}}), Error);
  CHECK_THROWS_AS(rot6d_decode(Rotation6D{{1, 0, 0, 2, 0, 0}}), Error);
  try {
    rot6d_decode(Rotation6D{{1, 0, 0, 2, 0, 0}});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate6D);
  }
}

TEST_CASE("forward kinematics rest pose and translation") {
  const Skeleton body = Skeleton::default_body();
  CHECK(body.joint_count() == 22);
  std::vector<RotationMatrix> locals(22, RotationMatrix::Identity());
  const auto rest = forward_kinematics(body, Vec3::Zero(), RotationMatrix::Identity(), locals);
  for (std::size_t j = 0; j < 22; ++j) {
    Vec3 accumulated = Vec3::Zero();
    for (int k = static_cast<int>(j); k > 0; k = body.parent(k)) accumulated += body.offset(k);
    CHECK((rest[j] - accumulated).norm() < 1e-12);
  }
  const Vec3 t(0.3, 1.2, -2.0);
  const auto moved = forward_kinematics(body, t, RotationMatrix::Identity(), locals);
  for (std::size_t j = 0; j < 22; ++j) CHECK((moved[j] - rest[j] - t).norm() < 1e-12);
}

TEST_CASE("forward kinematics of a planar two-bone arm") {
  const Skeleton arm({-1, 0, 1}, {Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 0, 0)});
  std::vector<RotationMatrix> locals = {RotationMatrix::Identity(), rot_z(std::numbers::pi / 2),
                                        RotationMatrix::Identity()};
  const auto p = forward_kinematics(arm, Vec3::Zero(), RotationMatrix::Identity(), locals);
  // Elbow at (1,0,0); forearm points along +Y after the quarter turn.
  CHECK((p[1] - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK((p[2] - Vec3(1, 1, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(forward_kinematics(arm, Vec3::Zero(), RotationMatrix::Identity(),
                                     std::span(locals).first(2)),
                  Error);
}

TEST_CASE("forward kinematics is equivariant under root rotation") {
  const Skeleton body = Skeleton::default_body();
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RotationMatrix> locals;
    for (int j = 0; j < 22; ++j) locals.push_back(random_rotation(rng));
    const RotationMatrix root = random_rotation(rng);
    const RotationMatrix g = random_rotation(rng);
    const Vec3 t = testing::random_vec3(rng);
    const auto base = forward_kinematics(body, t, root, locals);
    const auto turned = forward_kinematics(body, t, g * root, locals);
    for (std::size_t j = 0; j < 22; ++j) {
      CHECK((turned[j] - (t + g * (base[j] - t))).norm() < 1e-9);
    }
  }
}

TEST_CASE("skeleton validation") {
  CHECK_THROWS_AS(Skeleton({0, 0}, {Vec3::Zero(), Vec3::Zero()}), Error);
  CHECK_THROWS_AS(Skeleton({-1, 2, 1}, {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}), Error);
  CHECK_THROWS_AS(Skeleton({-1}, {}), Error);
}
