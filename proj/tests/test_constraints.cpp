#include "oracles.hpp"

#include "msdi/constraints.hpp"

#include <doctest.h>

using namespace msdi;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an msdi::Error");
  return ErrorCode::InvalidArgument;
}

Eigen::Matrix3Xd random_unit_columns(oracle::Rng& rng, int n) {
  Eigen::Matrix3Xd m(3, n);
  for (int i = 0; i < n; ++i) m.col(i) = oracle::unit3(rng);
  return m;
}

Eigen::Matrix3Xd random_points(oracle::Rng& rng, int n, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  Eigen::Matrix3Xd m(3, n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) m(a, i) = oracle::uniform(rng, lo[a], hi[a]);
  }
  return m;
}

// Points on a coarse lattice, so that equal distances (ties) are common.
Eigen::Matrix3Xd lattice_points(oracle::Rng& rng, int n, int cells, double step, const Eigen::Vector3d& origin) {
  Eigen::Matrix3Xd m(3, n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) m(a, i) = origin[a] + step * static_cast<double>(rng() % static_cast<unsigned>(cells));
  }
  return m;
}

}  // namespace

TEST_SUITE("constraints") {

TEST_CASE("trajectory_loss examples") {
  oracle::Rng rng(1);
  const Eigen::Matrix3Xd plan = random_points(rng, 7, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
  const TranslationLoss same = trajectory_loss(plan, plan, 0.1, 1.0);
  CHECK(same.loss == 0.0);
  CHECK(same.grad.isZero(0.0));

  Eigen::Matrix3Xd plan3 = Eigen::Matrix3Xd::Zero(3, 3);
  Eigen::Matrix3Xd r3 = plan3;
  r3.col(1) = Eigen::Vector3d(1, 0, 0);
  const TranslationLoss mid = trajectory_loss(r3, plan3, 1.0, 1.0);
  CHECK(mid.loss == 1.0);
  CHECK(mid.grad.col(1) == Eigen::Vector3d(2, 0, 0));
  CHECK(mid.grad.col(0).isZero(0.0));
  CHECK(mid.grad.col(2).isZero(0.0));

  Eigen::Matrix3Xd plan2 = Eigen::Matrix3Xd::Zero(3, 2);
  Eigen::Matrix3Xd r2 = plan2;
  r2.col(0) = Eigen::Vector3d(0, 2, 0);
  CHECK(trajectory_loss(r2, plan2, 1.0, 10.0).loss == 40.0);

  CHECK(code_of([&] { trajectory_loss(r3, plan2, 1.0, 1.0); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("trajectory gradient is zero on orientation and pose") {
  oracle::Rng rng(2);
  const MotionSequence m = oracle::random_motion(rng, 6, 3, 1.0, 0.5);
  const Eigen::Matrix3Xd plan = random_points(rng, 6, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
  const TranslationLoss l = trajectory_loss(m, plan, 0.1, 1.0);
  CHECK(l.grad.cols() == 6);
  // The loss only sees the translation columns.
  MotionSequence other = m;
  for (Frame& f : other.frames) f.pose.setConstant(0.3);
  CHECK(trajectory_loss(other, plan, 0.1, 1.0).loss == l.loss);
}

TEST_CASE("smoothness_loss examples") {
  const int n = 9;
  Eigen::Matrix3Xd linear(3, n), quadratic(3, n);
  const Eigen::Vector3d v(3.0, -1.0, 0.5);
  for (int i = 0; i < n; ++i) {
    linear.col(i) = i * v;
    quadratic.col(i) = Eigen::Vector3d(i * i, 0, 0);
  }
  CHECK(smoothness_loss(linear).loss == 0.0);
  CHECK(smoothness_loss(quadratic).loss == 0.0);
  Eigen::Matrix3Xd cubic = Eigen::Matrix3Xd::Zero(3, 4);
  for (int i = 0; i < 4; ++i) cubic(0, i) = (i + 1) * (i + 1) * (i + 1);
  CHECK(smoothness_loss(cubic).loss == 36.0);
  CHECK(code_of([] { smoothness_loss(Eigen::Matrix3Xd::Zero(3, 3)); }) == ErrorCode::TooFewFrames);

  oracle::Rng rng(3);
  const Eigen::Matrix3Xd r = random_points(rng, 12, Eigen::Vector3d::Constant(-2), Eigen::Vector3d::Constant(2));
  CHECK(smoothness_loss(r).loss == doctest::Approx(oracle::jerk(r)).epsilon(1e-13));
}

TEST_CASE("translation covariance") {
  oracle::Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3Xd r = random_points(rng, 10, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
    const Eigen::Matrix3Xd p = random_points(rng, 10, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
    const Eigen::Vector3d shift = oracle::uniform3(rng, -5, 5);
    const Eigen::Matrix3Xd rs = r.colwise() + shift;
    const Eigen::Matrix3Xd ps = p.colwise() + shift;
    CHECK(trajectory_loss(rs, ps, 0.1, 1.0).loss == doctest::Approx(trajectory_loss(r, p, 0.1, 1.0).loss).epsilon(1e-12));
    CHECK(smoothness_loss(rs).loss == doctest::Approx(smoothness_loss(r).loss).epsilon(1e-9));
  }
}

TEST_CASE("translation loss gradients match central differences") {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 8);
    const Eigen::Matrix3Xd r = random_points(rng, n, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
    const Eigen::Matrix3Xd p = random_points(rng, n, Eigen::Vector3d::Constant(-1), Eigen::Vector3d::Constant(1));
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
    const auto as_matrix = [n](const Eigen::VectorXd& v) { return Eigen::Map<const Eigen::Matrix3Xd>(v.data(), 3, n); };
    const auto ft = [&](const Eigen::VectorXd& v) { return trajectory_loss(Eigen::Matrix3Xd(as_matrix(v)), p, 0.1, 1.0).loss; };
    const auto fs = [&](const Eigen::VectorXd& v) { return smoothness_loss(Eigen::Matrix3Xd(as_matrix(v))).loss; };
    const Eigen::Matrix3Xd gt = trajectory_loss(r, p, 0.1, 1.0).grad;
    const Eigen::Matrix3Xd gs = smoothness_loss(r).grad;
    CHECK(oracle::max_rel_error(Eigen::Map<const Eigen::VectorXd>(gt.data(), gt.size()),
                                oracle::numeric_gradient(ft, x, 1e-5), 1e-3) < 1e-4);
    CHECK(oracle::max_rel_error(Eigen::Map<const Eigen::VectorXd>(gs.data(), gs.size()),
                                oracle::numeric_gradient(fs, x, 1e-5), 1e-3) < 1e-4);
  }
}

TEST_CASE("scene object validation") {
  Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Zero(3, 2);
  Eigen::Matrix3Xd nrm(3, 2);
  nrm << 1, 0, 0, 1, 0, 0;
  const SceneObject ok("a", pts, nrm);
  CHECK(ok.size() == 2);
  nrm(0, 1) = 1.1;
  CHECK(code_of([&] { SceneObject("b", pts, nrm); }) == ErrorCode::InvalidArgument);
  CHECK_THROWS_AS(SceneObject("c", pts, Eigen::Matrix3Xd::Zero(3, 1)), Error);

  const Aabb box{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 2, 0.5)};
  const SceneObject b = make_box_object("box", box, 0.1);
  for (int i = 0; i < b.size(); ++i) {
    CHECK(box.contains(b.points().col(i)));
    CHECK(std::abs(b.normals().col(i).norm() - 1.0) <= 1e-12);
    // Outward: stepping along the normal leaves the box.
    CHECK_FALSE(box.contains(b.points().col(i) + 1e-6 * b.normals().col(i)));
  }
  CHECK((b.aabb().min.array() >= box.min.array()).all());
  CHECK((b.aabb().max.array() <= box.max.array()).all());
  CHECK(b.point_spacing() > 0.0);
}

TEST_CASE("detect_collisions examples") {
  Eigen::Matrix3Xd cube(3, 2);
  cube << 0, 1, 0, 1, 0, 1;
  const Eigen::Matrix3Xd normals = Eigen::Vector3d::UnitZ().replicate(1, 2);
  Eigen::Matrix3Xd far(3, 2);
  far << 2, 3, 2, 3, 2, 3;
  CHECK(detect_collisions(cube, normals, SceneObject("far", far, normals)).empty());

  Eigen::Matrix3Xd human(3, 3);
  human << 0, 0.4, 1, 0, 0.5, 1, 0, 0.5, 1;
  Eigen::Matrix3Xd hn = Eigen::Vector3d::UnitX().replicate(1, 3);
  hn.col(1) = Eigen::Vector3d::UnitY();
  // The two outer object points only stretch the object box over the human
  // box, so the region is [0, 1]^3 and holds every human point.
  Eigen::Matrix3Xd obj_pts(3, 3);
  obj_pts << 0.5, -0.1, 1.2, 0.5, -0.1, 1.2, 0.5, -0.1, 1.2;
  const CollisionPairs pairs =
      detect_collisions(human, hn, SceneObject("o", obj_pts, Eigen::Vector3d::UnitZ().replicate(1, 3)));
  CHECK(pairs == oracle::brute_force_pairs(human, hn, obj_pts));
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].object_index == 0);
  CHECK(pairs[0].human_index == 1);
  CHECK(pairs[0].human_normal == Eigen::Vector3d::UnitY());
}

TEST_CASE("detect_collisions equals the exhaustive pairing") {
  oracle::Rng rng(6);
  for (int scene = 0; scene < 100; ++scene) {
    const bool ties = scene % 3 == 0;
    const int p = 20 + static_cast<int>(rng() % 300);
    const int m = 20 + static_cast<int>(rng() % 300);
    Eigen::Matrix3Xd human, object;
    if (ties) {
      human = lattice_points(rng, p, 6, 0.2, Eigen::Vector3d::Zero());
      object = lattice_points(rng, m, 6, 0.2, Eigen::Vector3d::Constant(0.3));
    } else {
      const Eigen::Vector3d offset = oracle::uniform3(rng, -0.8, 0.8);
      human = random_points(rng, p, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
      object = random_points(rng, m, offset, offset + Eigen::Vector3d::Constant(oracle::uniform(rng, 0.2, 1.5)));
    }
    const Eigen::Matrix3Xd hn = random_unit_columns(rng, p);
    const SceneObject obj("o", object, random_unit_columns(rng, m));
    CHECK(detect_collisions(human, hn, obj) == oracle::brute_force_pairs(human, hn, object));
  }
}

TEST_CASE("collision_loss examples") {
  const Eigen::Vector3d n(0, 0, 1);
  const Eigen::Matrix3Xd h = Eigen::Vector3d(0.1, 0.2, 0.3);

  SUBCASE("clamped pair") {
    const SceneObject obj("o", Eigen::Matrix3Xd(h - (-0.5) * n), n);
    const CollisionLoss l = collision_loss({{0, 0, n}}, h, obj, 0.1);
    CHECK(l.loss == -0.1);
    CHECK(l.grad_points.isZero(0.0));
    CHECK(l.active == 0);
    CHECK(collision_loss({{0, 0, n}}, h, obj, 0.1, true).loss == 0.0);
  }
  SUBCASE("penetrating pair") {
    const SceneObject obj("o", Eigen::Matrix3Xd(h - 0.2 * n), n);
    const CollisionLoss l = collision_loss({{0, 0, n}}, h, obj, 0.1);
    CHECK(l.loss == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(l.grad_points.col(0) == n);
    CHECK(l.active == 1);
  }
  SUBCASE("empty pairs") {
    const SceneObject obj("o", Eigen::Matrix3Xd(h), n);
    const CollisionLoss l = collision_loss({}, h, obj, 0.1);
    CHECK(l.loss == 0.0);
    CHECK(l.grad_points.isZero(0.0));
  }
  SUBCASE("stale indices") {
    const SceneObject obj("o", Eigen::Matrix3Xd(h), n);
    CHECK(code_of([&] { collision_loss({{0, 3, n}}, h, obj, 0.1); }) == ErrorCode::StaleIndices);
    CHECK(code_of([&] { collision_loss({{2, 0, n}}, h, obj, 0.1); }) == ErrorCode::StaleIndices);
  }
}

TEST_CASE("collision loss is -margin times the pair count when everything is outside") {
  oracle::Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double margin = oracle::uniform(rng, 0.0, 0.05);
    const int p = 40;
    const Eigen::Matrix3Xd human = random_points(rng, p, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
    const Eigen::Matrix3Xd hn = random_unit_columns(rng, p);
    // Each object point sits at least `margin` outside its source human point.
    Eigen::Matrix3Xd object(3, p);
    for (int i = 0; i < p; ++i) object.col(i) = human.col(i) + oracle::uniform(rng, margin, margin + 0.01) * hn.col(i);
    const SceneObject obj("o", object, random_unit_columns(rng, p));
    CollisionPairs pairs;
    for (int i = 0; i < p; ++i) pairs.push_back({i, i, hn.col(i)});
    const CollisionLoss l = collision_loss(pairs, human, obj, margin);
    CHECK(l.loss == -margin * p);
  }
}

TEST_CASE("collision loss gradient matches central differences away from the kink") {
  oracle::Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 30;
    const Eigen::Matrix3Xd human = random_points(rng, p, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
    const Eigen::Matrix3Xd hn = random_unit_columns(rng, p);
    const SceneObject obj("o", random_points(rng, 25, Eigen::Vector3d::Constant(0.2), Eigen::Vector3d::Constant(0.9)),
                          random_unit_columns(rng, 25));
    const CollisionPairs pairs = detect_collisions(human, hn, obj);
    const double margin = 0.02;
    bool near_kink = false;
    for (const CollisionPair& q : pairs) {
      const double depth = q.human_normal.dot(human.col(q.human_index) - obj.points().col(q.object_index));
      near_kink = near_kink || std::abs(depth + margin) < 1e-4;
    }
    if (near_kink) continue;
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(human.data(), human.size());
    const auto f = [&](const Eigen::VectorXd& v) {
      return collision_loss(pairs, Eigen::Map<const Eigen::Matrix3Xd>(v.data(), 3, p), obj, margin).loss;
    };
    const Eigen::Matrix3Xd g = collision_loss(pairs, human, obj, margin).grad_points;
    CHECK(oracle::max_rel_error(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), oracle::numeric_gradient(f, x, 1e-5),
                                1e-3) < 1e-4);
  }
}

}  // TEST_SUITE
