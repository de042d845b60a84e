#include "oracles.hpp"

#include "msdi/metrics.hpp"

#include <doctest.h>

#include <numbers>

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

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double a = w.norm();
  if (a == 0.0) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = w / a;
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(a) * K + (1 - std::cos(a)) * K * K;
}

MotionSequence motion_from_axis_angles(const std::vector<Eigen::VectorXd>& phis, int joints) {
  MotionSequence m = MotionSequence::rest(static_cast<int>(phis.size()), joints, 30.0);
  for (std::size_t i = 0; i < phis.size(); ++i) {
    for (int j = 0; j < joints; ++j) {
      m.frames[i].pose.row(j) = oracle::rot6d_of(rodrigues(phis[i].segment<3>(3 * j))).transpose();
    }
  }
  return m;
}

double kl_oracle(const Eigen::VectorXd& phi, const PoseEncoder& e) {
  double s = 0.0;
  for (int l = 0; l < e.latent_dim(); ++l) {
    const double mu = e.A.row(l).dot(phi) + e.b[l];
    const double log_sigma = e.C.row(l).dot(phi) + e.d[l];
    s += mu * mu + std::exp(2 * log_sigma) - 1 - 2 * log_sigma;
  }
  return 0.5 * s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("axis_angle_pose inverts the rotation") {
  oracle::Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Eigen::VectorXd> phis{Eigen::VectorXd(9)};
    for (int j = 0; j < 3; ++j) phis[0].segment<3>(3 * j) = oracle::unit3(rng) * oracle::uniform(rng, 0.01, 3.0);
    const MotionSequence m = motion_from_axis_angles(phis, 3);
    CHECK((axis_angle_pose(m.frames[0]) - phis[0]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("pose_plausibility examples") {
  const int joints = 4;
  const PoseEncoder enc = PoseEncoder::identity(3 * joints);
  const MotionSequence rest = MotionSequence::rest(5, joints, 30.0);
  CHECK(pose_plausibility(rest, enc) == 0.0);

  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3 * joints);
  e1[0] = 1.0;
  MotionSequence one = motion_from_axis_angles({e1, e1}, joints);
  one.frames.resize(1);
  CHECK(std::abs(pose_plausibility(one, enc) - 0.5) <= 1e-9);

  CHECK(code_of([&] { pose_plausibility(rest, PoseEncoder::identity(3 * joints + 3)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("pose_plausibility matches an independent KL and is nonnegative") {
  oracle::Rng rng(2);
  const int joints = 3, k = 9, latent = 5;
  PoseEncoder enc;
  enc.A = Eigen::MatrixXd(latent, k);
  enc.C = Eigen::MatrixXd(latent, k);
  enc.b = Eigen::VectorXd(latent);
  enc.d = Eigen::VectorXd(latent);
  for (Eigen::Index i = 0; i < enc.A.size(); ++i) enc.A(i) = oracle::uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < enc.C.size(); ++i) enc.C(i) = oracle::uniform(rng, -0.3, 0.3);
  for (int l = 0; l < latent; ++l) {
    enc.b[l] = oracle::uniform(rng, -1, 1);
    enc.d[l] = oracle::uniform(rng, -0.5, 0.5);
  }
  std::vector<Eigen::VectorXd> phis;
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd phi(k);
    for (int j = 0; j < joints; ++j) phi.segment<3>(3 * j) = oracle::unit3(rng) * oracle::uniform(rng, 0.01, 3.0);
    phis.push_back(phi);
  }
  const MotionSequence m = motion_from_axis_angles(phis, joints);
  double mean = 0.0;
  for (const Eigen::VectorXd& phi : phis) {
    const double kl = kl_oracle(phi, enc);
    CHECK(kl >= 0.0);
    mean += kl / 1000.0;
  }
  const double got = pose_plausibility(m, enc);
  CHECK(std::abs(got - mean) <= 1e-9 * std::max(1.0, mean));
  for (std::size_t i = 0; i < 20; ++i) {
    MotionSequence single = m;
    single.frames = {m.frames[i]};
    CHECK(pose_plausibility(single, enc) >= 0.0);
  }

  PoseEncoder bad = enc;
  bad.d = Eigen::VectorXd(latent + 1);
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::DimensionMismatch);
  bad = enc;
  bad.b[0] = std::nan("");
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("pose_variation examples") {
  const int joints = 3, k = 9;
  oracle::Rng rng(3);
  Eigen::VectorXd phi(k);
  for (int j = 0; j < joints; ++j) phi.segment<3>(3 * j) = oracle::unit3(rng) * 0.7;
  CHECK(pose_variation(motion_from_axis_angles(std::vector<Eigen::VectorXd>(6, phi), joints)) <= 1e-12);

  std::vector<Eigen::VectorXd> alt;
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
    p[4] = i % 2 == 0 ? 1.0 : -1.0;
    alt.push_back(p);
  }
  CHECK(std::abs(pose_variation(motion_from_axis_angles(alt, joints)) - 1.0 / k) <= 1e-12);

  std::vector<Eigen::VectorXd> phis, doubled;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd p(k);
    for (int j = 0; j < joints; ++j) p.segment<3>(3 * j) = oracle::unit3(rng) * oracle::uniform(rng, 0.05, 1.4);
    phis.push_back(p);
    doubled.push_back(2 * p);
  }
  const double v1 = pose_variation(motion_from_axis_angles(phis, joints));
  const double v2 = pose_variation(motion_from_axis_angles(doubled, joints));
  CHECK(std::abs(v2 - 2 * v1) <= 1e-9 * v1);

  // Population convention, computed by hand.
  double expected = 0.0;
  for (int c = 0; c < k; ++c) {
    double mean = 0.0, sq = 0.0;
    for (const auto& p : phis) mean += p[c] / 10.0;
    for (const auto& p : phis) sq += (p[c] - mean) * (p[c] - mean) / 10.0;
    expected += std::sqrt(sq) / k;
  }
  CHECK(std::abs(v1 - expected) <= 1e-9);

  MotionSequence single = MotionSequence::rest(2, joints, 30.0);
  single.frames.resize(1);
  CHECK(code_of([&] { pose_variation(single); }) == ErrorCode::TooFewFrames);
}

TEST_CASE("trajectory_length examples") {
  const BodyModel body = make_desk_body();
  const int joints = body.num_pose_joints();
  MotionSequence m = MotionSequence::rest(10, joints, 30.0);
  CHECK(trajectory_length(m, body) == 0.0);
  for (int i = 0; i < 10; ++i) m.frames[i].translation = Eigen::Vector3d(i, 0, 0);
  CHECK(std::abs(trajectory_length(m, body) - 9.0) <= 1e-12);

  // 360 frames around a closed unit circle (the last frame returns to the first).
  MotionSequence circle = MotionSequence::rest(360, joints, 30.0);
  for (int i = 0; i < 360; ++i) {
    const double a = 2 * std::numbers::pi * i / 359.0;
    circle.frames[i].translation = Eigen::Vector3d(std::cos(a), std::sin(a), 0);
  }
  CHECK(std::abs(trajectory_length(circle, body) - 2 * std::numbers::pi) <= 1e-3 * 2 * std::numbers::pi);
}

TEST_CASE("metrics are invariant under a global rigid rotation") {
  const BodyModel body = make_desk_body();
  oracle::Rng rng(4);
  const MotionSequence m = oracle::random_motion(rng, 12, body.num_pose_joints(), 2.0, 0.4);
  const Eigen::Matrix3d r = rodrigues(oracle::unit3(rng) * 1.1);
  MotionSequence rotated = m;
  for (Frame& f : rotated.frames) {
    f.translation = r * f.translation;
    f.orientation = oracle::rot6d_of(r * rot6d_to_matrix(f.orientation));
  }
  const PoseEncoder enc = PoseEncoder::identity(3 * body.num_pose_joints());
  const MetricReport a = evaluate_metrics(m, body, enc);
  const MetricReport b = evaluate_metrics(rotated, body, enc);
  CHECK(a.pose_plausibility == b.pose_plausibility);
  CHECK(a.pose_variation == b.pose_variation);
  CHECK(std::abs(a.trajectory_length - b.trajectory_length) <= 1e-12 * a.trajectory_length);
  CHECK(std::isfinite(a.pose_plausibility));
  CHECK(std::isfinite(a.pose_variation));
}

}  // TEST_SUITE
