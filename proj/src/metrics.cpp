#include "msdi/metrics.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace msdi {

void PoseEncoder::validate() const {
  if (b.size() != A.rows() || C.rows() != A.rows() || C.cols() != A.cols() || d.size() != A.rows()) {
    fail(ErrorCode::DimensionMismatch, "encoder maps have inconsistent shapes");
  }
  if (!A.allFinite() || !b.allFinite() || !C.allFinite() || !d.allFinite()) {
    fail(ErrorCode::InvalidArgument, "encoder has non-finite values");
  }
}

PoseEncoder PoseEncoder::identity(int pose_dim) {
  PoseEncoder e;
  e.A = Eigen::MatrixXd::Identity(pose_dim, pose_dim);
  e.b = Eigen::VectorXd::Zero(pose_dim);
  e.C = Eigen::MatrixXd::Zero(pose_dim, pose_dim);
  e.d = Eigen::VectorXd::Zero(pose_dim);
  return e;
}

Eigen::VectorXd axis_angle_pose(const Frame& frame) {
  const int joints = static_cast<int>(frame.pose.rows());
  Eigen::VectorXd phi(3 * joints);
  for (int j = 0; j < joints; ++j) {
    const Eigen::AngleAxisd aa(rot6d_to_matrix(frame.pose.row(j).transpose()));
    phi.segment<3>(3 * j) = aa.angle() * aa.axis();
  }
  return phi;
}

double pose_plausibility(const MotionSequence& motion, const PoseEncoder& encoder) {
  encoder.validate();
  if (motion.frames.empty()) fail(ErrorCode::TooFewFrames, "motion has no frames");
  if (encoder.pose_dim() != 3 * motion.num_pose_joints()) {
    fail(ErrorCode::DimensionMismatch, "encoder expects " + std::to_string(encoder.pose_dim()) +
                                           " pose parameters, motion has " + std::to_string(3 * motion.num_pose_joints()));
  }
  std::vector<double> kl(motion.frames.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < motion.num_frames(); ++i) {
    const Eigen::VectorXd phi = axis_angle_pose(motion.frames[i]);
    const Eigen::VectorXd mu = encoder.A * phi + encoder.b;
    const Eigen::VectorXd log_sigma = encoder.C * phi + encoder.d;
    const Eigen::ArrayXd sigma2 = (2.0 * log_sigma.array()).exp();
    kl[i] = 0.5 * (mu.array().square() + sigma2 - 1.0 - 2.0 * log_sigma.array()).sum();
  }
  return pairwise_sum(kl) / static_cast<double>(kl.size());
}

double pose_variation(const MotionSequence& motion) {
  const int n = motion.num_frames();
  if (n < 2) fail(ErrorCode::TooFewFrames, "pose variation needs at least 2 frames");
  const int k = 3 * motion.num_pose_joints();
  if (k == 0) return 0.0;
  Eigen::MatrixXd phi(k, n);
  for (int i = 0; i < n; ++i) phi.col(i) = axis_angle_pose(motion.frames[i]);
  const Eigen::VectorXd mean = phi.rowwise().mean();
  const Eigen::VectorXd var = (phi.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(n);
  return var.array().sqrt().mean();
}

double trajectory_length(const MotionSequence& motion, const BodyModel& body) {
  if (motion.num_frames() < 2) fail(ErrorCode::TooFewFrames, "trajectory length needs at least 2 frames");
  const int root = body.root();
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(motion.frames.size());
  for (const Frame& f : motion.frames) positions.push_back(forward_kinematics(body, f).joint_positions.col(root));
  std::vector<double> steps(positions.size() - 1);
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) steps[i] = (positions[i + 1] - positions[i]).norm();
  return pairwise_sum(steps);
}

MetricReport evaluate_metrics(const MotionSequence& motion, const BodyModel& body, const PoseEncoder& encoder) {
  return {pose_plausibility(motion, encoder), pose_variation(motion), trajectory_length(motion, body)};
}

}  // namespace msdi
