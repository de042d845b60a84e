#pragma once

#include "msdi/motion_model.hpp"

#include <Eigen/Core>

namespace msdi {

/// Linear-Gaussian pose encoder: mu = A phi + b, log sigma = C phi + d.
struct PoseEncoder {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;

  int pose_dim() const { return static_cast<int>(A.cols()); }
  int latent_dim() const { return static_cast<int>(A.rows()); }
  /// Throws DimensionMismatch on inconsistent shapes, InvalidArgument on non-finite values.
  void validate() const;

  static PoseEncoder identity(int pose_dim);
};

/// Axis-angle pose vector of one frame (3 entries per non-root joint).
Eigen::VectorXd axis_angle_pose(const Frame& frame);

/// Mean over frames of KL(N(mu, sigma^2) || N(0, I)).
double pose_plausibility(const MotionSequence& motion, const PoseEncoder& encoder);

/// Mean over pose parameters of their population standard deviation over time.
double pose_variation(const MotionSequence& motion);

/// Summed distance between consecutive root-joint positions.
double trajectory_length(const MotionSequence& motion, const BodyModel& body);

struct MetricReport {
  double pose_plausibility = 0.0;
  double pose_variation = 0.0;
  double trajectory_length = 0.0;
};

MetricReport evaluate_metrics(const MotionSequence& motion, const BodyModel& body, const PoseEncoder& encoder);

}  // namespace msdi
