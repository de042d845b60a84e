#pragma once

#include "msdi/common.hpp"
#include "msdi/motion_model.hpp"

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

namespace msdi {

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d max = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  static Aabb of(const Eigen::Matrix3Xd& points);
  bool empty() const { return (min.array() > max.array()).any(); }
  /// Closed-box containment.
  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb intersect(const Aabb& other) const;
  Aabb inflated(double margin) const;
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
};

/// Static object as an oriented point cloud. The bounding box and the median
/// nearest-neighbour spacing are derived on construction.
class SceneObject {
 public:
  SceneObject() = default;
  /// Throws InvalidArgument unless shapes agree, values are finite and every
  /// normal has unit length within 1e-6.
  SceneObject(std::string name, Eigen::Matrix3Xd points, Eigen::Matrix3Xd normals);

  const std::string& name() const { return name_; }
  const Eigen::Matrix3Xd& points() const { return points_; }
  const Eigen::Matrix3Xd& normals() const { return normals_; }
  const Aabb& aabb() const { return aabb_; }
  double point_spacing() const { return spacing_; }
  int size() const { return static_cast<int>(points_.cols()); }

 private:
  std::string name_;
  Eigen::Matrix3Xd points_;
  Eigen::Matrix3Xd normals_;
  Aabb aabb_;
  double spacing_ = 0.0;
};

/// Oriented points on the surface of `box`: cell centers of a grid with
/// roughly `spacing` meters between points on each face, normals outward.
SceneObject make_box_object(const std::string& name, const Aabb& box, double spacing);

struct LossWeights {
  double msds = 1.0;
  double traj = 1.0;
  double smooth = 0.01;
  double collision = 10.0;
  double middle = 0.1;
  double end = 1.0;
  /// Collision margin epsilon_c in meters.
  double margin = 0.01;
  /// Report clamped collision pairs as 0 instead of -margin (gradient unchanged).
  bool drop_clamped = false;

  void validate() const;
};

/// Loss value and its gradient with respect to the per-frame root
/// translations (3 x N, one column per frame).
struct TranslationLoss {
  double loss = 0.0;
  Eigen::Matrix3Xd grad;
};

Eigen::Matrix3Xd translations(const MotionSequence& motion);

/// lambda_middle * sum over interior frames + lambda_end * sum over the first
/// and last frame of |r_i - r_plan_i|^2.
TranslationLoss trajectory_loss(const Eigen::Matrix3Xd& root, const Eigen::Matrix3Xd& plan, double lambda_middle,
                                double lambda_end);
TranslationLoss trajectory_loss(const MotionSequence& motion, const Eigen::Matrix3Xd& plan, double lambda_middle,
                                double lambda_end);

/// Sum of squared third finite differences of the root translation.
TranslationLoss smoothness_loss(const Eigen::Matrix3Xd& root);
TranslationLoss smoothness_loss(const MotionSequence& motion);

struct CollisionPair {
  int object_index = -1;
  int human_index = -1;
  Eigen::Vector3d human_normal = Eigen::Vector3d::Zero();

  bool operator==(const CollisionPair&) const = default;
};

using CollisionPairs = std::vector<CollisionPair>;

/// Two-stage detection: intersect the bounding boxes, then pair each object
/// point inside the intersection with its nearest human point inside it
/// (uniform grid, ties to the lowest human index). Pairs are ordered by
/// object index.
CollisionPairs detect_collisions(const Eigen::Matrix3Xd& human_points, const Eigen::Matrix3Xd& human_normals,
                                 const SceneObject& object);

struct CollisionLoss {
  double loss = 0.0;
  Eigen::Matrix3Xd grad_points;   // w.r.t. human points
  Eigen::Matrix3Xd grad_normals;  // w.r.t. the normals stored in the pairs, per human point
  int active = 0;                 // pairs on the unclamped branch
};

/// Sum over pairs of max(n . (h - o), -margin).
CollisionLoss collision_loss(const CollisionPairs& pairs, const Eigen::Matrix3Xd& human_points,
                             const SceneObject& object, double margin, bool drop_clamped = false);

}  // namespace msdi
