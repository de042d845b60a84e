#pragma once

#include "msdi/common.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace msdi {

using PoseMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;

/// One frame of motion: root translation (meters), root orientation as rot6d,
/// and one rot6d row per non-root joint.
struct Frame {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Vector6d orientation = (Vector6d() << 1, 0, 0, 0, 1, 0).finished();
  PoseMatrix pose;
};

/// Flattened per-frame layout: [translation(3), orientation(6), pose rows (6 each)].
inline constexpr int kTranslationOffset = 0;
inline constexpr int kOrientationOffset = 3;
inline constexpr int kPoseOffset = 9;

constexpr int frame_dim(int pose_joints) { return 9 + 6 * pose_joints; }

struct MotionSequence {
  std::vector<Frame> frames;
  double fps = 30.0;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int num_pose_joints() const { return frames.empty() ? 0 : static_cast<int>(frames.front().pose.rows()); }
  int flat_dim() const { return num_frames() * frame_dim(num_pose_joints()); }

  /// Throws InvalidArgument unless N >= 2, fps > 0, shapes agree and all
  /// entries are finite with non-degenerate rot6d blocks.
  void validate() const;

  /// N frames at the rest pose with zero translation.
  static MotionSequence rest(int num_frames, int pose_joints, double fps);
};

Eigen::VectorXd flatten(const MotionSequence& motion);
MotionSequence unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, int num_frames, int pose_joints,
                         double fps);

Vector6d rot6d_identity();

/// Gram-Schmidt on the two 3-vectors packed in `v`; the third column is their
/// cross product. Throws DegenerateRotation when a norm falls below 1e-12.
Eigen::Matrix3d rot6d_to_matrix(const Vector6d& v);

/// Packs the first two columns of `rotation`.
Vector6d matrix_to_rot6d(const Eigen::Matrix3d& rotation);

/// Vector-Jacobian product of rot6d_to_matrix: d<grad_rotation, R(v)>/dv.
Vector6d rot6d_to_matrix_vjp(const Vector6d& v, const Eigen::Matrix3d& grad_rotation);

/// Skinned body: template surface, joint tree and skinning weights.
/// Points are stored one per column.
class BodyModel {
 public:
  BodyModel() = default;
  /// Validates every invariant and throws InvalidBody on violation.
  BodyModel(Eigen::Matrix3Xd template_points, Eigen::Matrix3Xi faces, Eigen::Matrix3Xd rest_joints,
            std::vector<int> parent, Eigen::MatrixXd weights);

  const Eigen::Matrix3Xd& template_points() const { return template_points_; }
  const Eigen::Matrix3Xi& faces() const { return faces_; }
  const Eigen::Matrix3Xd& rest_joints() const { return rest_joints_; }
  const std::vector<int>& parent() const { return parent_; }
  /// V x K, rows sum to one.
  const Eigen::MatrixXd& weights() const { return weights_; }

  int num_vertices() const { return static_cast<int>(template_points_.cols()); }
  int num_faces() const { return static_cast<int>(faces_.cols()); }
  int num_joints() const { return static_cast<int>(rest_joints_.cols()); }
  int num_pose_joints() const { return num_joints() - 1; }
  int root() const { return root_; }

  /// Joints ordered so every parent precedes its children.
  const std::vector<int>& topological_order() const { return order_; }
  /// Row of Frame::pose driving joint k, or -1 for the root.
  int pose_row(int joint) const { return pose_row_[joint]; }

 private:
  Eigen::Matrix3Xd template_points_;
  Eigen::Matrix3Xi faces_;
  Eigen::Matrix3Xd rest_joints_;
  std::vector<int> parent_;
  Eigen::MatrixXd weights_;
  int root_ = -1;
  std::vector<int> order_;
  std::vector<int> pose_row_;
};

/// Per-joint kinematic state for one frame. `skinning[k]` maps a canonical
/// point to its posed location under joint k alone.
struct SkeletonPose {
  std::vector<Eigen::Matrix3d> local_rotations;
  std::vector<Eigen::Matrix3d> world_rotations;
  Eigen::Matrix3Xd joint_positions;
  std::vector<Transform34> skinning;
};

/// Root joint: rotation(orientation) about its rest position, then
/// translation. Children: parent transform composed with the local rotation
/// about the rest joint offset.
SkeletonPose forward_kinematics(const BodyModel& body, const Frame& frame);

/// Maps gradients on the skinning transforms back to the frame parameters,
/// laid out as the flattened frame (see frame_dim()).
Eigen::VectorXd forward_kinematics_vjp(const BodyModel& body, const SkeletonPose& pose,
                                       const Frame& frame, const std::vector<Transform34>& grad_skinning);

/// v_o = (sum_k w_k G_k) [v_c; 1]. Parallel over vertices.
Eigen::Matrix3Xd lbs_skin(const BodyModel& body, const std::vector<Transform34>& transforms);

/// Gradient of <grad_points, lbs_skin(...)> with respect to each transform.
std::vector<Transform34> lbs_skin_vjp(const BodyModel& body, const Eigen::Matrix3Xd& grad_points);

/// Points attached to mesh faces: closest face, barycentric coordinates of
/// the closest point, and the signed offset along the face normal.
struct BarycentricBinding {
  std::vector<int> face;
  Eigen::Matrix3Xd barycentric;
  Eigen::VectorXd normal_offset;
  int mesh_vertices = 0;
  int mesh_faces = 0;

  int size() const { return static_cast<int>(face.size()); }
};

/// Ties between equidistant faces go to the lowest face index.
BarycentricBinding bind_points(const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& vertices,
                               const Eigen::Matrix3Xi& faces);
BarycentricBinding bind_points(const Eigen::Matrix3Xd& points, const BodyModel& body);

struct DeformedPoints {
  Eigen::Matrix3Xd points;
  /// Unit normal of the posed face each point is bound to.
  Eigen::Matrix3Xd normals;
};

Eigen::Matrix3Xd deform_points(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                               const Eigen::Matrix3Xi& faces);
DeformedPoints deform_points_with_normals(const BarycentricBinding& binding,
                                          const Eigen::Matrix3Xd& posed_vertices,
                                          const Eigen::Matrix3Xi& faces);

/// Gradient on posed vertices given gradients on the deformed points and,
/// optionally (pass an empty matrix to skip), on their normals.
Eigen::Matrix3Xd deform_points_vjp(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                                   const Eigen::Matrix3Xi& faces, const Eigen::Matrix3Xd& grad_points,
                                   const Eigen::Matrix3Xd& grad_normals);

/// Unit normal of triangle (a, b, c) with right-handed winding.
Eigen::Vector3d face_normal(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Closest point on triangle (a, b, c) to p, as barycentric coordinates.
Eigen::Vector3d closest_point_barycentric(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Synthetic 8-joint capsule rig (pelvis root, spine, neck, head, two arms,
/// two legs), z up, standing on the ground plane.
BodyModel make_desk_body();

/// Face centroids of the body surface, used as the default Gaussian centers.
Eigen::Matrix3Xd face_centroids(const BodyModel& body);

}  // namespace msdi
