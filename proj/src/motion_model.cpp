#include "msdi/motion_model.hpp"

#include "kernels.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <sstream>

namespace msdi {

namespace {

constexpr double kMinNorm = 1e-12;

Vector6d pose_row_vector(const PoseMatrix& pose, int row) { return pose.row(row).transpose(); }

}  // namespace

void MotionSequence::validate() const {
  if (frames.size() < 2) fail(ErrorCode::TooFewFrames, "motion needs at least 2 frames");
  if (!(fps > 0.0) || !std::isfinite(fps)) fail(ErrorCode::InvalidArgument, "fps must be positive");
  const auto joints = frames.front().pose.rows();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.pose.rows() != joints) {
      fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(i) + " has a different joint count");
    }
    if (!f.translation.allFinite() || !f.orientation.allFinite() || !f.pose.allFinite()) {
      fail(ErrorCode::InvalidArgument, "frame " + std::to_string(i) + " has non-finite entries");
    }
    rot6d_to_matrix(f.orientation);
    for (int j = 0; j < f.pose.rows(); ++j) rot6d_to_matrix(pose_row_vector(f.pose, j));
  }
}

MotionSequence MotionSequence::rest(int num_frames, int pose_joints, double fps) {
  MotionSequence m;
  m.fps = fps;
  Frame f;
  f.pose.resize(pose_joints, 6);
  for (int j = 0; j < pose_joints; ++j) f.pose.row(j) = rot6d_identity().transpose();
  m.frames.assign(static_cast<std::size_t>(num_frames), f);
  return m;
}

Eigen::VectorXd flatten(const MotionSequence& motion) {
  const int dim = frame_dim(motion.num_pose_joints());
  Eigen::VectorXd flat(motion.flat_dim());
  for (int i = 0; i < motion.num_frames(); ++i) {
    const Frame& f = motion.frames[i];
    auto block = flat.segment(static_cast<Eigen::Index>(i) * dim, dim);
    block.segment<3>(kTranslationOffset) = f.translation;
    block.segment<6>(kOrientationOffset) = f.orientation;
    for (int j = 0; j < f.pose.rows(); ++j) block.segment<6>(kPoseOffset + 6 * j) = f.pose.row(j).transpose();
  }
  return flat;
}

MotionSequence unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, int num_frames, int pose_joints,
                         double fps) {
  const int dim = frame_dim(pose_joints);
  if (flat.size() != static_cast<Eigen::Index>(num_frames) * dim) {
    fail(ErrorCode::ShapeMismatch, "flattened motion has " + std::to_string(flat.size()) + " entries, expected " +
                                       std::to_string(num_frames * dim));
  }
  MotionSequence m;
  m.fps = fps;
  m.frames.resize(static_cast<std::size_t>(num_frames));
  for (int i = 0; i < num_frames; ++i) {
    Frame& f = m.frames[i];
    const auto block = flat.segment(static_cast<Eigen::Index>(i) * dim, dim);
    f.translation = block.segment<3>(kTranslationOffset);
    f.orientation = block.segment<6>(kOrientationOffset);
    f.pose.resize(pose_joints, 6);
    for (int j = 0; j < pose_joints; ++j) f.pose.row(j) = block.segment<6>(kPoseOffset + 6 * j).transpose();
  }
  return m;
}

Vector6d rot6d_identity() { return (Vector6d() << 1, 0, 0, 0, 1, 0).finished(); }

Eigen::Matrix3d rot6d_to_matrix(const Vector6d& v) {
  const Eigen::Vector3d a1 = v.head<3>();
  const Eigen::Vector3d a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 >= kMinNorm)) fail(ErrorCode::DegenerateRotation, "first rot6d column has norm below 1e-12");
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u = a2 - b1.dot(a2) * b1;
  const double n2 = u.norm();
  if (!(n2 >= kMinNorm)) fail(ErrorCode::DegenerateRotation, "rot6d columns are parallel");
  const Eigen::Vector3d b2 = u / n2;
  Eigen::Matrix3d r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

Vector6d matrix_to_rot6d(const Eigen::Matrix3d& rotation) {
  Vector6d v;
  v.head<3>() = rotation.col(0);
  v.tail<3>() = rotation.col(1);
  return v;
}

Vector6d rot6d_to_matrix_vjp(const Vector6d& v, const Eigen::Matrix3d& grad_rotation) {
  const Eigen::Vector3d a1 = v.head<3>();
  const Eigen::Vector3d a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 >= kMinNorm)) fail(ErrorCode::DegenerateRotation, "first rot6d column has norm below 1e-12");
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u = a2 - b1.dot(a2) * b1;
  const double n2 = u.norm();
  if (!(n2 >= kMinNorm)) fail(ErrorCode::DegenerateRotation, "rot6d columns are parallel");
  const Eigen::Vector3d b2 = u / n2;

  Eigen::Vector3d g_b1 = grad_rotation.col(0);
  Eigen::Vector3d g_b2 = grad_rotation.col(1);
  const Eigen::Vector3d g_b3 = grad_rotation.col(2);
  // b3 = b1 x b2
  g_b1 += b2.cross(g_b3);
  g_b2 += g_b3.cross(b1);
  // b2 = u / |u|
  const Eigen::Vector3d g_u = (g_b2 - b2 * b2.dot(g_b2)) / n2;
  // u = a2 - (b1 . a2) b1
  const Eigen::Vector3d g_a2 = g_u - b1 * b1.dot(g_u);
  g_b1 += -b1.dot(a2) * g_u - b1.dot(g_u) * a2;
  // b1 = a1 / |a1|
  const Eigen::Vector3d g_a1 = (g_b1 - b1 * b1.dot(g_b1)) / n1;

  Vector6d g;
  g.head<3>() = g_a1;
  g.tail<3>() = g_a2;
  return g;
}

BodyModel::BodyModel(Eigen::Matrix3Xd template_points, Eigen::Matrix3Xi faces, Eigen::Matrix3Xd rest_joints,
                     std::vector<int> parent, Eigen::MatrixXd weights)
    : template_points_(std::move(template_points)),
      faces_(std::move(faces)),
      rest_joints_(std::move(rest_joints)),
      parent_(std::move(parent)),
      weights_(std::move(weights)) {
  const int V = num_vertices();
  const int K = num_joints();
  if (V == 0) fail(ErrorCode::InvalidBody, "body has no template points");
  if (K == 0) fail(ErrorCode::InvalidBody, "body has no joints");
  if (static_cast<int>(parent_.size()) != K) fail(ErrorCode::InvalidBody, "parent array length differs from joint count");
  if (weights_.rows() != V || weights_.cols() != K) {
    std::ostringstream os;
    os << "weights are " << weights_.rows() << "x" << weights_.cols() << ", expected " << V << "x" << K;
    fail(ErrorCode::InvalidBody, os.str());
  }
  if (!template_points_.allFinite() || !rest_joints_.allFinite() || !weights_.allFinite()) {
    fail(ErrorCode::InvalidBody, "body contains non-finite values");
  }
  for (int v = 0; v < V; ++v) {
    if ((weights_.row(v).array() < 0.0).any()) {
      fail(ErrorCode::InvalidBody, "negative skinning weight at vertex " + std::to_string(v));
    }
    if (std::abs(weights_.row(v).sum() - 1.0) > 1e-6) {
      fail(ErrorCode::InvalidBody, "skinning weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
  }
  for (int f = 0; f < num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int idx = faces_(c, f);
      if (idx < 0 || idx >= V) fail(ErrorCode::InvalidBody, "face " + std::to_string(f) + " indexes a missing vertex");
    }
    if (faces_(0, f) == faces_(1, f) || faces_(1, f) == faces_(2, f) || faces_(0, f) == faces_(2, f)) {
      fail(ErrorCode::InvalidBody, "face " + std::to_string(f) + " repeats a vertex");
    }
  }

  // Single rooted tree: exactly one root, and every joint reaches it.
  std::vector<std::vector<int>> children(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const int p = parent_[k];
    if (p < 0) {
      if (root_ >= 0) fail(ErrorCode::InvalidBody, "joint tree has more than one root");
      root_ = k;
    } else if (p >= K || p == k) {
      fail(ErrorCode::InvalidBody, "joint " + std::to_string(k) + " has an invalid parent");
    } else {
      children[p].push_back(k);
    }
  }
  if (root_ < 0) fail(ErrorCode::InvalidBody, "joint tree has no root");
  order_.reserve(static_cast<std::size_t>(K));
  order_.push_back(root_);
  for (std::size_t i = 0; i < order_.size(); ++i) {
    for (int c : children[order_[i]]) order_.push_back(c);
  }
  if (static_cast<int>(order_.size()) != K) fail(ErrorCode::InvalidBody, "joint tree contains a cycle");

  pose_row_.assign(static_cast<std::size_t>(K), -1);
  int row = 0;
  for (int k = 0; k < K; ++k) {
    if (k != root_) pose_row_[k] = row++;
  }
}

SkeletonPose forward_kinematics(const BodyModel& body, const Frame& frame) {
  const int K = body.num_joints();
  if (frame.pose.rows() != body.num_pose_joints()) {
    fail(ErrorCode::ShapeMismatch, "frame has " + std::to_string(frame.pose.rows()) + " pose joints, body expects " +
                                       std::to_string(body.num_pose_joints()));
  }
  const auto& rest = body.rest_joints();
  SkeletonPose pose;
  pose.local_rotations.resize(K);
  pose.world_rotations.resize(K);
  pose.joint_positions.resize(3, K);
  pose.skinning.resize(K);
  for (int k : body.topological_order()) {
    const int p = body.parent()[k];
    if (p < 0) {
      pose.local_rotations[k] = rot6d_to_matrix(frame.orientation);
      pose.world_rotations[k] = pose.local_rotations[k];
      pose.joint_positions.col(k) = rest.col(k) + frame.translation;
    } else {
      pose.local_rotations[k] = rot6d_to_matrix(pose_row_vector(frame.pose, body.pose_row(k)));
      pose.world_rotations[k] = pose.world_rotations[p] * pose.local_rotations[k];
      pose.joint_positions.col(k) =
          pose.world_rotations[p] * (rest.col(k) - rest.col(p)) + pose.joint_positions.col(p);
    }
    pose.skinning[k].leftCols<3>() = pose.world_rotations[k];
    pose.skinning[k].col(3) = pose.joint_positions.col(k) - pose.world_rotations[k] * rest.col(k);
  }
  return pose;
}

Eigen::VectorXd forward_kinematics_vjp(const BodyModel& body, const SkeletonPose& pose, const Frame& frame,
                                       const std::vector<Transform34>& grad_skinning) {
  const int K = body.num_joints();
  const auto& rest = body.rest_joints();
  std::vector<Eigen::Matrix3d> g_world(static_cast<std::size_t>(K));
  Eigen::Matrix3Xd g_pos(3, K);
  for (int k = 0; k < K; ++k) {
    const Eigen::Vector3d g_t = grad_skinning[k].col(3);
    // t_k = p_k - Rw_k j_k
    g_world[k] = grad_skinning[k].leftCols<3>() - g_t * rest.col(k).transpose();
    g_pos.col(k) = g_t;
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(frame_dim(body.num_pose_joints()));
  const auto& order = body.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int k = *it;
    const int p = body.parent()[k];
    if (p < 0) {
      grad.segment<3>(kTranslationOffset) += g_pos.col(k);
      grad.segment<6>(kOrientationOffset) += rot6d_to_matrix_vjp(frame.orientation, g_world[k]);
      continue;
    }
    const Eigen::Matrix3d& parent_world = pose.world_rotations[p];
    const Eigen::Matrix3d g_local = parent_world.transpose() * g_world[k];
    g_world[p] += g_world[k] * pose.local_rotations[k].transpose() +
                  g_pos.col(k) * (rest.col(k) - rest.col(p)).transpose();
    g_pos.col(p) += g_pos.col(k);
    const int row = body.pose_row(k);
    grad.segment<6>(kPoseOffset + 6 * row) += rot6d_to_matrix_vjp(pose_row_vector(frame.pose, row), g_local);
  }
  return grad;
}

Eigen::Matrix3Xd lbs_skin(const BodyModel& body, const std::vector<Transform34>& transforms) {
  if (static_cast<int>(transforms.size()) != body.num_joints()) {
    fail(ErrorCode::ShapeMismatch, "expected one transform per joint");
  }
  const int V = body.num_vertices();
  Eigen::Matrix3Xd out(3, V);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < V; ++v) out.col(v) = detail::skin_vertex(body, transforms, v);
  return out;
}

std::vector<Transform34> lbs_skin_vjp(const BodyModel& body, const Eigen::Matrix3Xd& grad_points) {
  if (grad_points.cols() != body.num_vertices()) fail(ErrorCode::ShapeMismatch, "gradient has wrong vertex count");
  const int V = body.num_vertices();
  Eigen::Matrix4Xd homogeneous(4, V);
  homogeneous.topRows<3>() = body.template_points();
  homogeneous.row(3).setOnes();
  std::vector<Transform34> grads(static_cast<std::size_t>(body.num_joints()));
  for (int k = 0; k < body.num_joints(); ++k) {
    const Eigen::Matrix3Xd weighted = grad_points * body.weights().col(k).asDiagonal();
    grads[k] = weighted * homogeneous.transpose();
  }
  return grads;
}

Eigen::Vector3d face_normal(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return (b - a).cross(c - a).normalized();
}

// Closest point on a triangle by Voronoi-region classification.
Eigen::Vector3d closest_point_barycentric(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {1.0 - v, v, 0.0};
  }

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {1.0 - w, 0.0, w};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0.0, 1.0 - w, w};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return {1.0 - v - w, v, w};
}

BarycentricBinding bind_points(const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& vertices,
                               const Eigen::Matrix3Xi& faces) {
  if (faces.cols() == 0) fail(ErrorCode::EmptyMesh, "cannot bind points to a mesh without faces");
  const int M = static_cast<int>(points.cols());
  BarycentricBinding binding;
  binding.face.resize(static_cast<std::size_t>(M));
  binding.barycentric.resize(3, M);
  binding.normal_offset.resize(M);
  binding.mesh_vertices = static_cast<int>(vertices.cols());
  binding.mesh_faces = static_cast<int>(faces.cols());
#pragma omp parallel for schedule(dynamic, 16)
  for (int m = 0; m < M; ++m) {
    const detail::BoundPoint b = detail::bind_point(points.col(m), vertices, faces);
    binding.face[m] = b.face;
    binding.barycentric.col(m) = b.barycentric;
    binding.normal_offset[m] = b.offset;
  }
  return binding;
}

BarycentricBinding bind_points(const Eigen::Matrix3Xd& points, const BodyModel& body) {
  return bind_points(points, body.template_points(), body.faces());
}

namespace {

void check_topology(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed, const Eigen::Matrix3Xi& faces) {
  if (posed.cols() != binding.mesh_vertices || faces.cols() != binding.mesh_faces) {
    fail(ErrorCode::TopologyMismatch, "binding was made against a mesh with " + std::to_string(binding.mesh_vertices) +
                                          " vertices and " + std::to_string(binding.mesh_faces) + " faces");
  }
}

}  // namespace

DeformedPoints deform_points_with_normals(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                                          const Eigen::Matrix3Xi& faces) {
  check_topology(binding, posed_vertices, faces);
  const int M = binding.size();
  DeformedPoints out;
  out.points.resize(3, M);
  out.normals.resize(3, M);
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    Eigen::Vector3d p, n;
    detail::deform_point(binding, posed_vertices, faces, m, p, n);
    out.points.col(m) = p;
    out.normals.col(m) = n;
  }
  return out;
}

Eigen::Matrix3Xd deform_points(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                               const Eigen::Matrix3Xi& faces) {
  return deform_points_with_normals(binding, posed_vertices, faces).points;
}

Eigen::Matrix3Xd deform_points_vjp(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                                   const Eigen::Matrix3Xi& faces, const Eigen::Matrix3Xd& grad_points,
                                   const Eigen::Matrix3Xd& grad_normals) {
  check_topology(binding, posed_vertices, faces);
  const int M = binding.size();
  if (grad_points.cols() != M) fail(ErrorCode::ShapeMismatch, "point gradient has wrong size");
  const bool has_normal_grad = grad_normals.cols() != 0;
  if (has_normal_grad && grad_normals.cols() != M) fail(ErrorCode::ShapeMismatch, "normal gradient has wrong size");

  // Scatter into shared vertices; kept serial so accumulation order is fixed.
  Eigen::Matrix3Xd grad = Eigen::Matrix3Xd::Zero(3, posed_vertices.cols());
  for (int m = 0; m < M; ++m) {
    const int f = binding.face[m];
    const int ia = faces(0, f), ib = faces(1, f), ic = faces(2, f);
    const Eigen::Vector3d a = posed_vertices.col(ia);
    const Eigen::Vector3d e1 = posed_vertices.col(ib) - a;
    const Eigen::Vector3d e2 = posed_vertices.col(ic) - a;
    const Eigen::Vector3d cross = e1.cross(e2);
    const double len = cross.norm();
    const Eigen::Vector3d n = cross / len;

    const Eigen::Vector3d g_p = grad_points.col(m);
    const Eigen::Vector3d& w = binding.barycentric.col(m);
    grad.col(ia) += w.x() * g_p;
    grad.col(ib) += w.y() * g_p;
    grad.col(ic) += w.z() * g_p;

    Eigen::Vector3d g_n = binding.normal_offset[m] * g_p;
    if (has_normal_grad) g_n += grad_normals.col(m);
    if (g_n.isZero(0.0)) continue;
    // n = c / |c|, c = e1 x e2
    const Eigen::Vector3d g_c = (g_n - n * n.dot(g_n)) / len;
    const Eigen::Vector3d g_e1 = e2.cross(g_c);
    const Eigen::Vector3d g_e2 = g_c.cross(e1);
    grad.col(ib) += g_e1;
    grad.col(ic) += g_e2;
    grad.col(ia) -= g_e1 + g_e2;
  }
  return grad;
}

Eigen::Matrix3Xd face_centroids(const BodyModel& body) {
  const auto& v = body.template_points();
  const auto& f = body.faces();
  Eigen::Matrix3Xd c(3, f.cols());
  for (int i = 0; i < f.cols(); ++i) c.col(i) = (v.col(f(0, i)) + v.col(f(1, i)) + v.col(f(2, i))) / 3.0;
  return c;
}

}  // namespace msdi
