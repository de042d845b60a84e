#pragma once

// Per-item kernels shared by the OpenMP drivers and the serial reference
// drivers. Both call exactly these functions, so results are bit-identical.

#include "msdi/motion_model.hpp"

#include <limits>

namespace msdi::detail {

inline Eigen::Vector3d skin_vertex(const BodyModel& body, const std::vector<Transform34>& transforms, int v) {
  const auto& weights = body.weights();
  Transform34 blended = Transform34::Zero();
  for (int k = 0; k < body.num_joints(); ++k) {
    const double w = weights(v, k);
    if (w != 0.0) blended.noalias() += w * transforms[k];
  }
  return blended.leftCols<3>() * body.template_points().col(v) + blended.col(3);
}

struct BoundPoint {
  int face = -1;
  Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
  double offset = 0.0;
};

inline BoundPoint bind_point(const Eigen::Vector3d& p, const Eigen::Matrix3Xd& vertices,
                             const Eigen::Matrix3Xi& faces) {
  BoundPoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int f = 0; f < faces.cols(); ++f) {
    const Eigen::Vector3d a = vertices.col(faces(0, f));
    const Eigen::Vector3d b = vertices.col(faces(1, f));
    const Eigen::Vector3d c = vertices.col(faces(2, f));
    const Eigen::Vector3d bary = closest_point_barycentric(p, a, b, c);
    const Eigen::Vector3d q = bary.x() * a + bary.y() * b + bary.z() * c;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.face = f;
      best.barycentric = bary;
      best.offset = (p - q).dot(face_normal(a, b, c));
    }
  }
  return best;
}

inline void deform_point(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed,
                         const Eigen::Matrix3Xi& faces, int m, Eigen::Vector3d& point, Eigen::Vector3d& normal) {
  const int f = binding.face[m];
  const Eigen::Vector3d a = posed.col(faces(0, f));
  const Eigen::Vector3d b = posed.col(faces(1, f));
  const Eigen::Vector3d c = posed.col(faces(2, f));
  const Eigen::Vector3d& w = binding.barycentric.col(m);
  normal = face_normal(a, b, c);
  point = w.x() * a + w.y() * b + w.z() * c + binding.normal_offset[m] * normal;
}

}  // namespace msdi::detail
