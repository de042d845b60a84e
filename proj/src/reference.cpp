#include "msdi/reference.hpp"

#include "kernels.hpp"
#include "splat.hpp"

namespace msdi::reference {

Eigen::Matrix3Xd lbs_skin(const BodyModel& body, const std::vector<Transform34>& transforms) {
  if (static_cast<int>(transforms.size()) != body.num_joints()) {
    fail(ErrorCode::ShapeMismatch, "expected one transform per joint");
  }
  Eigen::Matrix3Xd out(3, body.num_vertices());
  for (int v = 0; v < body.num_vertices(); ++v) out.col(v) = detail::skin_vertex(body, transforms, v);
  return out;
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
  for (int m = 0; m < M; ++m) {
    const detail::BoundPoint b = detail::bind_point(points.col(m), vertices, faces);
    binding.face[m] = b.face;
    binding.barycentric.col(m) = b.barycentric;
    binding.normal_offset[m] = b.offset;
  }
  return binding;
}

DeformedPoints deform_points_with_normals(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                                          const Eigen::Matrix3Xi& faces) {
  if (posed_vertices.cols() != binding.mesh_vertices || faces.cols() != binding.mesh_faces) {
    fail(ErrorCode::TopologyMismatch, "binding was made against a different mesh");
  }
  DeformedPoints out;
  out.points.resize(3, binding.size());
  out.normals.resize(3, binding.size());
  for (int m = 0; m < binding.size(); ++m) {
    Eigen::Vector3d p, n;
    detail::deform_point(binding, posed_vertices, faces, m, p, n);
    out.points.col(m) = p;
    out.normals.col(m) = n;
  }
  return out;
}

Image render_frame(const GaussianCloud& cloud, const Camera& camera) {
  cloud.validate();
  camera.validate();
  Image img;
  img.width = camera.width;
  img.height = camera.height;
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  img.rgb.assign(3 * pixels, 0.0);
  img.alpha.assign(pixels, 0.0);
  std::vector<double> transmittance(pixels, 1.0);
  for (const detail::ProjectedSplat& s : detail::project_cloud(cloud, camera)) {
    for (int y = s.y0; y <= s.y1; ++y) {
      for (int x = s.x0; x <= s.x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
        const double a = detail::splat_alpha(s, x, y);
        if (a > 0.0) detail::composite(s, a, &img.rgb[3 * p], transmittance[p]);
      }
    }
  }
  for (std::size_t p = 0; p < pixels; ++p) detail::finish_pixel(camera, transmittance[p], &img.rgb[3 * p], img.alpha[p]);
  return img;
}

}  // namespace msdi::reference
