#pragma once

// Projected splat and the per-pixel compositing step, shared by the
// row-parallel renderer and the splat-by-splat reference renderer.

#include "msdi/render.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace msdi::detail {

struct ProjectedSplat {
  int index = -1;
  double depth = 0.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();  // pixels
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();  // inverse 2D covariance
  double opacity = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  // Inclusive pixel bounds of the 3-sigma footprint.
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

inline constexpr double kNearPlane = 1e-3;
inline constexpr double kFootprintSigma = 3.0;

/// Splats in front of the camera with a non-empty footprint, nearest first
/// (ties by index).
inline std::vector<ProjectedSplat> project_cloud(const GaussianCloud& cloud, const Camera& camera) {
  const Eigen::Matrix3d world_to_cam = camera.rotation.transpose();
  const double cx = 0.5 * camera.width;
  const double cy = 0.5 * camera.height;
  std::vector<ProjectedSplat> out;
  out.reserve(static_cast<std::size_t>(cloud.size()));
  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d p = world_to_cam * (cloud.centers.col(i) - camera.position);
    if (p.z() <= kNearPlane) continue;
    const double iz = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << camera.focal * iz, 0.0, -camera.focal * p.x() * iz * iz,
           0.0, camera.focal * iz, -camera.focal * p.y() * iz * iz;
    const Eigen::Matrix3d cov = gaussian_covariance(cloud.scales.col(i), cloud.rotations.col(i));
    const Eigen::Matrix<double, 2, 3> jw = jac * world_to_cam;
    const Eigen::Matrix2d cov2 = jw * cov * jw.transpose();
    const double det = cov2.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) continue;

    ProjectedSplat s;
    s.index = i;
    s.depth = p.z();
    s.mean = {camera.focal * p.x() * iz + cx, camera.focal * p.y() * iz + cy};
    s.conic << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;
    s.opacity = cloud.opacities[i];
    s.color = cloud.colors.col(i);
    const double rx = kFootprintSigma * std::sqrt(cov2(0, 0));
    const double ry = kFootprintSigma * std::sqrt(cov2(1, 1));
    // Pixel (x, y) has its center at (x + 0.5, y + 0.5).
    s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean.x() - rx - 0.5)));
    s.x1 = std::min(camera.width - 1, static_cast<int>(std::floor(s.mean.x() + rx - 0.5)));
    s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean.y() - ry - 0.5)));
    s.y1 = std::min(camera.height - 1, static_cast<int>(std::floor(s.mean.y() + ry - 0.5)));
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const ProjectedSplat& a, const ProjectedSplat& b) {
    return a.depth < b.depth;
  });
  return out;
}

/// alpha * G at pixel (x, y), or 0 outside the 3-sigma ellipse.
inline double splat_alpha(const ProjectedSplat& s, int x, int y) {
  const Eigen::Vector2d d(x + 0.5 - s.mean.x(), y + 0.5 - s.mean.y());
  const double q = d.dot(s.conic * d);
  if (q > kFootprintSigma * kFootprintSigma) return 0.0;
  return s.opacity * std::exp(-0.5 * q);
}

/// One front-to-back step: color += T a c, T *= 1 - a.
inline void composite(const ProjectedSplat& s, double a, double* rgb, double& transmittance) {
  const double w = transmittance * a;
  rgb[0] += w * s.color.x();
  rgb[1] += w * s.color.y();
  rgb[2] += w * s.color.z();
  transmittance *= 1.0 - a;
}

inline void finish_pixel(const Camera& camera, double transmittance, double* rgb, double& alpha) {
  rgb[0] += transmittance * camera.background.x();
  rgb[1] += transmittance * camera.background.y();
  rgb[2] += transmittance * camera.background.z();
  alpha = 1.0 - transmittance;
}

}  // namespace msdi::detail
