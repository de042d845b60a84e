#pragma once

#include "msdi/common.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace msdi {

/// Anisotropic Gaussians with constant color. Quaternions are (w, x, y, z).
struct GaussianCloud {
  Eigen::Matrix3Xd centers;
  Eigen::Matrix3Xd scales;
  Eigen::Matrix4Xd rotations;
  Eigen::VectorXd opacities;
  Eigen::Matrix3Xd colors;

  int size() const { return static_cast<int>(centers.cols()); }
  /// Throws InvalidArgument (shapes, scales, opacities, colors) or
  /// InvalidQuaternion.
  void validate() const;

  /// Isotropic splats of one radius, color and opacity at `points`.
  static GaussianCloud isotropic(const Eigen::Matrix3Xd& points, double scale, const Eigen::Vector3d& color,
                                 double opacity);
  void append(const GaussianCloud& other);
};

/// Pinhole camera. `rotation` and `position` map camera to world; the camera
/// looks along its +z axis with +x right and +y down in the image.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double focal = 100.0;  // pixels
  int width = 64;
  int height = 64;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();

  void validate() const;

  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                        double focal, int width, int height);
};

/// Row-major linear RGB in [0, 1] plus the accumulated opacity per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;
  std::vector<double> alpha;

  Eigen::Vector3d pixel(int x, int y) const;
  /// 8-bit RGB, rounded and clamped.
  std::vector<std::uint8_t> to_bytes() const;
};

/// R S S^T R^T. Throws InvalidQuaternion unless |q| = 1 within 1e-6 and
/// InvalidArgument unless every scale is positive.
Eigen::Matrix3d gaussian_covariance(const Eigen::Vector3d& scale, const Eigen::Vector4d& quaternion);

/// exp(-0.5 (x - mu)^T cov^-1 (x - mu)). Throws SingularCovariance unless cov
/// is positive definite.
double gaussian_density(const Eigen::Vector3d& x, const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov);

/// Front-to-back compositing of depth-sorted splats over the background.
/// Parallel over image rows.
Image render_frame(const GaussianCloud& cloud, const Camera& camera);

void write_ppm(const Image& image, const std::string& path);
void write_png(const Image& image, const std::string& path);
/// Chooses PNG or PPM from the extension.
void write_image(const Image& image, const std::string& path);

}  // namespace msdi
