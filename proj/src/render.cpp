#include "msdi/render.hpp"

#include "splat.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace msdi {

void GaussianCloud::validate() const {
  const auto n = centers.cols();
  if (scales.cols() != n || rotations.cols() != n || opacities.size() != n || colors.cols() != n) {
    fail(ErrorCode::InvalidArgument, "Gaussian cloud arrays have different lengths");
  }
  if (!centers.allFinite() || !scales.allFinite() || !colors.allFinite()) {
    fail(ErrorCode::InvalidArgument, "Gaussian cloud has non-finite values");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(std::abs(rotations.col(i).norm() - 1.0) <= 1e-6)) {
      fail(ErrorCode::InvalidQuaternion, "quaternion " + std::to_string(i) + " is not unit length");
    }
    if (!(scales.col(i).minCoeff() > 0.0)) fail(ErrorCode::InvalidArgument, "scale " + std::to_string(i) + " is not positive");
    if (!(opacities[i] >= 0.0 && opacities[i] <= 1.0)) {
      fail(ErrorCode::InvalidArgument, "opacity " + std::to_string(i) + " is outside [0, 1]");
    }
  }
}

GaussianCloud GaussianCloud::isotropic(const Eigen::Matrix3Xd& points, double scale, const Eigen::Vector3d& color,
                                       double opacity) {
  GaussianCloud c;
  const auto n = points.cols();
  c.centers = points;
  c.scales = Eigen::Matrix3Xd::Constant(3, n, scale);
  c.rotations = Eigen::Matrix4Xd::Zero(4, n);
  c.rotations.row(0).setOnes();
  c.opacities = Eigen::VectorXd::Constant(n, opacity);
  c.colors = color.replicate(1, n);
  return c;
}

void GaussianCloud::append(const GaussianCloud& other) {
  const auto n = size();
  const auto m = other.size();
  auto grow = [&](auto& dst, const auto& src) {
    dst.conservativeResize(Eigen::NoChange, n + m);
    dst.rightCols(m) = src;
  };
  grow(centers, other.centers);
  grow(scales, other.scales);
  grow(rotations, other.rotations);
  grow(colors, other.colors);
  opacities.conservativeResize(n + m);
  opacities.tail(m) = other.opacities;
}

void Camera::validate() const {
  if (width < 1 || height < 1) fail(ErrorCode::InvalidArgument, "camera resolution must be at least 1x1");
  if (!(focal > 0.0) || !std::isfinite(focal)) fail(ErrorCode::InvalidArgument, "focal length must be positive");
  if (!rotation.allFinite() || !position.allFinite() || !background.allFinite()) {
    fail(ErrorCode::InvalidArgument, "camera has non-finite values");
  }
  if (!(rotation.transpose() * rotation).isApprox(Eigen::Matrix3d::Identity(), 1e-9) || rotation.determinant() < 0.0) {
    fail(ErrorCode::InvalidArgument, "camera rotation is not a rotation matrix");
  }
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                       double focal, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d y = -up + up.dot(z) * z;
  if (y.norm() < 1e-12) fail(ErrorCode::InvalidArgument, "look_at: up is parallel to the view direction");
  y.normalize();
  Camera c;
  c.rotation.col(0) = y.cross(z);
  c.rotation.col(1) = y;
  c.rotation.col(2) = z;
  c.position = eye;
  c.focal = focal;
  c.width = width;
  c.height = height;
  return c;
}

Eigen::Vector3d Image::pixel(int x, int y) const {
  const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
  return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> out(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

Eigen::Matrix3d gaussian_covariance(const Eigen::Vector3d& scale, const Eigen::Vector4d& quaternion) {
  if (!(std::abs(quaternion.norm() - 1.0) <= 1e-6)) fail(ErrorCode::InvalidQuaternion, "quaternion is not unit length");
  if (!(scale.minCoeff() > 0.0) || !scale.allFinite()) fail(ErrorCode::InvalidArgument, "scales must be positive");
  const Eigen::Quaterniond q(quaternion[0], quaternion[1], quaternion[2], quaternion[3]);
  const Eigen::Matrix3d rs = q.normalized().toRotationMatrix() * scale.asDiagonal();
  return rs * rs.transpose();
}

double gaussian_density(const Eigen::Vector3d& x, const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov) {
  if (!cov.allFinite() || !cov.isApprox(cov.transpose(), 1e-12)) {
    fail(ErrorCode::SingularCovariance, "covariance is not symmetric");
  }
  const Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
    fail(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  const Eigen::Vector3d z = llt.matrixL().solve(x - mean);
  return std::exp(-0.5 * z.squaredNorm());
}

Image render_frame(const GaussianCloud& cloud, const Camera& camera) {
  cloud.validate();
  camera.validate();
  const std::vector<detail::ProjectedSplat> splats = detail::project_cloud(cloud, camera);
  Image img;
  img.width = camera.width;
  img.height = camera.height;
  img.rgb.assign(3 * static_cast<std::size_t>(img.width) * img.height, 0.0);
  img.alpha.assign(static_cast<std::size_t>(img.width) * img.height, 0.0);

  // Bin splats into square tiles; each bin keeps the global depth order.
  constexpr int kTile = 16;
  const int tiles_x = (img.width + kTile - 1) / kTile;
  const int tiles_y = (img.height + kTile - 1) / kTile;
  std::vector<std::vector<const detail::ProjectedSplat*>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (const auto& s : splats) {
    for (int ty = s.y0 / kTile; ty <= s.y1 / kTile; ++ty) {
      for (int tx = s.x0 / kTile; tx <= s.x1 / kTile; ++tx) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(&s);
    }
  }

#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < tiles_x * tiles_y; ++t) {
    const auto& bin = bins[static_cast<std::size_t>(t)];
    const int x_begin = (t % tiles_x) * kTile, y_begin = (t / tiles_x) * kTile;
    const int x_end = std::min(img.width, x_begin + kTile), y_end = std::min(img.height, y_begin + kTile);
    double transmittance[kTile * kTile];
    std::fill(std::begin(transmittance), std::end(transmittance), 1.0);
    for (const detail::ProjectedSplat* s : bin) {
      for (int y = std::max(y_begin, s->y0); y <= std::min(y_end - 1, s->y1); ++y) {
        for (int x = std::max(x_begin, s->x0); x <= std::min(x_end - 1, s->x1); ++x) {
          const double a = detail::splat_alpha(*s, x, y);
          if (a > 0.0) {
            detail::composite(*s, a, &img.rgb[3 * (static_cast<std::size_t>(y) * img.width + x)],
                              transmittance[(y - y_begin) * kTile + (x - x_begin)]);
          }
        }
      }
    }
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = x_begin; x < x_end; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
        detail::finish_pixel(camera, transmittance[(y - y_begin) * kTile + (x - x_begin)], &img.rgb[3 * p], img.alpha[p]);
      }
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const std::vector<std::uint8_t> bytes = image.to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

void write_png(const Image& image, const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorCode::IoError, "libpng initialization failed");
  }
  const std::vector<std::uint8_t> bytes = image.to_bytes();
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + 3 * static_cast<std::size_t>(y) * image.width);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_image(const Image& image, const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "png") {
    write_png(image, path);
  } else if (ext == "ppm") {
    write_ppm(image, path);
  } else {
    fail(ErrorCode::InvalidArgument, "image path must end in .png or .ppm: " + path);
  }
}

}  // namespace msdi
