#include "oracles.hpp"

#include "msdi/reference.hpp"
#include "msdi/render.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace msdi;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an msdi::Error");
  return ErrorCode::InvalidArgument;
}

Eigen::Vector4d random_quaternion(oracle::Rng& rng) {
  std::normal_distribution<double> n;
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

GaussianCloud random_cloud(oracle::Rng& rng, int n, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  GaussianCloud c;
  c.centers.resize(3, n);
  c.scales.resize(3, n);
  c.rotations.resize(4, n);
  c.opacities.resize(n);
  c.colors.resize(3, n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) c.centers(a, i) = oracle::uniform(rng, lo[a], hi[a]);
    c.scales.col(i) = oracle::uniform3(rng, 0.02, 0.2);
    c.rotations.col(i) = random_quaternion(rng);
    c.opacities[i] = oracle::uniform(rng, 0.05, 1.0);
    c.colors.col(i) = oracle::uniform3(rng, 0.0, 1.0);
  }
  return c;
}

Camera axis_camera(int size, double focal) {
  Camera cam;
  cam.width = cam.height = size;
  cam.focal = focal;
  cam.background = Eigen::Vector3d(0.1, 0.2, 0.3);
  return cam;
}

/// Straightforward per-pixel renderer written from the projection model:
/// perspective Jacobian, 3-sigma cutoff, depth order, front-to-back "over".
Image oracle_render(const GaussianCloud& cloud, const Camera& cam) {
  struct Splat {
    double depth;
    int index;
    Eigen::Vector2d mean;
    Eigen::Matrix2d inv;
  };
  std::vector<Splat> splats;
  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d p = cam.rotation.transpose() * (cloud.centers.col(i) - cam.position);
    if (p.z() <= 1e-3) continue;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.focal / p.z(), 0, -cam.focal * p.x() / (p.z() * p.z()), 0, cam.focal / p.z(),
        -cam.focal * p.y() / (p.z() * p.z());
    const Eigen::Quaterniond q(cloud.rotations(0, i), cloud.rotations(1, i), cloud.rotations(2, i), cloud.rotations(3, i));
    const Eigen::Matrix3d m = q.toRotationMatrix() * cloud.scales.col(i).asDiagonal();
    const Eigen::Matrix<double, 2, 3> t = j * cam.rotation.transpose();
    const Eigen::Matrix2d cov2 = t * (m * m.transpose()) * t.transpose();
    if (!(cov2.determinant() > 0)) continue;
    splats.push_back({p.z(), i, {cam.focal * p.x() / p.z() + 0.5 * cam.width, cam.focal * p.y() / p.z() + 0.5 * cam.height},
                      cov2.inverse()});
  }
  std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) { return a.depth < b.depth; });
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(3 * cam.width * cam.height), 0.0);
  img.alpha.assign(static_cast<std::size_t>(cam.width * cam.height), 0.0);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double t = 1.0;
      for (const Splat& s : splats) {
        const Eigen::Vector2d d(x + 0.5 - s.mean.x(), y + 0.5 - s.mean.y());
        const double q = d.dot(s.inv * d);
        if (q > 9.0) continue;
        const double a = cloud.opacities[s.index] * std::exp(-0.5 * q);
        c += t * a * cloud.colors.col(s.index);
        t *= 1 - a;
      }
      c += t * cam.background;
      const std::size_t k = static_cast<std::size_t>(y * cam.width + x);
      for (int ch = 0; ch < 3; ++ch) img.rgb[3 * k + ch] = c[ch];
      img.alpha[k] = 1 - t;
    }
  }
  return img;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("gaussian_covariance examples") {
  const Eigen::Vector4d identity(1, 0, 0, 0);
  CHECK(gaussian_covariance({1, 1, 1}, identity).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  CHECK((gaussian_covariance({2, 1, 1}, identity) - Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()).norm() <= 1e-15);
  const Eigen::Vector4d quarter_z(std::cos(std::numbers::pi / 4), 0, 0, std::sin(std::numbers::pi / 4));
  CHECK((gaussian_covariance({2, 1, 1}, quarter_z) - Eigen::Vector3d(1, 4, 1).asDiagonal().toDenseMatrix()).norm() <=
        1e-12);
  CHECK(code_of([&] { gaussian_covariance({1, 1, 1}, Eigen::Vector4d(1, 0.1, 0, 0)); }) == ErrorCode::InvalidQuaternion);
  CHECK(code_of([&] { gaussian_covariance({1, 0, 1}, identity); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("gaussian_covariance is SPD with eigenvalues s^2") {
  oracle::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d s = oracle::uniform3(rng, 0.01, 3.0);
    const Eigen::Matrix3d cov = gaussian_covariance(s, random_quaternion(rng));
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(Eigen::LLT<Eigen::Matrix3d>(cov).info() == Eigen::Success);
    Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov).eigenvalues();
    Eigen::Vector3d expected = s.cwiseAbs2();
    std::sort(expected.data(), expected.data() + 3);
    CHECK((ev - expected).cwiseAbs().maxCoeff() <= 1e-9 * expected.maxCoeff());
  }
}

TEST_CASE("gaussian_density examples") {
  const Eigen::Vector3d mu(0.3, -0.2, 1.0);
  CHECK(gaussian_density(mu, mu, Eigen::Matrix3d::Identity()) == 1.0);
  CHECK(std::abs(gaussian_density(mu + Eigen::Vector3d(0, 1, 0), mu, Eigen::Matrix3d::Identity()) - std::exp(-0.5)) <= 1e-15);
  CHECK(code_of([&] { gaussian_density(mu, mu, Eigen::Vector3d(1, 0, 1).asDiagonal()); }) == ErrorCode::SingularCovariance);

  oracle::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Matrix3d cov = gaussian_covariance(oracle::uniform3(rng, 0.1, 2.0), random_quaternion(rng));
    const Eigen::Vector3d dir = oracle::unit3(rng);
    double prev = 1.0;
    for (int k = 1; k <= 50; ++k) {
      const double g = gaussian_density(mu + 0.1 * k * dir, mu, cov);
      CHECK(g <= prev);
      CHECK(g > 0.0);
      prev = g;
    }
  }
}

TEST_CASE("render_frame examples") {
  const Camera cam = axis_camera(33, 60.0);
  SUBCASE("empty cloud is the background") {
    const Image img = render_frame(GaussianCloud{}, cam);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        CHECK(img.pixel(x, y) == cam.background);
        CHECK(img.alpha[static_cast<std::size_t>(y * cam.width + x)] == 0.0);
      }
    }
  }
  SUBCASE("single opaque red splat on the optical axis") {
    const GaussianCloud c = GaussianCloud::isotropic(Eigen::Vector3d(0, 0, 3), 0.2, {1, 0, 0}, 1.0);
    const Image img = render_frame(c, cam);
    CHECK(img.pixel(16, 16).x() > 0.9);
    CHECK(img.pixel(16, 16) == Eigen::Vector3d(1, 0, 0));
    CHECK(img.pixel(0, 0) == cam.background);
  }
  SUBCASE("nearer opaque splat hides the farther one") {
    GaussianCloud c = GaussianCloud::isotropic(Eigen::Vector3d(0, 0, 5), 0.4, {0, 0, 1}, 0.8);
    c.append(GaussianCloud::isotropic(Eigen::Vector3d(0, 0, 2), 0.1, {0, 1, 0}, 1.0));
    const Image img = render_frame(c, cam);
    CHECK(img.pixel(16, 16) == Eigen::Vector3d(0, 1, 0));
    CHECK(img.alpha[16 * 33 + 16] == 1.0);
    // Off-centre the near splat is not opaque, so the far one shows through.
    CHECK(img.pixel(18, 16).z() > 0.0);
  }
  SUBCASE("splats behind the camera are ignored") {
    const GaussianCloud c = GaussianCloud::isotropic(Eigen::Vector3d(0, 0, -3), 0.5, {1, 1, 1}, 1.0);
    CHECK(render_frame(c, cam).rgb == render_frame(GaussianCloud{}, cam).rgb);
  }
}

TEST_CASE("render_frame matches an independent renderer") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const GaussianCloud c = random_cloud(rng, 150, Eigen::Vector3d(-1, -1, 1.5), Eigen::Vector3d(1, 1, 4));
    Camera cam = Camera::look_at(oracle::uniform3(rng, -0.5, 0.5), Eigen::Vector3d(0, 0, 2.5), Eigen::Vector3d(0, -1, 0),
                                 50.0, 48, 40);
    cam.background = oracle::uniform3(rng, 0, 1);
    const Image got = render_frame(c, cam);
    const Image want = oracle_render(c, cam);
    CHECK(max_abs_diff(got.rgb, want.rgb) <= 1e-12);
    CHECK(max_abs_diff(got.alpha, want.alpha) <= 1e-12);
    for (double a : got.alpha) CHECK(a <= 1.0 + 1e-6);
  }
}

TEST_CASE("rendering is deterministic and matches the serial reference bit for bit") {
  oracle::Rng rng(4);
  const GaussianCloud c = random_cloud(rng, 400, Eigen::Vector3d(-1, -1, 1), Eigen::Vector3d(1, 1, 3));
  const Camera cam = axis_camera(64, 70.0);
  const Image a = render_frame(c, cam);
  const Image b = render_frame(c, cam);
  const Image r = reference::render_frame(c, cam);
  CHECK(a.rgb == b.rgb);
  CHECK(a.rgb == r.rgb);
  CHECK(a.alpha == r.alpha);
}

TEST_CASE("translating the cloud and the camera together leaves the image unchanged") {
  oracle::Rng rng(5);
  GaussianCloud c = random_cloud(rng, 100, Eigen::Vector3d(-1, -1, 1), Eigen::Vector3d(1, 1, 3));
  // Dyadic centres and offsets keep the shifted differences exact.
  c.centers = (c.centers * 256.0).array().round() / 256.0;
  Camera cam = Camera::look_at({0, 0, 0}, {0.25, 0.125, 2}, {0, -1, 0}, 60.0, 40, 40);
  const Image base = render_frame(c, cam);
  for (const Eigen::Vector3d& shift : {Eigen::Vector3d(3, -2, 5), Eigen::Vector3d(-0.5, 0.25, 1.75)}) {
    GaussianCloud moved = c;
    moved.centers.colwise() += shift;
    Camera cam2 = cam;
    cam2.position += shift;
    CHECK(render_frame(moved, cam2).rgb == base.rgb);
  }
}

TEST_CASE("camera and cloud validation") {
  Camera cam;
  cam.width = 0;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = Camera{};
  cam.focal = -1;
  CHECK_THROWS_AS(cam.validate(), Error);
  GaussianCloud c = GaussianCloud::isotropic(Eigen::Matrix3Xd::Zero(3, 2), 0.1, {1, 1, 1}, 0.5);
  c.opacities[1] = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GaussianCloud::isotropic(Eigen::Matrix3Xd::Zero(3, 2), 0.1, {1, 1, 1}, 0.5);
  c.rotations(1, 0) = 0.5;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidQuaternion);

  const Camera look = Camera::look_at({1, 2, 3}, {1, 2, 10}, {0, -1, 0}, 50, 10, 10);
  CHECK((look.rotation.col(2) - Eigen::Vector3d(0, 0, 1)).norm() <= 1e-15);
  CHECK(std::abs(look.rotation.determinant() - 1.0) <= 1e-12);
}

TEST_CASE("image files") {
  const auto dir = std::filesystem::temp_directory_path() / "msdi_render_test";
  std::filesystem::create_directories(dir);
  const Camera cam = axis_camera(7, 10.0);
  const Image img = render_frame(GaussianCloud::isotropic(Eigen::Vector3d(0, 0, 2), 0.3, {1, 0.5, 0}, 0.9), cam);
  write_image(img, (dir / "a.ppm").string());
  const std::string ppm = read_file((dir / "a.ppm").string());
  const std::string header = "P6\n7 7\n255\n";
  REQUIRE(ppm.size() == header.size() + 7 * 7 * 3);
  CHECK(ppm.substr(0, header.size()) == header);
  const std::vector<std::uint8_t> bytes = img.to_bytes();
  CHECK(std::equal(bytes.begin(), bytes.end(), reinterpret_cast<const std::uint8_t*>(ppm.data() + header.size())));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    CHECK(bytes[i] == static_cast<std::uint8_t>(std::lround(std::clamp(img.rgb[i], 0.0, 1.0) * 255)));
  }

  write_image(img, (dir / "a.png").string());
  const std::string png = read_file((dir / "a.png").string());
  CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
  CHECK(code_of([&] { write_image(img, (dir / "a.bmp").string()); }) == ErrorCode::InvalidArgument);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
