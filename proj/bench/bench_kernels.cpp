// Serial reference kernels against their OpenMP drivers.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include "msdi/motion_model.hpp"
#include "msdi/reference.hpp"
#include "msdi/render.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace msdi;

namespace {

const BodyModel& body() {
  static const BodyModel b = make_desk_body();
  return b;
}

std::vector<Transform34> posed_transforms() {
  Frame f = MotionSequence::rest(1, body().num_pose_joints(), 30.0).frames[0];
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int j = 0; j < f.pose.rows(); ++j) {
    for (int k = 0; k < 6; ++k) f.pose(j, k) += u(rng);
  }
  return forward_kinematics(body(), f).skinning;
}

// Points scattered around the body surface.
Eigen::Matrix3Xd surface_samples(int count) {
  const Eigen::Matrix3Xd centers = face_centroids(body());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  Eigen::Matrix3Xd p(3, count);
  for (int i = 0; i < count; ++i) {
    p.col(i) = centers.col(i % centers.cols()) + Eigen::Vector3d(u(rng), u(rng), u(rng));
  }
  return p;
}

GaussianCloud cloud(int count) {
  const Eigen::Matrix3Xd p = surface_samples(count);
  GaussianCloud c = GaussianCloud::isotropic(p, 0.02, {0.8, 0.5, 0.3}, 0.7);
  for (int i = 0; i < count; ++i) c.colors.col(i) = Eigen::Vector3d(0.2 + 0.6 * (i % 7) / 6.0, 0.5, 0.9 - 0.1 * (i % 5));
  return c;
}

Camera camera(int size) {
  return Camera::look_at({3.0, -3.0, 1.5}, {0.0, 0.0, 0.9}, {0.0, 0.0, 1.0}, 1.4 * size, size, size);
}

void BM_lbs_serial(benchmark::State& state) {
  const auto t = posed_transforms();
  for (auto _ : state) benchmark::DoNotOptimize(reference::lbs_skin(body(), t));
}
void BM_lbs_omp(benchmark::State& state) {
  const auto t = posed_transforms();
  for (auto _ : state) benchmark::DoNotOptimize(lbs_skin(body(), t));
}

void BM_bind_serial(benchmark::State& state) {
  const Eigen::Matrix3Xd p = surface_samples(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::bind_points(p, body().template_points(), body().faces()));
}
void BM_bind_omp(benchmark::State& state) {
  const Eigen::Matrix3Xd p = surface_samples(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bind_points(p, body().template_points(), body().faces()));
}

void BM_deform_serial(benchmark::State& state) {
  const BarycentricBinding b = bind_points(surface_samples(static_cast<int>(state.range(0))), body());
  const Eigen::Matrix3Xd posed = lbs_skin(body(), posed_transforms());
  for (auto _ : state) benchmark::DoNotOptimize(reference::deform_points_with_normals(b, posed, body().faces()));
}
void BM_deform_omp(benchmark::State& state) {
  const BarycentricBinding b = bind_points(surface_samples(static_cast<int>(state.range(0))), body());
  const Eigen::Matrix3Xd posed = lbs_skin(body(), posed_transforms());
  for (auto _ : state) benchmark::DoNotOptimize(deform_points_with_normals(b, posed, body().faces()));
}

void BM_render_serial(benchmark::State& state) {
  const GaussianCloud c = cloud(4000);
  const Camera cam = camera(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::render_frame(c, cam));
}
void BM_render_omp(benchmark::State& state) {
  const GaussianCloud c = cloud(4000);
  const Camera cam = camera(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_frame(c, cam));
}

}  // namespace

BENCHMARK(BM_lbs_serial);
BENCHMARK(BM_lbs_omp);
BENCHMARK(BM_bind_serial)->Arg(1000)->Arg(8000);
BENCHMARK(BM_bind_omp)->Arg(1000)->Arg(8000);
BENCHMARK(BM_deform_serial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_deform_omp)->Arg(1000)->Arg(20000);
BENCHMARK(BM_render_serial)->Arg(96)->Arg(256);
BENCHMARK(BM_render_omp)->Arg(96)->Arg(256);

BENCHMARK_MAIN();
