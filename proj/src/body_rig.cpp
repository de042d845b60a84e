#include "msdi/motion_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace msdi {

namespace {

struct Capsule {
  Eigen::Vector3d proximal;
  Eigen::Vector3d distal;
  double radius;
};

struct MeshBuilder {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::vector<int> owner;        // joint owning each vertex
  std::vector<double> axial;     // 0 at the proximal end, 1 at the distal end
};

constexpr int kSegments = 10;
constexpr int kHemisphereRings = 3;

// UV capsule: distal pole, rings down to the proximal pole. Faces are then
// flipped where needed so every normal points away from the capsule axis.
void add_capsule(MeshBuilder& mesh, const Capsule& cap, int joint) {
  const Eigen::Vector3d axis = (cap.distal - cap.proximal).normalized();
  Eigen::Vector3d side = axis.unitOrthogonal();
  const Eigen::Vector3d up = axis.cross(side);
  const double length = (cap.distal - cap.proximal).norm();

  const int base = static_cast<int>(mesh.vertices.size());
  auto push = [&](const Eigen::Vector3d& p) {
    mesh.vertices.push_back(p);
    mesh.owner.push_back(joint);
    mesh.axial.push_back(std::clamp((p - cap.proximal).dot(axis) / length, 0.0, 1.0));
  };

  push(cap.distal + cap.radius * axis);
  std::vector<std::pair<Eigen::Vector3d, double>> rings;
  for (int i = 1; i <= kHemisphereRings; ++i) {
    const double a = 0.5 * std::numbers::pi * i / kHemisphereRings;
    rings.emplace_back(cap.distal + cap.radius * std::cos(a) * axis, cap.radius * std::sin(a));
  }
  for (int i = kHemisphereRings; i >= 1; --i) {
    const double a = 0.5 * std::numbers::pi * i / kHemisphereRings;
    rings.emplace_back(cap.proximal - cap.radius * std::cos(a) * axis, cap.radius * std::sin(a));
  }
  for (const auto& [center, rho] : rings) {
    for (int s = 0; s < kSegments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / kSegments;
      push(center + rho * (std::cos(phi) * side + std::sin(phi) * up));
    }
  }
  push(cap.proximal - cap.radius * axis);

  const int num_rings = static_cast<int>(rings.size());
  const int north = base;
  const int south = base + 1 + num_rings * kSegments;
  auto ring_vertex = [&](int r, int s) { return base + 1 + r * kSegments + (s % kSegments); };

  std::vector<Eigen::Vector3i> local;
  for (int s = 0; s < kSegments; ++s) local.emplace_back(north, ring_vertex(0, s), ring_vertex(0, s + 1));
  for (int r = 0; r + 1 < num_rings; ++r) {
    for (int s = 0; s < kSegments; ++s) {
      local.emplace_back(ring_vertex(r, s), ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1));
      local.emplace_back(ring_vertex(r, s), ring_vertex(r + 1, s + 1), ring_vertex(r, s + 1));
    }
  }
  for (int s = 0; s < kSegments; ++s) local.emplace_back(south, ring_vertex(num_rings - 1, s + 1), ring_vertex(num_rings - 1, s));

  const Eigen::Vector3d mid = 0.5 * (cap.proximal + cap.distal);
  for (Eigen::Vector3i f : local) {
    const Eigen::Vector3d& a = mesh.vertices[f[0]];
    const Eigen::Vector3d& b = mesh.vertices[f[1]];
    const Eigen::Vector3d& c = mesh.vertices[f[2]];
    const Eigen::Vector3d centroid = (a + b + c) / 3.0;
    const double t = std::clamp((centroid - cap.proximal).dot(axis), 0.0, length);
    const Eigen::Vector3d outward = centroid - (cap.proximal + t * axis);
    const Eigen::Vector3d n = (b - a).cross(c - a);
    const Eigen::Vector3d reference = outward.squaredNorm() > 1e-18 ? outward : Eigen::Vector3d(centroid - mid);
    if (n.dot(reference) < 0.0) std::swap(f[1], f[2]);
    mesh.faces.push_back(f);
  }
}

}  // namespace

BodyModel make_desk_body() {
  // pelvis(root), spine, neck, head, left arm, right arm, left leg, right leg
  const std::vector<int> parent = {-1, 0, 1, 2, 1, 1, 0, 0};
  const std::vector<Eigen::Vector3d> joints = {
      {0.0, 0.0, 0.95}, {0.0, 0.0, 1.05}, {0.0, 0.0, 1.45}, {0.0, 0.0, 1.55},
      {0.0, 0.2, 1.40}, {0.0, -0.2, 1.40}, {0.0, 0.1, 0.90}, {0.0, -0.1, 0.90},
  };
  const std::vector<Capsule> capsules = {
      {{0.0, -0.14, 0.95}, {0.0, 0.14, 0.95}, 0.11},
      {{0.0, 0.0, 1.08}, {0.0, 0.0, 1.34}, 0.14},
      {{0.0, 0.0, 1.45}, {0.0, 0.0, 1.52}, 0.05},
      {{0.0, 0.0, 1.62}, {0.0, 0.0, 1.70}, 0.10},
      {{0.0, 0.24, 1.40}, {0.0, 0.75, 1.40}, 0.05},
      {{0.0, -0.24, 1.40}, {0.0, -0.75, 1.40}, 0.05},
      {{0.0, 0.1, 0.86}, {0.0, 0.1, 0.10}, 0.07},
      {{0.0, -0.1, 0.86}, {0.0, -0.1, 0.10}, 0.07},
  };
  const int K = static_cast<int>(joints.size());

  MeshBuilder mesh;
  for (int k = 0; k < K; ++k) add_capsule(mesh, capsules[k], k);

  const int V = static_cast<int>(mesh.vertices.size());
  Eigen::Matrix3Xd points(3, V);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(V, K);
  constexpr double kBlendSpan = 0.25;
  for (int v = 0; v < V; ++v) {
    points.col(v) = mesh.vertices[v];
    const int k = mesh.owner[v];
    const int p = parent[k];
    // Blend toward the parent near the proximal end of each limb.
    const double to_parent = p < 0 ? 0.0 : 0.5 * std::max(0.0, 1.0 - mesh.axial[v] / kBlendSpan);
    weights(v, k) = 1.0 - to_parent;
    if (p >= 0) weights(v, p) += to_parent;
  }
  Eigen::Matrix3Xi faces(3, static_cast<Eigen::Index>(mesh.faces.size()));
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) faces.col(static_cast<Eigen::Index>(f)) = mesh.faces[f];
  Eigen::Matrix3Xd rest(3, K);
  for (int k = 0; k < K; ++k) rest.col(k) = joints[k];
  return BodyModel(std::move(points), std::move(faces), std::move(rest), parent, std::move(weights));
}

}  // namespace msdi
