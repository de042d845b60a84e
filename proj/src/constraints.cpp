#include "msdi/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace msdi {

Aabb Aabb::of(const Eigen::Matrix3Xd& points) {
  Aabb box;
  if (points.cols() == 0) return box;
  box.min = points.rowwise().minCoeff();
  box.max = points.rowwise().maxCoeff();
  return box;
}

Aabb Aabb::intersect(const Aabb& other) const {
  Aabb box;
  box.min = min.cwiseMax(other.min);
  box.max = max.cwiseMin(other.max);
  return box;
}

Aabb Aabb::inflated(double margin) const {
  Aabb box;
  box.min = min.array() - margin;
  box.max = max.array() + margin;
  return box;
}

namespace {

// Median nearest-neighbour distance over an evenly strided subsample.
double median_spacing(const Eigen::Matrix3Xd& points) {
  const int n = static_cast<int>(points.cols());
  if (n < 2) return 0.0;
  constexpr int kMaxProbes = 512;
  const int stride = std::max(1, n / kMaxProbes);
  std::vector<int> probes;
  for (int i = 0; i < n; i += stride) probes.push_back(i);
  std::vector<double> nearest(probes.size());
#pragma omp parallel for schedule(static)
  for (int s = 0; s < static_cast<int>(probes.size()); ++s) {
    const int i = probes[s];
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::min(best, (points.col(i) - points.col(j)).squaredNorm());
    }
    nearest[s] = std::sqrt(best);
  }
  auto mid = nearest.begin() + static_cast<std::ptrdiff_t>(nearest.size() / 2);
  std::nth_element(nearest.begin(), mid, nearest.end());
  return *mid;
}

}  // namespace

SceneObject::SceneObject(std::string name, Eigen::Matrix3Xd points, Eigen::Matrix3Xd normals)
    : name_(std::move(name)), points_(std::move(points)), normals_(std::move(normals)) {
  if (points_.cols() != normals_.cols()) fail(ErrorCode::ShapeMismatch, "object points and normals differ in count");
  if (!points_.allFinite() || !normals_.allFinite()) fail(ErrorCode::InvalidArgument, "object has non-finite values");
  for (int i = 0; i < normals_.cols(); ++i) {
    if (std::abs(normals_.col(i).norm() - 1.0) > 1e-6) {
      fail(ErrorCode::InvalidArgument, "normal " + std::to_string(i) + " of object '" + name_ + "' is not unit length");
    }
  }
  aabb_ = Aabb::of(points_);
  spacing_ = median_spacing(points_);
}

SceneObject make_box_object(const std::string& name, const Aabb& box, double spacing) {
  if (box.empty() || !(spacing > 0.0)) fail(ErrorCode::InvalidArgument, "box object needs a non-empty box and positive spacing");
  const Eigen::Vector3d extent = box.max - box.min;
  std::vector<Eigen::Vector3d> points, normals;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    const int nu = std::max(1, static_cast<int>(std::ceil(extent[u] / spacing)));
    const int nv = std::max(1, static_cast<int>(std::ceil(extent[v] / spacing)));
    for (int side = 0; side < 2; ++side) {
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[axis] = side == 0 ? -1.0 : 1.0;
      for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
          Eigen::Vector3d p;
          p[axis] = side == 0 ? box.min[axis] : box.max[axis];
          p[u] = box.min[u] + (i + 0.5) * extent[u] / nu;
          p[v] = box.min[v] + (j + 0.5) * extent[v] / nv;
          points.push_back(p);
          normals.push_back(n);
        }
      }
    }
  }
  Eigen::Matrix3Xd P(3, static_cast<Eigen::Index>(points.size()));
  Eigen::Matrix3Xd N(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    P.col(static_cast<Eigen::Index>(i)) = points[i];
    N.col(static_cast<Eigen::Index>(i)) = normals[i];
  }
  return SceneObject(name, std::move(P), std::move(N));
}

void LossWeights::validate() const {
  for (double v : {msds, traj, smooth, collision, middle, end, margin}) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::InvalidArgument, "loss weights must be finite and nonnegative");
  }
}

Eigen::Matrix3Xd translations(const MotionSequence& motion) {
  Eigen::Matrix3Xd r(3, motion.num_frames());
  for (int i = 0; i < motion.num_frames(); ++i) r.col(i) = motion.frames[i].translation;
  return r;
}

TranslationLoss trajectory_loss(const Eigen::Matrix3Xd& root, const Eigen::Matrix3Xd& plan, double lambda_middle,
                                double lambda_end) {
  if (root.cols() != plan.cols()) {
    fail(ErrorCode::LengthMismatch, "plan has " + std::to_string(plan.cols()) + " frames, motion has " +
                                        std::to_string(root.cols()));
  }
  const int n = static_cast<int>(root.cols());
  TranslationLoss out;
  out.grad.setZero(3, n);
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double lambda = (i == 0 || i == n - 1) ? lambda_end : lambda_middle;
    const Eigen::Vector3d d = root.col(i) - plan.col(i);
    terms[i] = lambda * d.squaredNorm();
    out.grad.col(i) = 2.0 * lambda * d;
  }
  out.loss = pairwise_sum(terms);
  return out;
}

TranslationLoss trajectory_loss(const MotionSequence& motion, const Eigen::Matrix3Xd& plan, double lambda_middle,
                                double lambda_end) {
  return trajectory_loss(translations(motion), plan, lambda_middle, lambda_end);
}

TranslationLoss smoothness_loss(const Eigen::Matrix3Xd& root) {
  const int n = static_cast<int>(root.cols());
  if (n < 4) fail(ErrorCode::TooFewFrames, "jerk needs at least 4 frames, got " + std::to_string(n));
  TranslationLoss out;
  out.grad.setZero(3, n);
  std::vector<double> terms(static_cast<std::size_t>(n - 3));
  for (int i = 0; i + 3 < n; ++i) {
    const Eigen::Vector3d jerk = root.col(i + 3) - 3.0 * root.col(i + 2) + 3.0 * root.col(i + 1) - root.col(i);
    terms[i] = jerk.squaredNorm();
    out.grad.col(i + 3) += 2.0 * jerk;
    out.grad.col(i + 2) -= 6.0 * jerk;
    out.grad.col(i + 1) += 6.0 * jerk;
    out.grad.col(i) -= 2.0 * jerk;
  }
  out.loss = pairwise_sum(terms);
  return out;
}

TranslationLoss smoothness_loss(const MotionSequence& motion) { return smoothness_loss(translations(motion)); }

namespace {

// Uniform grid over the human points inside the contact region, stored as
// buckets in ascending point order.
class PointGrid {
 public:
  PointGrid(const Eigen::Matrix3Xd& points, const std::vector<int>& members, const Aabb& region, double cell)
      : points_(points), origin_(region.min) {
    const Eigen::Vector3d extent = region.max - region.min;
    // Keep the cell count proportional to the population.
    const double budget = 4.0 * static_cast<double>(members.size()) + 4096.0;
    cell_ = cell;
    for (;;) {
      for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / cell_)));
      if (static_cast<double>(dims_[0]) * dims_[1] * dims_[2] <= budget) break;
      cell_ *= 1.5;
    }
    const std::size_t ncells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    start_.assign(ncells + 1, 0);
    std::vector<std::size_t> cell_of(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      cell_of[i] = flat(cell_coords(points.col(members[i])));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < ncells; ++c) start_[c + 1] += start_[c];
    entries_.resize(members.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < members.size(); ++i) entries_[fill[cell_of[i]]++] = members[i];
  }

  // Nearest member by (squared distance, index).
  int nearest(const Eigen::Vector3d& q) const {
    const Eigen::Vector3i c = cell_coords(q);
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= max_ring; ++ring) {
      visit_shell(c, ring, [&](std::size_t cell) {
        for (std::size_t e = start_[cell]; e < start_[cell + 1]; ++e) {
          const int idx = entries_[e];
          const double d2 = (q - points_.col(idx)).squaredNorm();
          if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
            best_d2 = d2;
            best = idx;
          }
        }
      });
      // Distance from q to the nearest face of the visited block that still
      // has cells behind it, less a little slack for the bucketing round-off.
      double bound = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (c[a] - ring > 0) bound = std::min(bound, q[a] - (origin_[a] + (c[a] - ring) * cell_));
        if (c[a] + ring < dims_[a] - 1) bound = std::min(bound, origin_[a] + (c[a] + ring + 1) * cell_ - q[a]);
      }
      if (std::isinf(bound)) break;
      bound = std::max(0.0, bound - 1e-9 * cell_);
      if (best >= 0 && best_d2 < bound * bound) break;
    }
    return best;
  }

 private:
  Eigen::Vector3i cell_coords(const Eigen::Vector3d& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
    }
    return c;
  }

  std::size_t flat(const Eigen::Vector3i& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  template <typename Fn>
  void visit_shell(const Eigen::Vector3i& c, int ring, Fn&& fn) const {
    Eigen::Vector3i lo, hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, c[a] - ring);
      hi[a] = std::min(dims_[a] - 1, c[a] + ring);
    }
    for (int z = lo[2]; z <= hi[2]; ++z) {
      for (int y = lo[1]; y <= hi[1]; ++y) {
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const int cheb = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
          if (cheb != ring) continue;
          fn(flat(Eigen::Vector3i(x, y, z)));
        }
      }
    }
  }

  const Eigen::Matrix3Xd& points_;
  Eigen::Vector3d origin_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::size_t> start_;
  std::vector<int> entries_;
};

}  // namespace

CollisionPairs detect_collisions(const Eigen::Matrix3Xd& human_points, const Eigen::Matrix3Xd& human_normals,
                                 const SceneObject& object) {
  if (human_points.cols() != human_normals.cols()) fail(ErrorCode::ShapeMismatch, "human points and normals differ");
  const Aabb region = Aabb::of(human_points).intersect(object.aabb());
  if (region.empty() || object.size() == 0) return {};

  std::vector<int> human_in;
  for (int j = 0; j < human_points.cols(); ++j) {
    if (region.contains(human_points.col(j))) human_in.push_back(j);
  }
  if (human_in.empty()) return {};
  std::vector<int> object_in;
  for (int i = 0; i < object.size(); ++i) {
    if (region.contains(object.points().col(i))) object_in.push_back(i);
  }
  if (object_in.empty()) return {};

  double cell = 2.0 * object.point_spacing();
  const double extent = (region.max - region.min).maxCoeff();
  if (!(cell > 0.0)) cell = extent > 0.0 ? extent / 16.0 : 1.0;
  const PointGrid grid(human_points, human_in, region, cell);

  std::vector<int> nearest(object_in.size());
#pragma omp parallel for schedule(static)
  for (int s = 0; s < static_cast<int>(object_in.size()); ++s) {
    nearest[s] = grid.nearest(object.points().col(object_in[s]));
  }

  CollisionPairs pairs(object_in.size());
  for (std::size_t s = 0; s < object_in.size(); ++s) {
    pairs[s].object_index = object_in[s];
    pairs[s].human_index = nearest[s];
    pairs[s].human_normal = human_normals.col(nearest[s]);
  }
  return pairs;
}

CollisionLoss collision_loss(const CollisionPairs& pairs, const Eigen::Matrix3Xd& human_points,
                             const SceneObject& object, double margin, bool drop_clamped) {
  if (!(margin >= 0.0)) fail(ErrorCode::InvalidArgument, "collision margin must be nonnegative");
  CollisionLoss out;
  out.grad_points.setZero(3, human_points.cols());
  out.grad_normals.setZero(3, human_points.cols());
  std::vector<double> active_terms;
  active_terms.reserve(pairs.size());
  int clamped = 0;
  for (const CollisionPair& p : pairs) {
    if (p.object_index < 0 || p.object_index >= object.size() || p.human_index < 0 ||
        p.human_index >= human_points.cols()) {
      fail(ErrorCode::StaleIndices, "collision pair refers to a point that does not exist");
    }
    const Eigen::Vector3d diff = human_points.col(p.human_index) - object.points().col(p.object_index);
    const double depth = p.human_normal.dot(diff);
    if (depth > -margin) {
      active_terms.push_back(depth);
      out.grad_points.col(p.human_index) += p.human_normal;
      out.grad_normals.col(p.human_index) += diff;
    } else {
      ++clamped;
    }
  }
  out.active = static_cast<int>(active_terms.size());
  // Clamped pairs are counted rather than summed so an all-clamped set gives
  // exactly -margin * count.
  out.loss = pairwise_sum(active_terms);
  if (!drop_clamped) out.loss += -margin * clamped;
  return out;
}

}  // namespace msdi
