#include "msdi/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

namespace msdi {

namespace {

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  // FNV-1a over the 8 bytes of v.
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;

struct FrameCollision {
  double loss = 0.0;
  std::uint64_t signature = kFnvOffset;
  Eigen::VectorXd grad;
};

FrameCollision frame_collision(const Frame& frame, const Scene& scene, const HumanModel& human,
                               const LossWeights& weights, bool with_gradient) {
  const BodyModel& body = human.body;
  const SkeletonPose pose = forward_kinematics(body, frame);
  const Eigen::Matrix3Xd posed = lbs_skin(body, pose.skinning);
  const DeformedPoints deformed = deform_points_with_normals(human.binding, posed, body.faces());

  FrameCollision out;
  Eigen::Matrix3Xd grad_points = Eigen::Matrix3Xd::Zero(3, deformed.points.cols());
  Eigen::Matrix3Xd grad_normals = Eigen::Matrix3Xd::Zero(3, deformed.points.cols());
  std::vector<double> per_object;
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    const SceneObject& object = scene.objects[o];
    const CollisionPairs pairs = detect_collisions(deformed.points, deformed.normals, object);
    const CollisionLoss cl = collision_loss(pairs, deformed.points, object, weights.margin, weights.drop_clamped);
    per_object.push_back(cl.loss);
    grad_points += cl.grad_points;
    grad_normals += cl.grad_normals;
    out.signature = hash_combine(out.signature, o);
    for (const CollisionPair& p : pairs) {
      const double depth = p.human_normal.dot(deformed.points.col(p.human_index) - object.points().col(p.object_index));
      const std::uint64_t active = depth > -weights.margin ? 1u : 0u;
      out.signature = hash_combine(out.signature, (static_cast<std::uint64_t>(p.object_index) << 33) ^
                                                      (static_cast<std::uint64_t>(p.human_index) << 1) ^ active);
    }
  }
  out.loss = pairwise_sum(per_object);
  if (with_gradient) {
    out.grad = Eigen::VectorXd::Zero(frame_dim(body.num_pose_joints()));
    if (!grad_points.isZero(0.0) || !grad_normals.isZero(0.0)) {
      const Eigen::Matrix3Xd grad_vertices =
          deform_points_vjp(human.binding, posed, body.faces(), grad_points, grad_normals);
      out.grad = forward_kinematics_vjp(body, pose, frame, lbs_skin_vjp(body, grad_vertices));
    }
  }
  return out;
}

}  // namespace

HumanModel HumanModel::with_face_centroids(BodyModel body) {
  HumanModel h;
  h.binding = bind_points(face_centroids(body), body);
  h.body = std::move(body);
  return h;
}

namespace {

bool collision_active(const Scene& scene, const LossWeights& weights) {
  return weights.collision > 0.0 && !scene.objects.empty();
}

std::vector<FrameCollision> frame_collisions(const MotionSequence& x, const Scene& scene, const HumanModel& human,
                                             const LossWeights& weights, bool with_gradient) {
  const int n = x.num_frames();
  std::vector<FrameCollision> frames(static_cast<std::size_t>(n));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      frames[i] = frame_collision(x.frames[i], scene, human, weights, with_gradient);
    } catch (...) {
#pragma omp critical(msdi_objective_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return frames;
}

// Translation terms plus the per-frame collision results, which are empty when
// collision is inactive.
DeterministicObjective combine(const MotionSequence& x, const Eigen::Matrix3Xd& plan, const LossWeights& weights,
                               const std::vector<FrameCollision>& frames, bool with_gradient) {
  const int n = x.num_frames();
  const int dim = frame_dim(x.num_pose_joints());
  DeterministicObjective out;
  if (with_gradient) out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * dim);
  const Eigen::Matrix3Xd root = translations(x);

  auto add_translation_grad = [&](const Eigen::Matrix3Xd& g, double lambda) {
    for (int i = 0; i < n; ++i) out.grad.segment<3>(static_cast<Eigen::Index>(i) * dim + kTranslationOffset) += lambda * g.col(i);
  };

  if (weights.traj > 0.0) {
    const TranslationLoss t = trajectory_loss(root, plan, weights.middle, weights.end);
    out.components.traj = t.loss;
    if (with_gradient) add_translation_grad(t.grad, weights.traj);
  }
  if (weights.smooth > 0.0) {
    const TranslationLoss s = smoothness_loss(root);
    out.components.smooth = s.loss;
    if (with_gradient) add_translation_grad(s.grad, weights.smooth);
  }

  out.contact_signature = kFnvOffset;
  if (!frames.empty()) {
    std::vector<double> losses(frames.size());
    for (int i = 0; i < n; ++i) {
      losses[i] = frames[i].loss;
      out.contact_signature = hash_combine(out.contact_signature, frames[i].signature);
      if (with_gradient) out.grad.segment(static_cast<Eigen::Index>(i) * dim, dim) += weights.collision * frames[i].grad;
    }
    out.components.collision = pairwise_sum(losses);
  }

  out.components.total = weights.traj * out.components.traj + weights.smooth * out.components.smooth +
                         weights.collision * out.components.collision;
  return out;
}

}  // namespace

DeterministicObjective evaluate_objective(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                                          const HumanModel& human, const LossWeights& weights, bool with_gradient) {
  weights.validate();
  const int pose_joints = human.body.num_pose_joints();
  if (x.num_pose_joints() != pose_joints) {
    fail(ErrorCode::ShapeMismatch, "motion has " + std::to_string(x.num_pose_joints()) + " pose joints, body has " +
                                       std::to_string(pose_joints));
  }
  std::vector<FrameCollision> frames;
  if (collision_active(scene, weights)) frames = frame_collisions(x, scene, human, weights, with_gradient);
  return combine(x, plan, weights, frames, with_gradient);
}

GradientResult total_gradient(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                              const Models& models, const LossWeights& weights, Rng& rng) {
  DeterministicObjective det = evaluate_objective(x, scene, plan, models.human, weights, true);
  GradientResult out;
  out.components = det.components;
  out.grad = std::move(det.grad);
  if (weights.msds > 0.0) {
    if (!models.prior) fail(ErrorCode::InvalidArgument, "MSDS weight is positive but no diffusion prior is configured");
    const PriorModel& prior = *models.prior;
    const MsdsSample s = msds_gradient(flatten(x), prior.denoiser, prior.schedule, prior.msds, rng);
    out.components.msds = s.gradient.norm();
    out.grad += weights.msds * s.gradient;
  }
  return out;
}

std::vector<DeformedPoints> pose_human(const MotionSequence& motion, const HumanModel& human) {
  std::vector<DeformedPoints> out(motion.frames.size());
  for (std::size_t i = 0; i < motion.frames.size(); ++i) {
    const SkeletonPose pose = forward_kinematics(human.body, motion.frames[i]);
    out[i] = deform_points_with_normals(human.binding, lbs_skin(human.body, pose.skinning), human.body.faces());
  }
  return out;
}

void OptimConfig::validate() const {
  weights.validate();
  if (max_iters < 1) fail(ErrorCode::InvalidArgument, "max_iters must be at least 1");
  if (!(step_size > 0.0)) fail(ErrorCode::InvalidArgument, "step_size must be positive");
  if (!(step_decay > 0.0 && step_decay <= 1.0)) fail(ErrorCode::InvalidArgument, "step_decay must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::InvalidArgument, "moment decay rates must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(grad_tol >= 0.0)) fail(ErrorCode::InvalidArgument, "grad_tol must be nonnegative");
}

namespace {

Eigen::VectorXd mask_vector(const VariableMask& mask, int num_frames, int pose_joints) {
  const int dim = frame_dim(pose_joints);
  Eigen::VectorXd m(static_cast<Eigen::Index>(num_frames) * dim);
  for (int i = 0; i < num_frames; ++i) {
    auto block = m.segment(static_cast<Eigen::Index>(i) * dim, dim);
    block.segment<3>(kTranslationOffset).setConstant(mask.translation ? 1.0 : 0.0);
    block.segment<6>(kOrientationOffset).setConstant(mask.orientation ? 1.0 : 0.0);
    block.tail(6 * pose_joints).setConstant(mask.pose ? 1.0 : 0.0);
  }
  return m;
}

bool finite(const LossComponents& c) {
  return std::isfinite(c.msds) && std::isfinite(c.traj) && std::isfinite(c.smooth) && std::isfinite(c.collision) &&
         std::isfinite(c.total);
}

}  // namespace

OptimReport optimize(const MotionSequence& x0, const Scene& scene, const Eigen::Matrix3Xd& plan, const Models& models,
                     const OptimConfig& cfg) {
  cfg.validate();
  x0.validate();
  const int n = x0.num_frames();
  if (n < 4) fail(ErrorCode::TooFewFrames, "optimization needs at least 4 frames");
  if (cfg.weights.traj > 0.0 && plan.cols() != n) {
    fail(ErrorCode::LengthMismatch, "plan has " + std::to_string(plan.cols()) + " frames, motion has " + std::to_string(n));
  }
  const int pose_joints = x0.num_pose_joints();

  OptimReport report;
  report.config = cfg;
  Rng rng(cfg.seed);
  Eigen::VectorXd x = flatten(x0);
  const Eigen::VectorXd mask = mask_vector(cfg.mask, n, pose_joints);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(x.size());
  const auto start = std::chrono::steady_clock::now();

  for (int it = 0; it < cfg.max_iters; ++it) {
    const MotionSequence motion = unflatten(x, n, pose_joints, x0.fps);
    GradientResult g = total_gradient(motion, scene, plan, models, cfg.weights, rng);
    g.grad.array() *= mask.array();
    if (!g.grad.allFinite() || !finite(g.components)) {
      fail(ErrorCode::NonFiniteState, "non-finite loss or gradient at iteration " + std::to_string(it));
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.components = g.components;
    rec.grad_norm = g.grad.norm();
    if (cfg.record_wall_time) {
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    report.records.push_back(rec);
    if (rec.grad_norm < cfg.grad_tol) {
      report.converged = true;
      break;
    }

    const double lr = cfg.step_size * std::pow(cfg.step_decay, it);
    if (cfg.rule == UpdateRule::GradientDescent) {
      x -= lr * g.grad;
    } else {
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g.grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, it + 1);
      const double c2 = 1.0 - std::pow(cfg.beta2, it + 1);
      x.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
    }
    if (!x.allFinite()) fail(ErrorCode::NonFiniteState, "state became non-finite after iteration " + std::to_string(it));
  }
  report.final_motion = unflatten(x, n, pose_joints, x0.fps);
  return report;
}

FdCheckResult finite_diff_check(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                                const Models& models, const LossWeights& weights, const FdCheckOptions& options) {
  if (options.coordinates < 1 || !(options.step > 0.0)) fail(ErrorCode::InvalidArgument, "bad gradient-check options");
  FdCheckResult result;
  const int n = x.num_frames();
  const int pose_joints = x.num_pose_joints();
  const Eigen::VectorXd flat = flatten(x);

  if (weights.msds > 0.0) {
    if (!models.prior || !models.prior->msds.fixed_t || !models.prior->denoiser.is_oracle()) {
      fail(ErrorCode::InvalidArgument, "MSDS can only be checked in fixed-(t, eps) mode with an oracle denoiser");
    }
    const PriorModel& prior = *models.prior;
    Rng unused(options.seed);
    const MsdsSample s = msds_gradient(flat, prior.denoiser, prior.schedule, prior.msds, unused);
    // Closed form: w ((I - sqrt(ab) P) X - sqrt(1 - ab) P eps - b).
    const auto& oracle = std::get<OracleDenoiser>(prior.denoiser.model);
    const Eigen::MatrixXd projection = oracle.projection();
    const Eigen::VectorXd eps =
        prior.msds.fixed_noise ? *prior.msds.fixed_noise : Eigen::VectorXd::Zero(flat.size());
    const double ab = prior.schedule.alpha_bar(s.t);
    const double w = msds_weight(prior.msds.weighting, s.t, prior.schedule);
    const Eigen::VectorXd expected =
        w * (flat - std::sqrt(ab) * (projection * flat) - std::sqrt(1.0 - ab) * (projection * eps) - oracle.offset());
    result.msds_max_abs_error = (s.gradient - expected).cwiseAbs().maxCoeff();
  }

  const DeterministicObjective base = evaluate_objective(x, scene, plan, models.human, weights, true);
  // Collision is a sum over frames, so a perturbation only re-poses its own frame.
  const bool collide = collision_active(scene, weights);
  std::vector<FrameCollision> base_frames;
  if (collide) base_frames = frame_collisions(x, scene, models.human, weights, false);
  const int dim = frame_dim(pose_joints);
  const auto perturbed = [&](const Eigen::VectorXd& v, Eigen::Index idx) {
    const MotionSequence m = unflatten(v, n, pose_joints, x.fps);
    if (!collide) return combine(m, plan, weights, base_frames, false);
    std::vector<FrameCollision> frames = base_frames;
    const std::size_t k = static_cast<std::size_t>(idx / dim);
    frames[k] = frame_collision(m.frames[k], scene, models.human, weights, false);
    return combine(m, plan, weights, frames, false);
  };
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(flat.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  Rng rng(options.seed);
  std::shuffle(coords.begin(), coords.end(), rng);

  for (Eigen::Index idx : coords) {
    if (result.checked >= options.coordinates) break;
    Eigen::VectorXd plus = flat, minus = flat;
    plus[idx] += options.step;
    minus[idx] -= options.step;
    const DeterministicObjective ep = perturbed(plus, idx);
    const DeterministicObjective em = perturbed(minus, idx);
    if (ep.contact_signature != base.contact_signature || em.contact_signature != base.contact_signature) {
      ++result.skipped;
      continue;
    }
    const double numeric = (ep.components.total - em.components.total) / (plus[idx] - minus[idx]);
    const double analytic = base.grad[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace msdi
