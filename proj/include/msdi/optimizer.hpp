#pragma once

#include "msdi/constraints.hpp"
#include "msdi/diffusion_prior.hpp"
#include "msdi/motion_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace msdi {

/// Skinned body plus the Gaussian centers bound to its surface. The bound
/// points are the "human points" seen by collision handling.
struct HumanModel {
  BodyModel body;
  BarycentricBinding binding;

  /// Binds the face centroids of `body`.
  static HumanModel with_face_centroids(BodyModel body);
};

struct PriorModel {
  DenoiserModel denoiser;
  NoiseSchedule schedule;
  MsdsConfig msds;
};

struct Models {
  HumanModel human;
  std::optional<PriorModel> prior;
};

struct Scene {
  std::vector<SceneObject> objects;
};

/// Unweighted loss values. MSDS has no scalar loss; its entry is the norm of
/// the sampled score gradient.
struct LossComponents {
  double msds = 0.0;
  double traj = 0.0;
  double smooth = 0.0;
  double collision = 0.0;
  /// lambda-weighted sum of traj, smooth and collision.
  double total = 0.0;
};

struct GradientResult {
  LossComponents components;
  Eigen::VectorXd grad;
};

/// Objective without the stochastic MSDS term. `contact_signature` hashes the
/// collision pairing and clamp state, so callers can tell whether two
/// evaluations sit on the same smooth piece of the collision loss.
struct DeterministicObjective {
  LossComponents components;
  Eigen::VectorXd grad;
  std::uint64_t contact_signature = 0;
};

DeterministicObjective evaluate_objective(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                                          const HumanModel& human, const LossWeights& weights, bool with_gradient);

/// Weighted sum of all loss gradients on the flattened motion, with the
/// collision term chained through deformation, skinning, kinematics and rot6d.
GradientResult total_gradient(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                              const Models& models, const LossWeights& weights, Rng& rng);

/// Human points and their normals for every frame of a motion.
std::vector<DeformedPoints> pose_human(const MotionSequence& motion, const HumanModel& human);

enum class UpdateRule { Adam, GradientDescent };

struct VariableMask {
  bool translation = true;
  bool orientation = true;
  bool pose = true;
};

struct OptimConfig {
  LossWeights weights;
  int max_iters = 500;
  double step_size = 0.01;
  /// Multiplicative per-iteration decay of the step size.
  double step_decay = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Stop once the (masked) gradient norm falls below this.
  double grad_tol = 1e-9;
  std::uint64_t seed = 0;
  UpdateRule rule = UpdateRule::Adam;
  VariableMask mask;
  /// Wall time makes reports non-reproducible, so it is opt-in.
  bool record_wall_time = false;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  LossComponents components;
  double grad_norm = 0.0;
  double wall_time_s = 0.0;
};

struct OptimReport {
  OptimConfig config;
  std::vector<IterationRecord> records;
  MotionSequence final_motion;
  bool converged = false;
};

/// First-order descent on the flattened motion. Deterministic for a given
/// config and seed. Throws NonFiniteState naming the iteration if the state or
/// gradient stops being finite.
OptimReport optimize(const MotionSequence& x0, const Scene& scene, const Eigen::Matrix3Xd& plan, const Models& models,
                     const OptimConfig& cfg);

struct FdCheckOptions {
  int coordinates = 50;
  double step = 1e-5;
  /// Denominator floor for the relative error: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  std::uint64_t seed = 0;
};

struct FdCheckResult {
  /// Over the deterministic terms, central differences vs analytic gradient.
  double max_rel_error = 0.0;
  /// MSDS (fixed t and noise, oracle denoiser) vs its closed affine form.
  double msds_max_abs_error = 0.0;
  int checked = 0;
  /// Coordinates whose perturbation changed the collision pairing or clamp state.
  int skipped = 0;
};

FdCheckResult finite_diff_check(const MotionSequence& x, const Scene& scene, const Eigen::Matrix3Xd& plan,
                                const Models& models, const LossWeights& weights, const FdCheckOptions& options = {});

}  // namespace msdi
