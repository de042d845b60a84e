// Command-line front end: plan, optimize, eval, render, gradcheck.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include "msdi/io.hpp"
#include "msdi/metrics.hpp"
#include "msdi/optimizer.hpp"
#include "msdi/planner.hpp"
#include "msdi/render.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

namespace {

using namespace msdi;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  std::string scene;
  std::string motion;
  std::string plan;
  std::string out;
  std::string motion_out;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  int frame = 0;
};

io::RunConfig load_run_config(const Options& o) {
  io::RunConfig c = o.config.empty() ? io::parse_config("{\"version\": 1}") : io::load_config(o.config);
  if (o.seed) {
    c.optim.seed = *o.seed;
    c.msds.rng_seed = *o.seed;
    c.gradcheck.seed = *o.seed;
  }
  return c;
}

BodyModel load_body(const io::RunConfig& c) { return c.body_path.empty() ? make_desk_body() : io::load_body(c.body_path); }

Scene load_scene(const Options& o) { return o.scene.empty() ? Scene{} : io::load_scene(o.scene); }

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
  } else {
    io::write_text(o.out, text);
  }
}

// Temporal low-pass subspace: every coordinate of the flattened motion is
// restricted to the first K cosine modes over time.
OracleDenoiser default_oracle(int num_frames, int pose_joints) {
  const int dim = frame_dim(pose_joints);
  const int modes = std::min(num_frames, 8);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_frames) * dim, dim * modes);
  for (int k = 0; k < modes; ++k) {
    Eigen::VectorXd mode(num_frames);
    for (int i = 0; i < num_frames; ++i) mode[i] = std::cos(std::numbers::pi * k * (i + 0.5) / num_frames);
    mode.normalize();
    for (int c = 0; c < dim; ++c) {
      for (int i = 0; i < num_frames; ++i) basis(static_cast<Eigen::Index>(i) * dim + c, k * dim + c) = mode[i];
    }
  }
  return OracleDenoiser::from_basis(basis, Eigen::VectorXd::Zero(basis.rows()));
}

Models build_models(const io::RunConfig& c, const MotionSequence& motion) {
  Models models;
  models.human = HumanModel::with_face_centroids(load_body(c));
  if (c.optim.weights.msds > 0.0) {
    PriorModel prior;
    prior.schedule = build_schedule(c.schedule.steps, c.schedule.beta_start, c.schedule.beta_end);
    prior.msds = c.msds;
    if (c.denoiser_path.empty()) {
      prior.denoiser = {default_oracle(motion.num_frames(), motion.num_pose_joints()), c.condition};
    } else {
      prior.denoiser = io::load_denoiser(c.denoiser_path);
      if (prior.denoiser.condition.empty()) prior.denoiser.condition = c.condition;
    }
    if (prior.denoiser.dim() != motion.flat_dim()) {
      fail(ErrorCode::ShapeMismatch, "denoiser dimension " + std::to_string(prior.denoiser.dim()) +
                                         " does not match the motion (" + std::to_string(motion.flat_dim()) + ")");
    }
    prior.msds.validate(prior.schedule);
    models.prior = std::move(prior);
  }
  return models;
}

// Stand-off point in front of the first object, on the side facing the start.
Eigen::Vector3d default_goal(const Eigen::Vector3d& start, const Scene& scene, double clearance) {
  if (scene.objects.empty()) fail(ErrorCode::InvalidArgument, "no goal configured and no object to walk to");
  const Aabb box = scene.objects.front().aabb();
  Eigen::Vector3d nearest = start.cwiseMax(box.min).cwiseMin(box.max);
  nearest.z() = start.z();
  Eigen::Vector2d away = (start - nearest).head<2>();
  if (away.norm() < 1e-9) fail(ErrorCode::InvalidArgument, "start lies over the object's footprint");
  away.normalize();
  Eigen::Vector3d goal = nearest;
  goal.head<2>() += (clearance + 0.25) * away;
  return goal;
}

MotionSequence initial_or_loaded(const Options& o, const TrajectoryPlan& plan, const BodyModel& body) {
  if (!o.motion.empty()) return io::load_motion(o.motion);
  return initial_motion(plan.trajectory, body.num_pose_joints(), plan.fps);
}

int cmd_plan(const Options& o) {
  const io::RunConfig c = load_run_config(o);
  const Scene scene = load_scene(o);
  PlanRequest req;
  req.instruction = c.plan.instruction;
  req.start = c.plan.start;
  req.goal = c.plan.goal ? *c.plan.goal : default_goal(c.plan.start, scene, c.plan.clearance);
  for (const SceneObject& obj : scene.objects) req.obstacles.push_back(obj.aabb());
  req.clearance = c.plan.clearance;
  req.walking_speed = c.plan.walking_speed;
  req.fps = c.plan.fps;
  req.num_frames = c.plan.num_frames;
  req.offline = o.offline;
  if (!o.offline) req.endpoint = LlmEndpoint::from_environment();
  const TrajectoryPlan plan = make_plan(req);
  if (plan.source == PlanSource::Fallback && !plan.fallback_reason.empty()) {
    std::cerr << "planner: using fallback (" << plan.fallback_reason << ")\n";
  }
  emit(o, io::dump_plan(plan));
  return 0;
}

int cmd_optimize(const Options& o) {
  const io::RunConfig c = load_run_config(o);
  if (o.plan.empty()) fail(ErrorCode::InvalidArgument, "optimize needs --plan");
  const TrajectoryPlan plan = io::load_plan(o.plan);
  const Scene scene = load_scene(o);
  const BodyModel body = load_body(c);
  const MotionSequence x0 = initial_or_loaded(o, plan, body);
  const Models models = build_models(c, x0);
  const OptimReport report = optimize(x0, scene, plan.trajectory, models, c.optim);
  emit(o, io::dump_report(report));
  if (!o.motion_out.empty()) io::save_motion(o.motion_out, report.final_motion);
  return 0;
}

int cmd_eval(const Options& o) {
  const io::RunConfig c = load_run_config(o);
  if (o.motion.empty()) fail(ErrorCode::InvalidArgument, "eval needs --motion");
  const MotionSequence motion = io::load_motion(o.motion);
  const BodyModel body = load_body(c);
  const PoseEncoder encoder =
      c.encoder_path.empty() ? PoseEncoder::identity(3 * motion.num_pose_joints()) : io::load_encoder(c.encoder_path);
  emit(o, io::dump_metrics(evaluate_metrics(motion, body, encoder)));
  return 0;
}

int cmd_render(const Options& o) {
  const io::RunConfig c = load_run_config(o);
  if (o.motion.empty()) fail(ErrorCode::InvalidArgument, "render needs --motion");
  if (o.out.empty()) fail(ErrorCode::InvalidArgument, "render needs --out (.png or .ppm)");
  const MotionSequence motion = io::load_motion(o.motion);
  if (o.frame < 0 || o.frame >= motion.num_frames()) {
    fail(ErrorCode::InvalidArgument, "--frame must be in [0, " + std::to_string(motion.num_frames()) + ")");
  }
  const Scene scene = load_scene(o);
  const HumanModel human = HumanModel::with_face_centroids(load_body(c));
  const Frame& frame = motion.frames[static_cast<std::size_t>(o.frame)];
  const Eigen::Matrix3Xd posed = lbs_skin(human.body, forward_kinematics(human.body, frame).skinning);
  const Eigen::Matrix3Xd points = deform_points(human.binding, posed, human.body.faces());

  const io::RenderSettings& rs = c.render;
  GaussianCloud cloud = GaussianCloud::isotropic(points, rs.splat_scale, {0.85, 0.55, 0.45}, 0.9);
  for (const SceneObject& obj : scene.objects) {
    cloud.append(GaussianCloud::isotropic(obj.points(), rs.splat_scale, {0.35, 0.45, 0.6}, 0.9));
  }
  Camera camera = Camera::look_at(rs.eye, rs.target, Eigen::Vector3d::UnitZ(), rs.focal, rs.width,
                                  rs.height);
  camera.background = rs.background;
  write_image(render_frame(cloud, camera), o.out);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  io::RunConfig c = load_run_config(o);
  if (o.plan.empty()) fail(ErrorCode::InvalidArgument, "gradcheck needs --plan");
  const TrajectoryPlan plan = io::load_plan(o.plan);
  const Scene scene = load_scene(o);
  const BodyModel body = load_body(c);
  const MotionSequence x = initial_or_loaded(o, plan, body);
  LossWeights weights = c.optim.weights;
  // The sampled MSDS term has no finite-difference oracle; it is checked only
  // in fixed-step mode against its closed form.
  if (!c.msds.fixed_t) weights.msds = 0.0;
  c.optim.weights = weights;
  const Models models = build_models(c, x);
  const FdCheckResult r = finite_diff_check(x, scene, plan.trajectory, models, weights, c.gradcheck);
  const bool passed = r.max_rel_error <= 1e-4 && r.msds_max_abs_error <= 1e-6;
  nlohmann::json j = {{"version", io::kFormatVersion},
                      {"max_rel_error", r.max_rel_error},
                      {"msds_max_abs_error", r.msds_max_abs_error},
                      {"checked", r.checked},
                      {"skipped", r.skipped},
                      {"passed", passed}};
  emit(o, j.dump(1) + "\n");
  return passed ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion optimization with a diffusion prior, trajectory and collision constraints"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--scene", o.scene, "scene objects (JSON)");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
    sub->add_option("--seed", o.seed, "overrides the config seed");
    sub->add_flag("--offline", o.offline, "never contact the planning service");
  };
  CLI::App* plan = app.add_subcommand("plan", "plan a root trajectory");
  common(plan);
  CLI::App* opt = app.add_subcommand("optimize", "optimize a motion");
  common(opt);
  opt->add_option("--plan", o.plan, "plan file from `plan`")->required();
  opt->add_option("--motion", o.motion, "initial motion (default: rest pose along the plan)");
  opt->add_option("--motion-out", o.motion_out, "write the optimized motion here");
  CLI::App* eval = app.add_subcommand("eval", "motion metrics");
  common(eval);
  eval->add_option("--motion", o.motion, "motion file")->required();
  CLI::App* render = app.add_subcommand("render", "render one frame");
  common(render);
  render->add_option("--motion", o.motion, "motion file")->required();
  render->add_option("--frame", o.frame, "frame index");
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  common(grad);
  grad->add_option("--plan", o.plan, "plan file")->required();
  grad->add_option("--motion", o.motion, "motion to check at");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*plan) return cmd_plan(o);
    if (*opt) return cmd_optimize(o);
    if (*eval) return cmd_eval(o);
    if (*render) return cmd_render(o);
    return cmd_gradcheck(o);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
