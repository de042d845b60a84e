#pragma once

// JSON file formats. Every file carries "version": 1; lengths are meters.
// Loaders throw ParseError naming the offending field (or the byte offset of
// a syntax error) and VersionMismatch for other versions.

#include "msdi/diffusion_prior.hpp"
#include "msdi/metrics.hpp"
#include "msdi/motion_model.hpp"
#include "msdi/optimizer.hpp"
#include "msdi/planner.hpp"

#include <optional>
#include <string>

namespace msdi::io {

inline constexpr int kFormatVersion = 1;
/// Default upper bound of the MSDS step range in run configs.
inline constexpr int kDefaultMaxStep = 20;

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

BodyModel parse_body(const std::string& text);
std::string dump_body(const BodyModel& body);
BodyModel load_body(const std::string& path);

/// Accepts {"objects": [...]} or a single {"object": {...}}; each object has
/// points, normals and an optional name.
Scene parse_scene(const std::string& text);
std::string dump_scene(const Scene& scene);
Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& scene);

/// Rejects motions with fewer than 2 frames.
MotionSequence parse_motion(const std::string& text);
std::string dump_motion(const MotionSequence& motion);
MotionSequence load_motion(const std::string& path);
void save_motion(const std::string& path, const MotionSequence& motion);

/// {"type": "oracle", "projection" | "basis", "offset"} or
/// {"type": "neural", "activation", "layers": [{rows, cols, weights, bias}],
/// "embeddings": {condition: [...]}}; optional "condition".
DenoiserModel parse_denoiser(const std::string& text);
std::string dump_denoiser(const DenoiserModel& model);
DenoiserModel load_denoiser(const std::string& path);

PoseEncoder parse_encoder(const std::string& text);
std::string dump_encoder(const PoseEncoder& encoder);
PoseEncoder load_encoder(const std::string& path);

TrajectoryPlan parse_plan(const std::string& text);
std::string dump_plan(const TrajectoryPlan& plan);
TrajectoryPlan load_plan(const std::string& path);
void save_plan(const std::string& path, const TrajectoryPlan& plan);

/// Per-iteration records plus the final motion.
std::string dump_report(const OptimReport& report);
std::string dump_metrics(const MetricReport& metrics);

struct ScheduleSettings {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct PlanSettings {
  std::string instruction = "walk to the object";
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  /// Absent: in front of the first object's box, on the start's side.
  std::optional<Eigen::Vector3d> goal;
  double clearance = 0.3;
  double walking_speed = 1.0;
  double fps = 30.0;
  int num_frames = 0;
};

struct RenderSettings {
  int width = 128;
  int height = 128;
  double focal = 120.0;
  Eigen::Vector3d eye{4.0, -4.0, 2.5};
  Eigen::Vector3d target{0.0, 0.0, 0.8};
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  double splat_scale = 0.03;
};

/// Everything the command-line tool reads from --config. Relative paths are
/// resolved against the config file's directory; empty paths select the
/// built-in body, denoiser and encoder.
struct RunConfig {
  OptimConfig optim;
  ScheduleSettings schedule;
  MsdsConfig msds;
  std::string body_path;
  std::string denoiser_path;
  std::string encoder_path;
  std::string condition = "walk";
  PlanSettings plan;
  RenderSettings render;
  FdCheckOptions gradcheck;
};

RunConfig parse_config(const std::string& text, const std::string& base_dir = "");
std::string dump_config(const RunConfig& config);
RunConfig load_config(const std::string& path);

}  // namespace msdi::io
