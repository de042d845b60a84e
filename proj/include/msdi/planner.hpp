#pragma once

#include "msdi/constraints.hpp"
#include "msdi/motion_model.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace msdi {

struct Waypoint {
  double time = 0.0;  // seconds
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

enum class PlanSource { Llm, Fallback };

std::string_view to_string(PlanSource source);

struct TrajectoryPlan {
  std::vector<Waypoint> waypoints;
  std::string instruction;
  std::string motion_prompt;
  PlanSource source = PlanSource::Fallback;
  double duration_s = 0.0;
  double fps = 30.0;
  /// Per-frame root targets, 3 x N.
  Eigen::Matrix3Xd trajectory;
  /// Why the LLM plan was not used, when source is Fallback.
  std::string fallback_reason;
};

/// Straight line from start to goal unless it passes within `clearance` of an
/// obstacle box; blocked segments are replaced by detours around the box in
/// the horizontal plane, taking the shorter side (left on ties). The result
/// is verified by sampling every 0.05 m. Throws NoPathFound when the goal or
/// start lies inside an inflated obstacle or no clear detour is found.
std::vector<Eigen::Vector3d> plan_fallback(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                                           const std::vector<Aabb>& obstacles, double clearance);
std::vector<Eigen::Vector3d> plan_fallback(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                                           const std::vector<SceneObject>& obstacles, double clearance);

/// Inserts detours into any segment of `path` that is blocked.
std::vector<Eigen::Vector3d> refine_path(std::vector<Eigen::Vector3d> path, const std::vector<Aabb>& obstacles,
                                         double clearance);

/// True when no sample taken every `step` meters along the path lies inside
/// an obstacle box inflated by `clearance`.
bool path_is_clear(const std::vector<Eigen::Vector3d>& path, const std::vector<Aabb>& obstacles, double clearance,
                   double step = 0.05);

double path_length(const std::vector<Eigen::Vector3d>& path);

/// Constant-speed resampling by arc length; endpoints are exact.
Eigen::Matrix3Xd interpolate(const std::vector<Eigen::Vector3d>& waypoints, int num_frames, double fps);

/// Timestamps proportional to arc length over `duration_s`.
std::vector<Waypoint> timestamp(const std::vector<Eigen::Vector3d>& path, double duration_s);

struct LlmEndpoint {
  /// e.g. http://127.0.0.1:8080/plan
  std::string url;
  std::string token;
  double timeout_s = 10.0;

  /// Reads MSDI_LLM_ENDPOINT and MSDI_LLM_TOKEN.
  static LlmEndpoint from_environment();
};

struct LlmReply {
  std::vector<Eigen::Vector3d> waypoints;
  double duration_s = 0.0;
  std::string motion_prompt;
};

/// Request body sent to the planning service.
std::string llm_request_body(const std::string& instruction, const Eigen::Vector3d& start, const Aabb* object_aabb);

/// Throws SchemaError unless the reply has >= 2 finite 3D waypoints, a
/// positive duration_s and a motion_prompt string.
LlmReply parse_llm_reply(const std::string& body);

/// Blocking POST. Throws PlannerUnavailable on transport or HTTP failure and
/// SchemaError on a malformed reply.
LlmReply request_llm_plan(const LlmEndpoint& endpoint, const std::string& instruction, const Eigen::Vector3d& start,
                          const Aabb* object_aabb);

struct PlanRequest {
  std::string instruction;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  /// Used by the fallback planner.
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  std::vector<Aabb> obstacles;
  double clearance = 0.3;
  /// Fallback duration is path length / walking speed.
  double walking_speed = 1.0;
  /// 0 derives the frame count from duration * fps + 1.
  int num_frames = 0;
  double fps = 30.0;
  bool offline = true;
  LlmEndpoint endpoint;
};

/// LLM plan refined against the obstacles, or the fallback planner when the
/// service is offline, unreachable or returns something unusable.
TrajectoryPlan make_plan(const PlanRequest& request);

/// Rest-pose motion following the plan, facing along the horizontal path
/// tangent (body forward is +x).
MotionSequence initial_motion(const Eigen::Matrix3Xd& trajectory, int pose_joints, double fps);

}  // namespace msdi
