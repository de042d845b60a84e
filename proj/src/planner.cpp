#include "msdi/planner.hpp"

#include <httplib.h>
#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>

namespace msdi {

using nlohmann::json;

std::string_view to_string(PlanSource source) { return source == PlanSource::Llm ? "llm" : "fallback"; }

namespace {

// Detour corners sit this far outside the clearance-inflated box.
constexpr double kDetourPad = 1e-3;
constexpr int kMaxRefinements = 256;

bool segment_hits_box(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Aabb& box) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector3d d = p1 - p0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (p0[a] < box.min[a] || p0[a] > box.max[a]) return false;
      continue;
    }
    double ta = (box.min[a] - p0[a]) / d[a];
    double tb = (box.max[a] - p0[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool overlaps_xy(const Aabb& a, const Aabb& b) {
  return a.min.x() <= b.max.x() && b.min.x() <= a.max.x() && a.min.y() <= b.max.y() && b.min.y() <= a.max.y();
}

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain, counter-clockwise, collinear points dropped.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i > 0; --i) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0.0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

double chain_length(const Eigen::Vector2d& a, const std::vector<Eigen::Vector2d>& chain, const Eigen::Vector2d& b) {
  double len = 0.0;
  Eigen::Vector2d prev = a;
  for (const auto& p : chain) {
    len += (p - prev).norm();
    prev = p;
  }
  return len + (b - prev).norm();
}

// Corners to visit when going around `cluster` on the way from a to b.
std::vector<Eigen::Vector3d> detour(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const std::vector<Aabb>& cluster) {
  const Eigen::Vector2d a2 = a.head<2>(), b2 = b.head<2>();
  if ((b2 - a2).norm() < 1e-12) fail(ErrorCode::NoPathFound, "vertical segment is blocked; no horizontal detour exists");
  std::vector<Eigen::Vector2d> pts = {a2, b2};
  for (const Aabb& box : cluster) {
    pts.emplace_back(box.min.x(), box.min.y());
    pts.emplace_back(box.max.x(), box.min.y());
    pts.emplace_back(box.max.x(), box.max.y());
    pts.emplace_back(box.min.x(), box.max.y());
  }
  const std::vector<Eigen::Vector2d> hull = convex_hull(pts);
  const auto find = [&](const Eigen::Vector2d& p) {
    for (std::size_t i = 0; i < hull.size(); ++i) {
      if (hull[i] == p) return static_cast<int>(i);
    }
    return -1;
  };
  const int ia = find(a2), ib = find(b2);
  if (ia < 0 || ib < 0) fail(ErrorCode::NoPathFound, "path endpoint lies within the detour envelope of an obstacle");

  const int h = static_cast<int>(hull.size());
  std::vector<Eigen::Vector2d> right, left;  // counter-clockwise from a passes on the right
  for (int i = (ia + 1) % h; i != ib; i = (i + 1) % h) right.push_back(hull[i]);
  for (int i = (ia - 1 + h) % h; i != ib; i = (i - 1 + h) % h) left.push_back(hull[i]);
  const double len_left = chain_length(a2, left, b2);
  const double len_right = chain_length(a2, right, b2);
  const auto& chosen = len_right < len_left - 1e-12 ? right : left;

  const Eigen::Vector2d dir = b2 - a2;
  std::vector<Eigen::Vector3d> out;
  for (const auto& p : chosen) {
    const double s = std::clamp((p - a2).dot(dir) / dir.squaredNorm(), 0.0, 1.0);
    out.emplace_back(p.x(), p.y(), a.z() + s * (b.z() - a.z()));
  }
  return out;
}

void drop_repeats(std::vector<Eigen::Vector3d>& path) {
  path.erase(std::unique(path.begin(), path.end(), [](const auto& a, const auto& b) { return a == b; }), path.end());
}

}  // namespace

bool path_is_clear(const std::vector<Eigen::Vector3d>& path, const std::vector<Aabb>& obstacles, double clearance,
                   double step) {
  std::vector<Aabb> inflated;
  for (const Aabb& o : obstacles) inflated.push_back(o.inflated(clearance));
  auto clear = [&](const Eigen::Vector3d& p) {
    return std::none_of(inflated.begin(), inflated.end(), [&](const Aabb& b) { return b.contains(p); });
  };
  if (path.empty()) return true;
  if (!clear(path.front())) return false;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double len = (path[k + 1] - path[k]).norm();
    const int samples = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int s = 1; s <= samples; ++s) {
      const double t = static_cast<double>(s) / samples;
      if (!clear(path[k] + t * (path[k + 1] - path[k]))) return false;
    }
  }
  return true;
}

std::vector<Eigen::Vector3d> refine_path(std::vector<Eigen::Vector3d> path, const std::vector<Aabb>& obstacles,
                                         double clearance) {
  if (!(clearance > 0.0)) fail(ErrorCode::InvalidArgument, "clearance must be positive");
  if (path.size() < 2) fail(ErrorCode::TooFewWaypoints, "a path needs at least 2 points");
  std::vector<Aabb> inflated, padded;
  for (const Aabb& o : obstacles) {
    inflated.push_back(o.inflated(clearance));
    padded.push_back(o.inflated(clearance + kDetourPad));
  }
  for (const auto* end : {&path.front(), &path.back()}) {
    for (std::size_t o = 0; o < inflated.size(); ++o) {
      if (inflated[o].contains(*end)) {
        fail(ErrorCode::NoPathFound, "path endpoint lies inside the clearance zone of obstacle " + std::to_string(o));
      }
    }
  }
  drop_repeats(path);

  for (int iter = 0; iter < kMaxRefinements; ++iter) {
    std::size_t seg = path.size();
    std::size_t hit = 0;
    for (std::size_t k = 0; k + 1 < path.size() && seg == path.size(); ++k) {
      for (std::size_t o = 0; o < inflated.size(); ++o) {
        if (segment_hits_box(path[k], path[k + 1], inflated[o])) {
          seg = k;
          hit = o;
          break;
        }
      }
    }
    if (seg == path.size()) break;

    // Obstacles whose detour envelopes touch form one cluster.
    std::vector<bool> member(padded.size(), false);
    member[hit] = true;
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t o = 0; o < padded.size(); ++o) {
        if (member[o]) continue;
        for (std::size_t m = 0; m < padded.size(); ++m) {
          if (member[m] && overlaps_xy(padded[o], padded[m])) {
            member[o] = true;
            grew = true;
            break;
          }
        }
      }
    }
    std::vector<Aabb> cluster;
    for (std::size_t o = 0; o < padded.size(); ++o) {
      if (member[o]) cluster.push_back(padded[o]);
    }
    const std::vector<Eigen::Vector3d> corners = detour(path[seg], path[seg + 1], cluster);
    if (corners.empty()) fail(ErrorCode::NoPathFound, "no detour found around obstacle " + std::to_string(hit));
    path.insert(path.begin() + static_cast<std::ptrdiff_t>(seg) + 1, corners.begin(), corners.end());
    drop_repeats(path);
  }
  if (!path_is_clear(path, obstacles, clearance)) fail(ErrorCode::NoPathFound, "could not find a collision-free path");
  return path;
}

std::vector<Eigen::Vector3d> plan_fallback(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                                           const std::vector<Aabb>& obstacles, double clearance) {
  if (start == goal) fail(ErrorCode::InvalidArgument, "start and goal coincide");
  return refine_path({start, goal}, obstacles, clearance);
}

std::vector<Eigen::Vector3d> plan_fallback(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                                           const std::vector<SceneObject>& obstacles, double clearance) {
  std::vector<Aabb> boxes;
  for (const auto& o : obstacles) boxes.push_back(o.aabb());
  return plan_fallback(start, goal, boxes, clearance);
}

double path_length(const std::vector<Eigen::Vector3d>& path) {
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) len += (path[k + 1] - path[k]).norm();
  return len;
}

Eigen::Matrix3Xd interpolate(const std::vector<Eigen::Vector3d>& waypoints, int num_frames, double fps) {
  if (waypoints.size() < 2) fail(ErrorCode::TooFewWaypoints, "interpolation needs at least 2 waypoints");
  if (num_frames < 2) fail(ErrorCode::TooFewFrames, "interpolation needs at least 2 frames");
  if (!(fps > 0.0)) fail(ErrorCode::InvalidArgument, "fps must be positive");
  std::vector<double> arc(waypoints.size(), 0.0);
  for (std::size_t k = 1; k < waypoints.size(); ++k) arc[k] = arc[k - 1] + (waypoints[k] - waypoints[k - 1]).norm();
  const double total = arc.back();

  Eigen::Matrix3Xd out(3, num_frames);
  for (int i = 0; i < num_frames; ++i) {
    const double s = total * i / (num_frames - 1);
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t k = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
    k = std::min(k, waypoints.size() - 2);
    // Skip zero-length segments.
    while (k + 2 < waypoints.size() && arc[k + 1] - arc[k] <= 0.0) ++k;
    const double seg = arc[k + 1] - arc[k];
    const double t = seg > 0.0 ? std::clamp((s - arc[k]) / seg, 0.0, 1.0) : 0.0;
    out.col(i) = waypoints[k] + t * (waypoints[k + 1] - waypoints[k]);
  }
  out.col(0) = waypoints.front();
  out.col(num_frames - 1) = waypoints.back();
  return out;
}

std::vector<Waypoint> timestamp(const std::vector<Eigen::Vector3d>& path, double duration_s) {
  const double total = path_length(path);
  std::vector<Waypoint> out;
  double arc = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (k > 0) arc += (path[k] - path[k - 1]).norm();
    const double frac = total > 0.0 ? arc / total : static_cast<double>(k) / std::max<std::size_t>(1, path.size() - 1);
    out.push_back({duration_s * frac, path[k]});
  }
  return out;
}

LlmEndpoint LlmEndpoint::from_environment() {
  LlmEndpoint e;
  if (const char* url = std::getenv("MSDI_LLM_ENDPOINT")) e.url = url;
  if (const char* token = std::getenv("MSDI_LLM_TOKEN")) e.token = token;
  return e;
}

std::string llm_request_body(const std::string& instruction, const Eigen::Vector3d& start, const Aabb* object_aabb) {
  json body;
  body["instruction"] = instruction;
  body["start"] = {start.x(), start.y(), start.z()};
  if (object_aabb) {
    body["object_aabb"] = {{"min", {object_aabb->min.x(), object_aabb->min.y(), object_aabb->min.z()}},
                           {"max", {object_aabb->max.x(), object_aabb->max.y(), object_aabb->max.z()}}};
  } else {
    body["object_aabb"] = nullptr;
  }
  return body.dump();
}

LlmReply parse_llm_reply(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, std::string("reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::SchemaError, "reply must be a JSON object");
  for (const char* key : {"waypoints", "duration_s", "motion_prompt"}) {
    if (!j.contains(key)) fail(ErrorCode::SchemaError, std::string("reply is missing '") + key + "'");
  }
  const json& wps = j["waypoints"];
  if (!wps.is_array() || wps.size() < 2) fail(ErrorCode::SchemaError, "'waypoints' must hold at least 2 points");
  LlmReply reply;
  for (const json& w : wps) {
    if (!w.is_array() || w.size() != 3) fail(ErrorCode::SchemaError, "each waypoint must be [x, y, z]");
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) {
      if (!w[a].is_number()) fail(ErrorCode::SchemaError, "waypoint coordinates must be numbers");
      p[a] = w[a].get<double>();
    }
    if (!p.allFinite()) fail(ErrorCode::SchemaError, "waypoint coordinates must be finite");
    reply.waypoints.push_back(p);
  }
  if (!j["duration_s"].is_number() || !(j["duration_s"].get<double>() > 0.0) ||
      !std::isfinite(j["duration_s"].get<double>())) {
    fail(ErrorCode::SchemaError, "'duration_s' must be a positive number");
  }
  reply.duration_s = j["duration_s"].get<double>();
  if (!j["motion_prompt"].is_string()) fail(ErrorCode::SchemaError, "'motion_prompt' must be a string");
  reply.motion_prompt = j["motion_prompt"].get<std::string>();
  return reply;
}

LlmReply request_llm_plan(const LlmEndpoint& endpoint, const std::string& instruction, const Eigen::Vector3d& start,
                          const Aabb* object_aabb) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint.url, m, url_re)) {
    fail(ErrorCode::PlannerUnavailable, "endpoint URL '" + endpoint.url + "' is not http(s)://host[:port]/path");
  }
  const std::string base = m[1].str();
  const std::string path = m[2].matched ? m[2].str() : "/";

  httplib::Client client(base);
  if (!client.is_valid()) fail(ErrorCode::PlannerUnavailable, "cannot create a client for " + base);
  const auto secs = static_cast<time_t>(endpoint.timeout_s);
  const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!endpoint.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint.token);

  const auto res = client.Post(path, headers, llm_request_body(instruction, start, object_aabb), "application/json");
  if (!res) fail(ErrorCode::PlannerUnavailable, "request to " + endpoint.url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    fail(ErrorCode::PlannerUnavailable, "planner returned HTTP " + std::to_string(res->status));
  }
  return parse_llm_reply(res->body);
}

TrajectoryPlan make_plan(const PlanRequest& request) {
  if (!(request.fps > 0.0)) fail(ErrorCode::InvalidArgument, "fps must be positive");
  if (!(request.walking_speed > 0.0)) fail(ErrorCode::InvalidArgument, "walking speed must be positive");
  TrajectoryPlan plan;
  plan.instruction = request.instruction;
  plan.fps = request.fps;
  std::vector<Eigen::Vector3d> path;

  if (request.offline) {
    plan.fallback_reason = "offline";
  } else if (request.endpoint.url.empty()) {
    plan.fallback_reason = "no planner endpoint configured";
  } else {
    try {
      const Aabb* object = request.obstacles.empty() ? nullptr : &request.obstacles.front();
      const LlmReply reply = request_llm_plan(request.endpoint, request.instruction, request.start, object);
      path = refine_path(reply.waypoints, request.obstacles, request.clearance);
      plan.duration_s = reply.duration_s;
      plan.motion_prompt = reply.motion_prompt;
      plan.source = PlanSource::Llm;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PlannerUnavailable && e.code() != ErrorCode::SchemaError &&
          e.code() != ErrorCode::NoPathFound && e.code() != ErrorCode::TooFewWaypoints) {
        throw;
      }
      plan.fallback_reason = e.what();
      path.clear();
    }
  }

  if (plan.source == PlanSource::Fallback) {
    path = plan_fallback(request.start, request.goal, request.obstacles, request.clearance);
    plan.duration_s = path_length(path) / request.walking_speed;
    plan.motion_prompt = request.instruction;
  }

  const int frames = request.num_frames > 0
                         ? request.num_frames
                         : std::max(2, static_cast<int>(std::lround(plan.duration_s * request.fps)) + 1);
  plan.trajectory = interpolate(path, frames, request.fps);
  plan.waypoints = timestamp(path, plan.duration_s);
  return plan;
}

MotionSequence initial_motion(const Eigen::Matrix3Xd& trajectory, int pose_joints, double fps) {
  const int n = static_cast<int>(trajectory.cols());
  MotionSequence motion = MotionSequence::rest(n, pose_joints, fps);
  double heading = 0.0;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - 1), hi = std::min(n - 1, i + 1);
    const Eigen::Vector2d tangent = (trajectory.col(hi) - trajectory.col(lo)).head<2>();
    if (tangent.norm() > 1e-9) heading = std::atan2(tangent.y(), tangent.x());
    motion.frames[i].translation = trajectory.col(i);
    motion.frames[i].orientation =
        matrix_to_rot6d(Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()).toRotationMatrix());
  }
  return motion;
}

}  // namespace msdi
