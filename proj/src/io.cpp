#include "msdi/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace msdi::io {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& field, const std::string& what) {
  fail(ErrorCode::ParseError, "field '" + field + "': " + what);
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what());
  }
}

json parse_versioned(const std::string& text) {
  json j = parse_json(text);
  if (!j.is_object()) parse_fail("<root>", "expected an object");
  if (!j.contains("version")) parse_fail("version", "missing");
  if (!j["version"].is_number_integer()) parse_fail("version", "expected an integer");
  const int version = j["version"].get<int>();
  if (version != kFormatVersion) {
    fail(ErrorCode::VersionMismatch,
         "file version " + std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
  }
  return j;
}

std::string join(const std::string& ctx, const std::string& key) { return ctx.empty() ? key : ctx + "." + key; }

const json& field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object()) parse_fail(ctx, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) parse_fail(join(ctx, key), "missing");
  return *it;
}

const json* optional_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object()) parse_fail(ctx, "expected an object");
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& ctx) {
  if (!j.is_number()) parse_fail(ctx, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& ctx) {
  if (!j.is_number_integer()) parse_fail(ctx, "expected an integer");
  return j.get<int>();
}

bool as_bool(const json& j, const std::string& ctx) {
  if (!j.is_boolean()) parse_fail(ctx, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& ctx) {
  if (!j.is_string()) parse_fail(ctx, "expected a string");
  return j.get<std::string>();
}

const json& as_array(const json& j, const std::string& ctx) {
  if (!j.is_array()) parse_fail(ctx, "expected an array");
  return j;
}

std::string at(const std::string& ctx, std::size_t i) { return ctx + "[" + std::to_string(i) + "]"; }

Eigen::VectorXd as_vector(const json& j, const std::string& ctx) {
  as_array(j, ctx);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], at(ctx, i));
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> as_fixed(const json& j, const std::string& ctx) {
  const Eigen::VectorXd v = as_vector(j, ctx);
  if (v.size() != N) parse_fail(ctx, "expected " + std::to_string(N) + " numbers");
  return v;
}

/// Nested rows.
Eigen::MatrixXd as_matrix(const json& j, const std::string& ctx, Eigen::Index expected_cols = -1) {
  as_array(j, ctx);
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = expected_cols;
  if (cols < 0) cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = as_vector(j[static_cast<std::size_t>(r)], at(ctx, static_cast<std::size_t>(r)));
    if (row.size() != cols) parse_fail(at(ctx, static_cast<std::size_t>(r)), "expected " + std::to_string(cols) + " entries");
    m.row(r) = row.transpose();
  }
  return m;
}

/// Rows x cols from either nested rows or a flat row-major list.
Eigen::MatrixXd as_sized_matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& ctx) {
  as_array(j, ctx);
  if (!j.empty() && !j[0].is_array()) {
    const Eigen::VectorXd flat = as_vector(j, ctx);
    if (flat.size() != rows * cols) parse_fail(ctx, "expected " + std::to_string(rows * cols) + " entries");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), rows,
                                                                                                   cols);
  }
  if (static_cast<Eigen::Index>(j.size()) != rows) parse_fail(ctx, "expected " + std::to_string(rows) + " rows");
  return as_matrix(j, ctx, cols);
}

Eigen::Matrix3Xd as_points(const json& j, const std::string& ctx) {
  return as_matrix(j, ctx, 3).transpose();
}

json vector_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

json points_json(const Eigen::Matrix3Xd& p) { return matrix_json(p.transpose()); }

json versioned() { return json{{"version", kFormatVersion}}; }

std::string dump(const json& j) { return j.dump(1) + "\n"; }

// Builds an object through a lambda and rethrows construction errors as
// parse errors on `ctx`, since they come from file content.
template <typename F>
auto construct(const std::string& ctx, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::VersionMismatch) throw;
    fail(ErrorCode::ParseError, "field '" + ctx + "': " + e.what());
  }
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << text;
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

// ---- body

BodyModel parse_body(const std::string& text) {
  const json j = parse_versioned(text);
  const Eigen::Matrix3Xd points = as_points(field(j, "template_points", ""), "template_points");
  const Eigen::MatrixXd faces_d = as_matrix(field(j, "faces", ""), "faces", 3);
  Eigen::Matrix3Xi faces(3, faces_d.rows());
  for (Eigen::Index f = 0; f < faces_d.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const double v = faces_d(f, c);
      if (v != std::floor(v)) parse_fail(at("faces", static_cast<std::size_t>(f)), "indices must be integers");
      faces(c, f) = static_cast<int>(v);
    }
  }
  const Eigen::Matrix3Xd joints = as_points(field(j, "rest_joints", ""), "rest_joints");
  const json& parent_j = as_array(field(j, "parent", ""), "parent");
  std::vector<int> parent;
  for (std::size_t i = 0; i < parent_j.size(); ++i) parent.push_back(as_int(parent_j[i], at("parent", i)));
  const Eigen::MatrixXd weights = as_matrix(field(j, "weights", ""), "weights", joints.cols());
  // Body invariants stay InvalidBody so callers can tell bad rigs from bad JSON.
  return BodyModel(points, faces, joints, std::move(parent), weights);
}

std::string dump_body(const BodyModel& body) {
  json j = versioned();
  j["template_points"] = points_json(body.template_points());
  json faces = json::array();
  for (int f = 0; f < body.num_faces(); ++f) faces.push_back({body.faces()(0, f), body.faces()(1, f), body.faces()(2, f)});
  j["faces"] = faces;
  j["rest_joints"] = points_json(body.rest_joints());
  j["parent"] = body.parent();
  j["weights"] = matrix_json(body.weights());
  return dump(j);
}

BodyModel load_body(const std::string& path) { return parse_body(read_text(path)); }

// ---- scene

namespace {

SceneObject parse_object(const json& j, const std::string& ctx) {
  const Eigen::Matrix3Xd points = as_points(field(j, "points", ctx), join(ctx, "points"));
  const Eigen::Matrix3Xd normals = as_points(field(j, "normals", ctx), join(ctx, "normals"));
  std::string name = "object";
  if (const json* n = optional_field(j, "name", ctx)) name = as_string(*n, join(ctx, "name"));
  return construct(ctx, [&] { return SceneObject(name, points, normals); });
}

}  // namespace

Scene parse_scene(const std::string& text) {
  const json j = parse_versioned(text);
  Scene scene;
  if (const json* objects = optional_field(j, "objects", "")) {
    as_array(*objects, "objects");
    for (std::size_t i = 0; i < objects->size(); ++i) scene.objects.push_back(parse_object((*objects)[i], at("objects", i)));
  } else if (const json* object = optional_field(j, "object", "")) {
    scene.objects.push_back(parse_object(*object, "object"));
  } else {
    parse_fail("objects", "missing");
  }
  return scene;
}

std::string dump_scene(const Scene& scene) {
  json j = versioned();
  j["units"] = "meters";
  json objects = json::array();
  for (const SceneObject& o : scene.objects) {
    objects.push_back({{"name", o.name()}, {"points", points_json(o.points())}, {"normals", points_json(o.normals())}});
  }
  j["objects"] = objects;
  return dump(j);
}

Scene load_scene(const std::string& path) { return parse_scene(read_text(path)); }
void save_scene(const std::string& path, const Scene& scene) { write_text(path, dump_scene(scene)); }

// ---- motion

MotionSequence parse_motion(const std::string& text) {
  const json j = parse_versioned(text);
  MotionSequence m;
  m.fps = as_number(field(j, "fps", ""), "fps");
  const int joints = as_int(field(j, "num_pose_joints", ""), "num_pose_joints");
  if (joints < 0) parse_fail("num_pose_joints", "must be nonnegative");
  const json& frames = as_array(field(j, "frames", ""), "frames");
  if (frames.size() < 2) parse_fail("frames", "a motion needs at least 2 frames, got " + std::to_string(frames.size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string ctx = at("frames", i);
    Frame f;
    f.translation = as_fixed<3>(field(frames[i], "translation", ctx), join(ctx, "translation"));
    f.orientation = as_fixed<6>(field(frames[i], "orientation", ctx), join(ctx, "orientation"));
    const json& pose = field(frames[i], "pose", ctx);
    if (as_array(pose, join(ctx, "pose")).size() != static_cast<std::size_t>(joints)) {
      parse_fail(join(ctx, "pose"), "expected " + std::to_string(joints) + " rows");
    }
    f.pose = joints == 0 ? PoseMatrix(0, 6) : PoseMatrix(as_matrix(pose, join(ctx, "pose"), 6));
    m.frames.push_back(std::move(f));
  }
  construct("frames", [&] { m.validate(); return 0; });
  return m;
}

std::string dump_motion(const MotionSequence& motion) {
  json j = versioned();
  j["units"] = "meters";
  j["fps"] = motion.fps;
  j["num_pose_joints"] = motion.num_pose_joints();
  json frames = json::array();
  for (const Frame& f : motion.frames) {
    frames.push_back({{"translation", vector_json(f.translation)},
                      {"orientation", vector_json(f.orientation)},
                      {"pose", matrix_json(f.pose)}});
  }
  j["frames"] = frames;
  return dump(j);
}

MotionSequence load_motion(const std::string& path) { return parse_motion(read_text(path)); }
void save_motion(const std::string& path, const MotionSequence& motion) { write_text(path, dump_motion(motion)); }

// ---- denoiser

DenoiserModel parse_denoiser(const std::string& text) {
  const json j = parse_versioned(text);
  const std::string type = as_string(field(j, "type", ""), "type");
  DenoiserModel model;
  if (const json* c = optional_field(j, "condition", "")) model.condition = as_string(*c, "condition");
  if (type == "oracle") {
    const Eigen::VectorXd offset = as_vector(field(j, "offset", ""), "offset");
    if (const json* p = optional_field(j, "projection", "")) {
      const Eigen::MatrixXd projection = as_sized_matrix(*p, offset.size(), offset.size(), "projection");
      model.model = construct("projection", [&] { return OracleDenoiser::dense(projection, offset); });
    } else if (const json* q = optional_field(j, "basis", "")) {
      const Eigen::MatrixXd basis = as_matrix(*q, "basis");
      if (basis.rows() != offset.size()) parse_fail("basis", "expected " + std::to_string(offset.size()) + " rows");
      model.model = construct("basis", [&] { return OracleDenoiser::from_basis(basis, offset); });
    } else {
      parse_fail("projection", "missing (or give 'basis')");
    }
  } else if (type == "neural") {
    const std::string act = as_string(field(j, "activation", ""), "activation");
    Activation activation;
    if (act == "tanh") {
      activation = Activation::Tanh;
    } else if (act == "relu") {
      activation = Activation::Relu;
    } else {
      parse_fail("activation", "expected 'tanh' or 'relu', got '" + act + "'");
    }
    const json& layers_j = as_array(field(j, "layers", ""), "layers");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i < layers_j.size(); ++i) {
      const std::string ctx = at("layers", i);
      const int rows = as_int(field(layers_j[i], "rows", ctx), join(ctx, "rows"));
      const int cols = as_int(field(layers_j[i], "cols", ctx), join(ctx, "cols"));
      if (rows < 1 || cols < 1) parse_fail(ctx, "rows and cols must be positive");
      DenseLayer layer;
      layer.weights = as_sized_matrix(field(layers_j[i], "weights", ctx), rows, cols, join(ctx, "weights"));
      layer.bias = as_vector(field(layers_j[i], "bias", ctx), join(ctx, "bias"));
      if (layer.bias.size() != rows) parse_fail(join(ctx, "bias"), "expected " + std::to_string(rows) + " entries");
      layers.push_back(std::move(layer));
    }
    std::map<std::string, Eigen::VectorXd> embeddings;
    const json& emb = field(j, "embeddings", "");
    if (!emb.is_object()) parse_fail("embeddings", "expected an object");
    for (auto it = emb.begin(); it != emb.end(); ++it) embeddings[it.key()] = as_vector(it.value(), join("embeddings", it.key()));
    model.model = construct("layers", [&] { return NeuralDenoiser(layers, activation, embeddings); });
  } else {
    parse_fail("type", "expected 'oracle' or 'neural', got '" + type + "'");
  }
  return model;
}

std::string dump_denoiser(const DenoiserModel& model) {
  json j = versioned();
  j["condition"] = model.condition;
  if (const auto* oracle = std::get_if<OracleDenoiser>(&model.model)) {
    j["type"] = "oracle";
    j[oracle->is_factored() ? "basis" : "projection"] = matrix_json(oracle->matrix());
    j["offset"] = vector_json(oracle->offset());
  } else {
    const auto& neural = std::get<NeuralDenoiser>(model.model);
    j["type"] = "neural";
    j["activation"] = neural.activation() == Activation::Tanh ? "tanh" : "relu";
    json layers = json::array();
    for (const DenseLayer& l : neural.layers()) {
      layers.push_back({{"rows", l.weights.rows()},
                        {"cols", l.weights.cols()},
                        {"weights", matrix_json(l.weights)},
                        {"bias", vector_json(l.bias)}});
    }
    j["layers"] = layers;
    json emb = json::object();
    for (const auto& [key, value] : neural.embeddings()) emb[key] = vector_json(value);
    j["embeddings"] = emb;
  }
  return dump(j);
}

DenoiserModel load_denoiser(const std::string& path) { return parse_denoiser(read_text(path)); }

// ---- encoder

PoseEncoder parse_encoder(const std::string& text) {
  const json j = parse_versioned(text);
  const int pose_dim = as_int(field(j, "pose_dim", ""), "pose_dim");
  const int latent_dim = as_int(field(j, "latent_dim", ""), "latent_dim");
  if (pose_dim < 0 || latent_dim < 1) parse_fail("latent_dim", "dimensions must be positive");
  PoseEncoder e;
  e.A = as_sized_matrix(field(j, "A", ""), latent_dim, pose_dim, "A");
  e.b = as_vector(field(j, "b", ""), "b");
  e.C = as_sized_matrix(field(j, "C", ""), latent_dim, pose_dim, "C");
  e.d = as_vector(field(j, "d", ""), "d");
  if (e.b.size() != latent_dim) parse_fail("b", "expected " + std::to_string(latent_dim) + " entries");
  if (e.d.size() != latent_dim) parse_fail("d", "expected " + std::to_string(latent_dim) + " entries");
  e.validate();
  return e;
}

std::string dump_encoder(const PoseEncoder& encoder) {
  json j = versioned();
  j["pose_dim"] = encoder.pose_dim();
  j["latent_dim"] = encoder.latent_dim();
  j["A"] = matrix_json(encoder.A);
  j["b"] = vector_json(encoder.b);
  j["C"] = matrix_json(encoder.C);
  j["d"] = vector_json(encoder.d);
  return dump(j);
}

PoseEncoder load_encoder(const std::string& path) { return parse_encoder(read_text(path)); }

// ---- plan

TrajectoryPlan parse_plan(const std::string& text) {
  const json j = parse_versioned(text);
  TrajectoryPlan plan;
  plan.instruction = as_string(field(j, "instruction", ""), "instruction");
  plan.motion_prompt = as_string(field(j, "motion_prompt", ""), "motion_prompt");
  const std::string source = as_string(field(j, "source", ""), "source");
  if (source == "llm") {
    plan.source = PlanSource::Llm;
  } else if (source == "fallback") {
    plan.source = PlanSource::Fallback;
  } else {
    parse_fail("source", "expected 'llm' or 'fallback'");
  }
  plan.duration_s = as_number(field(j, "duration_s", ""), "duration_s");
  plan.fps = as_number(field(j, "fps", ""), "fps");
  if (const json* r = optional_field(j, "fallback_reason", "")) plan.fallback_reason = as_string(*r, "fallback_reason");
  const json& wps = as_array(field(j, "waypoints", ""), "waypoints");
  for (std::size_t i = 0; i < wps.size(); ++i) {
    const std::string ctx = at("waypoints", i);
    plan.waypoints.push_back({as_number(field(wps[i], "time", ctx), join(ctx, "time")),
                              as_fixed<3>(field(wps[i], "position", ctx), join(ctx, "position"))});
  }
  plan.trajectory = as_points(field(j, "trajectory", ""), "trajectory");
  if (plan.trajectory.cols() < 2) parse_fail("trajectory", "expected at least 2 frames");
  if (!(plan.fps > 0.0)) parse_fail("fps", "must be positive");
  return plan;
}

std::string dump_plan(const TrajectoryPlan& plan) {
  json j = versioned();
  j["units"] = "meters";
  j["instruction"] = plan.instruction;
  j["motion_prompt"] = plan.motion_prompt;
  j["source"] = std::string(to_string(plan.source));
  j["fallback_reason"] = plan.fallback_reason;
  j["duration_s"] = plan.duration_s;
  j["fps"] = plan.fps;
  json wps = json::array();
  for (const Waypoint& w : plan.waypoints) wps.push_back({{"time", w.time}, {"position", vector_json(w.position)}});
  j["waypoints"] = wps;
  j["trajectory"] = points_json(plan.trajectory);
  return dump(j);
}

TrajectoryPlan load_plan(const std::string& path) { return parse_plan(read_text(path)); }
void save_plan(const std::string& path, const TrajectoryPlan& plan) { write_text(path, dump_plan(plan)); }

// ---- reports

namespace {

json components_json(const LossComponents& c) {
  return {{"msds", c.msds}, {"traj", c.traj}, {"smooth", c.smooth}, {"collision", c.collision}, {"total", c.total}};
}

json weights_json(const LossWeights& w) {
  return {{"msds", w.msds},     {"traj", w.traj}, {"smooth", w.smooth}, {"collision", w.collision},
          {"middle", w.middle}, {"end", w.end},   {"margin", w.margin}, {"drop_clamped", w.drop_clamped}};
}

json optimizer_json(const OptimConfig& o) {
  return {{"rule", o.rule == UpdateRule::Adam ? "adam" : "gd"},
          {"max_iters", o.max_iters},
          {"step_size", o.step_size},
          {"step_decay", o.step_decay},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon},
          {"grad_tol", o.grad_tol},
          {"record_wall_time", o.record_wall_time},
          {"mask", {{"translation", o.mask.translation}, {"orientation", o.mask.orientation}, {"pose", o.mask.pose}}}};
}

}  // namespace

std::string dump_report(const OptimReport& report) {
  json j = versioned();
  j["seed"] = report.config.seed;
  j["weights"] = weights_json(report.config.weights);
  j["optimizer"] = optimizer_json(report.config);
  j["converged"] = report.converged;
  j["iterations"] = report.records.size();
  json records = json::array();
  for (const IterationRecord& r : report.records) {
    json rec = {{"iteration", r.iteration}, {"loss", components_json(r.components)}, {"grad_norm", r.grad_norm}};
    if (report.config.record_wall_time) rec["wall_time_s"] = r.wall_time_s;
    records.push_back(rec);
  }
  j["records"] = records;
  j["final_motion"] = json::parse(dump_motion(report.final_motion));
  return dump(j);
}

std::string dump_metrics(const MetricReport& m) {
  json j = versioned();
  j["pose_plausibility"] = m.pose_plausibility;
  j["pose_variation"] = m.pose_variation;
  j["trajectory_length"] = m.trajectory_length;
  return dump(j);
}

// ---- config

namespace {

void read_number(const json& j, const char* key, const std::string& ctx, double& out) {
  if (const json* v = optional_field(j, key, ctx)) out = as_number(*v, join(ctx, key));
}

void read_int(const json& j, const char* key, const std::string& ctx, int& out) {
  if (const json* v = optional_field(j, key, ctx)) out = as_int(*v, join(ctx, key));
}

void read_bool(const json& j, const char* key, const std::string& ctx, bool& out) {
  if (const json* v = optional_field(j, key, ctx)) out = as_bool(*v, join(ctx, key));
}

void read_vec3(const json& j, const char* key, const std::string& ctx, Eigen::Vector3d& out) {
  if (const json* v = optional_field(j, key, ctx)) out = as_fixed<3>(*v, join(ctx, key));
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  const json j = parse_versioned(text);
  RunConfig c;
  if (const json* seed = optional_field(j, "seed", "")) {
    if (!seed->is_number_unsigned()) parse_fail("seed", "expected a nonnegative integer");
    c.optim.seed = seed->get<std::uint64_t>();
  }
  if (const json* w = optional_field(j, "weights", "")) {
    LossWeights& lw = c.optim.weights;
    read_number(*w, "msds", "weights", lw.msds);
    read_number(*w, "traj", "weights", lw.traj);
    read_number(*w, "smooth", "weights", lw.smooth);
    read_number(*w, "collision", "weights", lw.collision);
    read_number(*w, "middle", "weights", lw.middle);
    read_number(*w, "end", "weights", lw.end);
    read_number(*w, "margin", "weights", lw.margin);
    read_bool(*w, "drop_clamped", "weights", lw.drop_clamped);
  }
  if (const json* o = optional_field(j, "optimizer", "")) {
    const std::string ctx = "optimizer";
    if (const json* rule = optional_field(*o, "rule", ctx)) {
      const std::string r = as_string(*rule, "optimizer.rule");
      if (r == "adam") {
        c.optim.rule = UpdateRule::Adam;
      } else if (r == "gd") {
        c.optim.rule = UpdateRule::GradientDescent;
      } else {
        parse_fail("optimizer.rule", "expected 'adam' or 'gd'");
      }
    }
    read_int(*o, "max_iters", ctx, c.optim.max_iters);
    read_number(*o, "step_size", ctx, c.optim.step_size);
    read_number(*o, "step_decay", ctx, c.optim.step_decay);
    read_number(*o, "beta1", ctx, c.optim.beta1);
    read_number(*o, "beta2", ctx, c.optim.beta2);
    read_number(*o, "epsilon", ctx, c.optim.epsilon);
    read_number(*o, "grad_tol", ctx, c.optim.grad_tol);
    read_bool(*o, "record_wall_time", ctx, c.optim.record_wall_time);
    if (const json* m = optional_field(*o, "mask", ctx)) {
      read_bool(*m, "translation", "optimizer.mask", c.optim.mask.translation);
      read_bool(*m, "orientation", "optimizer.mask", c.optim.mask.orientation);
      read_bool(*m, "pose", "optimizer.mask", c.optim.mask.pose);
    }
  }
  if (const json* s = optional_field(j, "schedule", "")) {
    read_int(*s, "steps", "schedule", c.schedule.steps);
    read_number(*s, "beta_start", "schedule", c.schedule.beta_start);
    read_number(*s, "beta_end", "schedule", c.schedule.beta_end);
  }
  // The oracle denoiser ignores t, so only low-noise steps are useful by default.
  c.msds.t_min = 1;
  c.msds.t_max = std::min(kDefaultMaxStep, c.schedule.steps);
  if (const json* m = optional_field(j, "msds", "")) {
    if (const json* w = optional_field(*m, "weighting", "msds")) {
      const std::string s = as_string(*w, "msds.weighting");
      if (s == "constant") {
        c.msds.weighting = Weighting::Constant;
      } else if (s == "one_minus_alpha_bar") {
        c.msds.weighting = Weighting::OneMinusAlphaBar;
      } else {
        parse_fail("msds.weighting", "expected 'constant' or 'one_minus_alpha_bar'");
      }
    }
    read_int(*m, "t_min", "msds", c.msds.t_min);
    read_int(*m, "t_max", "msds", c.msds.t_max);
    if (const json* t = optional_field(*m, "fixed_t", "msds")) c.msds.fixed_t = as_int(*t, "msds.fixed_t");
  }
  c.msds.rng_seed = c.optim.seed;
  c.gradcheck.seed = c.optim.seed;
  if (const json* v = optional_field(j, "body", "")) c.body_path = resolve(as_string(*v, "body"), base_dir);
  if (const json* v = optional_field(j, "denoiser", "")) c.denoiser_path = resolve(as_string(*v, "denoiser"), base_dir);
  if (const json* v = optional_field(j, "encoder", "")) c.encoder_path = resolve(as_string(*v, "encoder"), base_dir);
  if (const json* v = optional_field(j, "condition", "")) c.condition = as_string(*v, "condition");
  if (const json* p = optional_field(j, "planner", "")) {
    const std::string ctx = "planner";
    if (const json* v = optional_field(*p, "instruction", ctx)) c.plan.instruction = as_string(*v, "planner.instruction");
    read_vec3(*p, "start", ctx, c.plan.start);
    if (const json* v = optional_field(*p, "goal", ctx)) c.plan.goal = as_fixed<3>(*v, "planner.goal");
    read_number(*p, "clearance", ctx, c.plan.clearance);
    read_number(*p, "walking_speed", ctx, c.plan.walking_speed);
    read_number(*p, "fps", ctx, c.plan.fps);
    read_int(*p, "num_frames", ctx, c.plan.num_frames);
  }
  if (const json* r = optional_field(j, "render", "")) {
    const std::string ctx = "render";
    read_int(*r, "width", ctx, c.render.width);
    read_int(*r, "height", ctx, c.render.height);
    read_number(*r, "focal", ctx, c.render.focal);
    read_vec3(*r, "eye", ctx, c.render.eye);
    read_vec3(*r, "target", ctx, c.render.target);
    read_vec3(*r, "background", ctx, c.render.background);
    read_number(*r, "splat_scale", ctx, c.render.splat_scale);
  }
  if (const json* g = optional_field(j, "gradcheck", "")) {
    read_int(*g, "coordinates", "gradcheck", c.gradcheck.coordinates);
    read_number(*g, "step", "gradcheck", c.gradcheck.step);
    read_number(*g, "floor", "gradcheck", c.gradcheck.floor);
  }
  construct("optimizer", [&] { c.optim.validate(); return 0; });
  return c;
}

std::string dump_config(const RunConfig& c) {
  json j = versioned();
  j["seed"] = c.optim.seed;
  j["weights"] = weights_json(c.optim.weights);
  j["optimizer"] = optimizer_json(c.optim);
  j["schedule"] = {{"steps", c.schedule.steps}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}};
  j["msds"] = {{"weighting", c.msds.weighting == Weighting::Constant ? "constant" : "one_minus_alpha_bar"},
               {"t_min", c.msds.t_min},
               {"t_max", c.msds.t_max}};
  if (c.msds.fixed_t) j["msds"]["fixed_t"] = *c.msds.fixed_t;
  if (!c.body_path.empty()) j["body"] = c.body_path;
  if (!c.denoiser_path.empty()) j["denoiser"] = c.denoiser_path;
  if (!c.encoder_path.empty()) j["encoder"] = c.encoder_path;
  j["condition"] = c.condition;
  j["planner"] = {{"instruction", c.plan.instruction},     {"start", vector_json(c.plan.start)},
                  {"clearance", c.plan.clearance},         {"walking_speed", c.plan.walking_speed},
                  {"fps", c.plan.fps},                     {"num_frames", c.plan.num_frames}};
  if (c.plan.goal) j["planner"]["goal"] = vector_json(*c.plan.goal);
  j["render"] = {{"width", c.render.width},
                 {"height", c.render.height},
                 {"focal", c.render.focal},
                 {"eye", vector_json(c.render.eye)},
                 {"target", vector_json(c.render.target)},
                 {"background", vector_json(c.render.background)},
                 {"splat_scale", c.render.splat_scale}};
  j["gradcheck"] = {{"coordinates", c.gradcheck.coordinates}, {"step", c.gradcheck.step}, {"floor", c.gradcheck.floor}};
  return dump(j);
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_text(path), std::filesystem::path(path).parent_path().string());
}

}  // namespace msdi::io
