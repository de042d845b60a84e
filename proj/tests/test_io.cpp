#include "oracles.hpp"

#include "msdi/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace msdi;
using nlohmann::json;

namespace {

Error error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an msdi::Error");
  return Error(ErrorCode::InvalidArgument, "");
}

Scene random_scene(oracle::Rng& rng) {
  Scene s;
  for (int k = 0; k < 2; ++k) {
    const int m = 5 + static_cast<int>(rng() % 20);
    Eigen::Matrix3Xd p(3, m), n(3, m);
    for (int i = 0; i < m; ++i) {
      p.col(i) = oracle::uniform3(rng, -3, 3);
      n.col(i) = oracle::unit3(rng);
    }
    s.objects.emplace_back("obj" + std::to_string(k), p, n);
  }
  return s;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "msdi_io_test") { std::filesystem::create_directories(path); }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("scene roundtrip") {
  oracle::Rng rng(1);
  TempDir tmp;
  for (int trial = 0; trial < 10; ++trial) {
    const Scene s = random_scene(rng);
    io::save_scene(tmp.file("scene.json"), s);
    const Scene back = io::load_scene(tmp.file("scene.json"));
    REQUIRE(back.objects.size() == s.objects.size());
    for (std::size_t k = 0; k < s.objects.size(); ++k) {
      CHECK(back.objects[k].name() == s.objects[k].name());
      CHECK((back.objects[k].points() - s.objects[k].points()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((back.objects[k].normals() - s.objects[k].normals()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(back.objects[k].aabb().min == s.objects[k].aabb().min);
    }
    CHECK(io::dump_scene(back) == io::dump_scene(s));
  }
}

TEST_CASE("scene schema errors") {
  const Error missing = error_of([] {
    io::parse_scene(R"({"version": 1, "objects": [{"name": "a", "points": [[0, 0, 0]]}]})");
  });
  CHECK(missing.code() == ErrorCode::ParseError);
  CHECK(std::string(missing.what()).find("normals") != std::string::npos);

  const Error version = error_of([] { io::parse_scene(R"({"version": 7, "objects": []})"); });
  CHECK(version.code() == ErrorCode::VersionMismatch);

  const Error syntax = error_of([] { io::parse_scene("{\n\"version\": 1,\n\"objects\": [\n}"); });
  CHECK(syntax.code() == ErrorCode::ParseError);
  CHECK(std::string(syntax.what()).find("line 4") != std::string::npos);

  const Error normal = error_of([] {
    io::parse_scene(R"({"version": 1, "objects": [{"points": [[0, 0, 0]], "normals": [[0, 0, 2]]}]})");
  });
  CHECK(normal.code() == ErrorCode::ParseError);
  CHECK(error_of([] { io::load_scene("/nonexistent/scene.json"); }).code() == ErrorCode::IoError);
}

TEST_CASE("motion roundtrip and validation") {
  oracle::Rng rng(2);
  TempDir tmp;
  const MotionSequence m = oracle::random_motion(rng, 7, 4, 2.0, 0.5);
  io::save_motion(tmp.file("m.json"), m);
  const MotionSequence back = io::load_motion(tmp.file("m.json"));
  CHECK(flatten(back) == flatten(m));
  CHECK(back.fps == m.fps);
  CHECK(io::dump_motion(back) == io::dump_motion(m));

  json j = json::parse(io::dump_motion(m));
  j["frames"] = json::array({j["frames"][0]});
  const Error one = error_of([&] { io::parse_motion(j.dump()); });
  CHECK(one.code() == ErrorCode::ParseError);
  CHECK(std::string(one.what()).find("frames") != std::string::npos);

  j = json::parse(io::dump_motion(m));
  j["frames"][2].erase("orientation");
  CHECK(std::string(error_of([&] { io::parse_motion(j.dump()); }).what()).find("orientation") != std::string::npos);
  j = json::parse(io::dump_motion(m));
  j["version"] = 2;
  CHECK(error_of([&] { io::parse_motion(j.dump()); }).code() == ErrorCode::VersionMismatch);
}

TEST_CASE("plan roundtrip") {
  TrajectoryPlan p;
  p.instruction = "walk to the desk";
  p.motion_prompt = "a person walks";
  p.source = PlanSource::Llm;
  p.duration_s = 2.5;
  p.fps = 12;
  p.waypoints = {{0.0, {0, 0, 0}}, {1.25, {1, 0.5, 0}}, {2.5, {2, 0, 0}}};
  p.trajectory = Eigen::Matrix3Xd::Random(3, 31);
  const TrajectoryPlan back = io::parse_plan(io::dump_plan(p));
  CHECK(back.instruction == p.instruction);
  CHECK(back.motion_prompt == p.motion_prompt);
  CHECK(back.source == p.source);
  CHECK(back.trajectory == p.trajectory);
  REQUIRE(back.waypoints.size() == 3);
  CHECK(back.waypoints[1].time == 1.25);
  CHECK(back.waypoints[1].position == p.waypoints[1].position);
  CHECK(io::dump_plan(back) == io::dump_plan(p));
}

TEST_CASE("body, encoder and denoiser roundtrip") {
  const BodyModel body = make_desk_body();
  const BodyModel b2 = io::parse_body(io::dump_body(body));
  CHECK(b2.template_points() == body.template_points());
  CHECK(b2.faces() == body.faces());
  CHECK(b2.weights() == body.weights());
  CHECK(b2.parent() == body.parent());

  oracle::Rng rng(3);
  PoseEncoder enc = PoseEncoder::identity(6);
  enc.A(1, 2) = 0.25;
  enc.d[3] = -0.5;
  const PoseEncoder e2 = io::parse_encoder(io::dump_encoder(enc));
  CHECK(e2.A == enc.A);
  CHECK(e2.d == enc.d);

  const DenoiserModel oracle_model{OracleDenoiser::from_basis(Eigen::MatrixXd::Identity(5, 2), Eigen::VectorXd::Zero(5)),
                                   "walk"};
  const DenoiserModel o2 = io::parse_denoiser(io::dump_denoiser(oracle_model));
  CHECK(o2.is_oracle());
  CHECK(o2.condition == "walk");
  CHECK(std::get<OracleDenoiser>(o2.model).projection() == std::get<OracleDenoiser>(oracle_model.model).projection());

  const std::string neural = R"({"version": 1, "type": "neural", "activation": "relu",
    "layers": [{"rows": 2, "cols": 4, "weights": [[1, 0, 0, 0], [0, 1, 0.5, -0.5]], "bias": [0, 0.1]}],
    "embeddings": {"walk": [0.5]}})";
  const DenoiserModel n = io::parse_denoiser(neural);
  CHECK_FALSE(n.is_oracle());
  CHECK(n.dim() == 2);
  const DenoiserModel n2 = io::parse_denoiser(io::dump_denoiser(n));
  CHECK(std::get<NeuralDenoiser>(n2.model).layers()[0].weights == std::get<NeuralDenoiser>(n.model).layers()[0].weights);
  // Flat row-major weights are accepted too.
  const DenoiserModel flat = io::parse_denoiser(R"({"version": 1, "type": "neural", "activation": "tanh",
    "layers": [{"rows": 2, "cols": 4, "weights": [1, 0, 0, 0, 0, 1, 0.5, -0.5], "bias": [0, 0.1]}], "embeddings": {"walk": [0.5]}})");
  CHECK(std::get<NeuralDenoiser>(flat.model).layers()[0].weights == std::get<NeuralDenoiser>(n.model).layers()[0].weights);

  const Error shape = error_of([] {
    io::parse_denoiser(R"({"version": 1, "type": "neural", "activation": "relu",
      "layers": [{"rows": 2, "cols": 4, "weights": [1, 2], "bias": [0, 0]}], "embeddings": {"walk": [0.5]}})");
  });
  CHECK(shape.code() == ErrorCode::ParseError);
  CHECK(error_of([] { io::parse_denoiser(R"({"version": 1, "type": "magic"})"); }).code() == ErrorCode::ParseError);
}

TEST_CASE("config defaults and roundtrip") {
  const io::RunConfig c = io::parse_config(R"({"version": 1, "seed": 11, "weights": {"traj": 2.0},
    "optimizer": {"rule": "gd", "max_iters": 7, "mask": {"pose": false}}, "body": "body.json"})",
                                           "/data");
  CHECK(c.optim.seed == 11);
  CHECK(c.msds.rng_seed == 11);
  CHECK(c.optim.weights.traj == 2.0);
  CHECK(c.optim.weights.smooth == LossWeights{}.smooth);
  CHECK(c.optim.rule == UpdateRule::GradientDescent);
  CHECK(c.optim.max_iters == 7);
  CHECK_FALSE(c.optim.mask.pose);
  CHECK(c.body_path == "/data/body.json");
  CHECK(c.msds.t_min == 1);
  CHECK(c.msds.t_max == 20);

  const io::RunConfig back = io::parse_config(io::dump_config(c));
  CHECK(io::dump_config(back) == io::dump_config(c));
  const Error step = error_of([] { io::parse_config(R"({"version": 1, "optimizer": {"step_size": -1}})"); });
  CHECK(step.code() == ErrorCode::ParseError);
  CHECK(std::string(step.what()).find("step") != std::string::npos);
  CHECK(error_of([] { io::parse_config(R"({"version": 1, "optimizer": {"rule": "newton"}})"); }).code() ==
        ErrorCode::ParseError);
}

TEST_CASE("report records the weights and is reproducible") {
  OptimReport r;
  r.config.weights.traj = 3.0;
  r.config.seed = 5;
  r.records.push_back({0, {1, 2, 3, 4, 5}, 0.5, 0.0});
  r.final_motion = MotionSequence::rest(2, 1, 30.0);
  const json j = json::parse(io::dump_report(r));
  CHECK(j["seed"] == 5);
  CHECK(j["weights"]["traj"] == 3.0);
  CHECK(j["records"][0]["loss"]["total"] == 5.0);
  CHECK_FALSE(j["records"][0].contains("wall_time_s"));
  CHECK(io::dump_report(r) == io::dump_report(r));

  const json m = json::parse(io::dump_metrics({0.25, 0.5, 3.0}));
  CHECK(m["pose_plausibility"] == 0.25);
  CHECK(m["pose_variation"] == 0.5);
  CHECK(m["trajectory_length"] == 3.0);
}

}  // TEST_SUITE
