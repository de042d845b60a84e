#include "msdi/diffusion_prior.hpp"

#include <cmath>

namespace msdi {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) fail(ErrorCode::InvalidSchedule, "schedule needs at least one step");
  alpha_bar_.resize(alpha_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    if (!(alpha_[i] > 0.0 && alpha_[i] <= 1.0)) {
      fail(ErrorCode::InvalidSchedule, "alpha_" + std::to_string(i + 1) + " outside (0, 1]");
    }
    running *= alpha_[i];
    alpha_bar_[i] = running;
  }
}

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) fail(ErrorCode::InvalidSchedule, "T must be at least 1");
  if (!(beta_start >= 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    fail(ErrorCode::InvalidSchedule, "need 0 <= beta_start <= beta_end < 1");
  }
  std::vector<double> alpha(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    alpha[i] = 1.0 - (beta_start + (beta_end - beta_start) * frac);
  }
  return NoiseSchedule(std::move(alpha));
}

namespace {

void check_step(int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    fail(ErrorCode::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = normal(rng);
  return eps;
}

}  // namespace

Eigen::VectorXd sample_forward(const Eigen::VectorXd& x0, int t, const NoiseSchedule& schedule,
                               const Eigen::VectorXd& noise) {
  check_step(t, schedule);
  if (noise.size() != x0.size()) fail(ErrorCode::ShapeMismatch, "noise and motion sizes differ");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Eigen::VectorXd sample_forward(const Eigen::VectorXd& x0, int t, const NoiseSchedule& schedule, Rng& rng) {
  check_step(t, schedule);
  return sample_forward(x0, t, schedule, standard_normal(x0.size(), rng));
}

OracleDenoiser OracleDenoiser::dense(Eigen::MatrixXd projection, Eigen::VectorXd offset) {
  if (projection.rows() != projection.cols() || projection.rows() != offset.size()) {
    fail(ErrorCode::ShapeMismatch, "oracle projection must be D x D with a D-vector offset");
  }
  if (offset.size() == 0) fail(ErrorCode::ShapeMismatch, "oracle dimension must be positive");
  if (!projection.allFinite() || !offset.allFinite()) fail(ErrorCode::InvalidArgument, "oracle has non-finite entries");
  const double residual = (projection * projection - projection).cwiseAbs().maxCoeff();
  if (residual > 1e-8) {
    fail(ErrorCode::InvalidArgument, "oracle projection is not idempotent (max |PP - P| = " + std::to_string(residual) + ")");
  }
  OracleDenoiser d;
  d.matrix_ = std::move(projection);
  d.offset_ = std::move(offset);
  return d;
}

OracleDenoiser OracleDenoiser::from_basis(Eigen::MatrixXd basis, Eigen::VectorXd offset) {
  if (basis.rows() != offset.size()) fail(ErrorCode::ShapeMismatch, "oracle basis rows must match the offset length");
  if (offset.size() == 0) fail(ErrorCode::ShapeMismatch, "oracle dimension must be positive");
  if (!basis.allFinite() || !offset.allFinite()) fail(ErrorCode::InvalidArgument, "oracle has non-finite entries");
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const double residual =
      basis.cols() == 0 ? 0.0 : (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
  if (residual > 1e-8) fail(ErrorCode::InvalidArgument, "oracle basis is not orthonormal");
  OracleDenoiser d;
  d.factored_ = true;
  d.matrix_ = std::move(basis);
  d.offset_ = std::move(offset);
  return d;
}

Eigen::VectorXd OracleDenoiser::project(const Eigen::VectorXd& x) const {
  if (x.size() != offset_.size()) {
    fail(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.size()) + " entries, oracle expects " +
                                       std::to_string(offset_.size()));
  }
  if (factored_) return matrix_ * (matrix_.transpose() * x);
  return matrix_ * x;
}

Eigen::MatrixXd OracleDenoiser::projection() const {
  if (factored_) return matrix_ * matrix_.transpose();
  return matrix_;
}

NeuralDenoiser::NeuralDenoiser(std::vector<DenseLayer> layers, Activation activation,
                               std::map<std::string, Eigen::VectorXd> embeddings)
    : layers_(std::move(layers)), activation_(activation), embeddings_(std::move(embeddings)) {
  if (layers_.empty()) fail(ErrorCode::ShapeMismatch, "neural denoiser needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weights.rows()) {
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " bias does not match its row count");
    }
    if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
      fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " input width does not chain");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite layer weights");
  }
  bool first = true;
  for (const auto& [name, e] : embeddings_) {
    if (first) embedding_dim_ = static_cast<int>(e.size());
    if (e.size() != embedding_dim_) fail(ErrorCode::ShapeMismatch, "embedding '" + name + "' has a different width");
    first = false;
  }
  if (layers_.front().weights.cols() != dim() + 1 + embedding_dim_) {
    fail(ErrorCode::ShapeMismatch, "first layer must take D + 1 + embedding inputs");
  }
}

Eigen::VectorXd NeuralDenoiser::forward(const Eigen::VectorXd& xt, double normalized_step,
                                        const std::string& condition) const {
  if (xt.size() != dim()) fail(ErrorCode::ShapeMismatch, "input has wrong dimension for the neural denoiser");
  Eigen::VectorXd h(dim() + 1 + embedding_dim_);
  h.head(dim()) = xt;
  h[dim()] = normalized_step;
  if (embedding_dim_ > 0) {
    const auto it = embeddings_.find(condition);
    if (it == embeddings_.end()) fail(ErrorCode::InvalidArgument, "unknown condition '" + condition + "'");
    h.tail(embedding_dim_) = it->second;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd z = layers_[i].weights * h + layers_[i].bias;
    if (i + 1 < layers_.size()) {
      if (activation_ == Activation::Tanh) {
        z = z.array().tanh();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
    h = std::move(z);
  }
  return h;
}

int DenoiserModel::dim() const {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

Eigen::VectorXd denoise(const DenoiserModel& model, const Eigen::VectorXd& xt, int t, int total_steps) {
  if (xt.size() != model.dim()) {
    fail(ErrorCode::ShapeMismatch, "motion has " + std::to_string(xt.size()) + " entries, denoiser expects " +
                                       std::to_string(model.dim()));
  }
  if (t < 1 || t > total_steps) fail(ErrorCode::StepOutOfRange, "diffusion step out of range");
  if (!xt.allFinite()) fail(ErrorCode::InvalidArgument, "noisy motion has non-finite entries");
  if (const auto* oracle = std::get_if<OracleDenoiser>(&model.model)) return oracle->apply(xt);
  const auto& net = std::get<NeuralDenoiser>(model.model);
  return net.forward(xt, static_cast<double>(t) / total_steps, model.condition);
}

void MsdsConfig::validate(const NoiseSchedule& schedule) const {
  if (!(1 <= t_min && t_min <= t_max && t_max <= schedule.steps())) {
    fail(ErrorCode::InvalidArgument, "MSDS needs 1 <= t_min <= t_max <= T");
  }
  if (fixed_t && (*fixed_t < 1 || *fixed_t > schedule.steps())) fail(ErrorCode::StepOutOfRange, "fixed t out of range");
}

double msds_weight(Weighting weighting, int t, const NoiseSchedule& schedule) {
  switch (weighting) {
    case Weighting::Constant: return 1.0;
    case Weighting::OneMinusAlphaBar: return 1.0 - schedule.alpha_bar(t);
  }
  return 1.0;
}

MsdsSample msds_gradient(const Eigen::VectorXd& x, const DenoiserModel& model, const NoiseSchedule& schedule,
                         const MsdsConfig& cfg, Rng& rng) {
  cfg.validate(schedule);
  MsdsSample s;
  if (cfg.fixed_t) {
    s.t = *cfg.fixed_t;
  } else {
    std::uniform_int_distribution<int> pick(cfg.t_min, cfg.t_max);
    s.t = pick(rng);
  }
  Eigen::VectorXd xt;
  if (cfg.fixed_noise) {
    xt = sample_forward(x, s.t, schedule, *cfg.fixed_noise);
  } else if (cfg.fixed_t) {
    xt = sample_forward(x, s.t, schedule, Eigen::VectorXd::Zero(x.size()));
  } else {
    xt = sample_forward(x, s.t, schedule, rng);
  }
  s.weight = msds_weight(cfg.weighting, s.t, schedule);
  s.gradient = s.weight * (x - denoise(model, xt, s.t, schedule.steps()));
  return s;
}

}  // namespace msdi
