#pragma once

#include "msdi/common.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace msdi {

using Rng = std::mt19937_64;

/// Diffusion retention coefficients, indexed by step t = 1..T.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  /// Takes alpha_1..alpha_T; alpha_bar is their running product.
  explicit NoiseSchedule(std::vector<double> alpha);

  int steps() const { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t - 1)); }
  const std::vector<double>& alphas() const { return alpha_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

/// Linear beta schedule. beta_start = beta_end = 0 gives a noiseless schedule.
NoiseSchedule build_schedule(int steps, double beta_start, double beta_end);

/// X_t = sqrt(alpha_bar_t) X0 + sqrt(1 - alpha_bar_t) eps.
Eigen::VectorXd sample_forward(const Eigen::VectorXd& x0, int t, const NoiseSchedule& schedule, Rng& rng);
Eigen::VectorXd sample_forward(const Eigen::VectorXd& x0, int t, const NoiseSchedule& schedule,
                               const Eigen::VectorXd& noise);

/// Affine projection denoiser: x0_hat = P x_t + b, independent of t.
/// P is held either densely or as an orthonormal basis Q with P = Q Q^T.
class OracleDenoiser {
 public:
  static OracleDenoiser dense(Eigen::MatrixXd projection, Eigen::VectorXd offset);
  static OracleDenoiser from_basis(Eigen::MatrixXd basis, Eigen::VectorXd offset);

  int dim() const { return static_cast<int>(offset_.size()); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return project(x) + offset_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  /// Materialized P (D x D).
  Eigen::MatrixXd projection() const;
  bool is_factored() const { return factored_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  bool factored_ = false;
  Eigen::MatrixXd matrix_;  // P when dense, Q when factored
  Eigen::VectorXd offset_;
};

enum class Activation { Tanh, Relu };

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

/// MLP over the concatenation [x_t, t / T, embedding(condition)].
class NeuralDenoiser {
 public:
  NeuralDenoiser(std::vector<DenseLayer> layers, Activation activation,
                 std::map<std::string, Eigen::VectorXd> embeddings);

  int dim() const { return static_cast<int>(layers_.back().weights.rows()); }
  int embedding_dim() const { return embedding_dim_; }
  Eigen::VectorXd forward(const Eigen::VectorXd& xt, double normalized_step, const std::string& condition) const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  Activation activation() const { return activation_; }
  const std::map<std::string, Eigen::VectorXd>& embeddings() const { return embeddings_; }

 private:
  std::vector<DenseLayer> layers_;
  Activation activation_;
  std::map<std::string, Eigen::VectorXd> embeddings_;
  int embedding_dim_ = 0;
};

struct DenoiserModel {
  std::variant<OracleDenoiser, NeuralDenoiser> model;
  /// Opaque condition token, e.g. a text-prompt identifier.
  std::string condition;

  int dim() const;
  bool is_oracle() const { return std::holds_alternative<OracleDenoiser>(model); }
};

/// Predicted clean motion for the flattened noisy motion `xt` at step t of T.
Eigen::VectorXd denoise(const DenoiserModel& model, const Eigen::VectorXd& xt, int t, int total_steps);

enum class Weighting { Constant, OneMinusAlphaBar };

struct MsdsConfig {
  Weighting weighting = Weighting::Constant;
  int t_min = 1;
  int t_max = 1;
  std::uint64_t rng_seed = 0;
  /// Test mode: use this (t, eps) instead of sampling. An empty eps means zero noise.
  std::optional<int> fixed_t;
  std::optional<Eigen::VectorXd> fixed_noise;

  void validate(const NoiseSchedule& schedule) const;
};

double msds_weight(Weighting weighting, int t, const NoiseSchedule& schedule);

struct MsdsSample {
  int t = 0;
  double weight = 0.0;
  Eigen::VectorXd gradient;
};

/// Single-sample estimate of w(t) (X - denoise(X_t, t, c)). The denoiser is
/// treated as a constant; no Jacobian flows through it.
MsdsSample msds_gradient(const Eigen::VectorXd& x, const DenoiserModel& model, const NoiseSchedule& schedule,
                         const MsdsConfig& cfg, Rng& rng);

}  // namespace msdi
