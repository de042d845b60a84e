#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace msdi {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Transform34 = Eigen::Matrix<double, 3, 4>;

enum class ErrorCode {
  InvalidArgument,
  DegenerateRotation,
  InvalidBody,
  EmptyMesh,
  TopologyMismatch,
  InvalidSchedule,
  StepOutOfRange,
  ShapeMismatch,
  LengthMismatch,
  TooFewFrames,
  StaleIndices,
  NonFiniteState,
  NoPathFound,
  TooFewWaypoints,
  PlannerUnavailable,
  SchemaError,
  DimensionMismatch,
  InvalidQuaternion,
  SingularCovariance,
  ParseError,
  VersionMismatch,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Validation failures are caller mistakes (bad input, bad file); everything
/// else is a runtime failure. The CLI maps these to exit codes 1 and 2.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Pairwise summation. Result depends only on the order of `values`, so
/// callers that fill the span in parallel still reduce deterministically.
double pairwise_sum(std::span<const double> values);

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace msdi
