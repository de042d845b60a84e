#include "msdi/common.hpp"

#include <cmath>

namespace msdi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::InvalidBody: return "InvalidBody";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::StaleIndices: return "StaleIndices";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NoPathFound: return "NoPathFound";
    case ErrorCode::TooFewWaypoints: return "TooFewWaypoints";
    case ErrorCode::PlannerUnavailable: return "PlannerUnavailable";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidQuaternion: return "InvalidQuaternion";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteState:
    case ErrorCode::PlannerUnavailable:
    case ErrorCode::NoPathFound:
    case ErrorCode::IoError:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace msdi
