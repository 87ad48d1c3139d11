#include "cltlab/types.hpp"

namespace cltlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::RowSumInvalid: return "RowSumInvalid";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoSpectralGap: return "NoSpectralGap";
    case ErrorCode::NotCentered: return "NotCentered";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingularResolvent: return "SingularResolvent";
    case ErrorCode::RankNotOne: return "RankNotOne";
    case ErrorCode::AuditFailed: return "AuditFailed";
    case ErrorCode::IdentityViolated: return "IdentityViolated";
    case ErrorCode::NotLattice: return "NotLattice";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::BadRadius: return "BadRadius";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

Distribution Distribution::validated(Vector w) {
  const int n = static_cast<int>(w.size());
  if (n == 0) throw Error(ErrorCode::ValidationError, "empty distribution");
  for (int i = 0; i < n; ++i) {
    if (w[i] < 0.0)
      throw Error(ErrorCode::NegativeEntry, "distribution weight < 0");
  }
  const double total = w.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::ValidationError, "distribution does not sum to 1");
  w /= total;
  return Distribution{std::move(w)};
}

Distribution Distribution::point(int n_states, int state) {
  if (state < 0 || state >= n_states)
    throw Error(ErrorCode::OutOfRange, "point mass state out of range");
  Vector w = Vector::Zero(n_states);
  w[state] = 1.0;
  return Distribution{std::move(w)};
}

Distribution Distribution::uniform(int n_states) {
  if (n_states <= 0)
    throw Error(ErrorCode::ValidationError, "uniform distribution needs n>0");
  return Distribution{Vector::Constant(n_states, 1.0 / n_states)};
}

}  // namespace cltlab
