#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace relaycoll {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base class of every error raised by the library. `kind()` is a stable
/// identifier used by the CLI to map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RELAYCOLL_ERROR(Name)                                     \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// relay-core
RELAYCOLL_ERROR(InvalidArgument);
RELAYCOLL_ERROR(IntegrationFailure);
RELAYCOLL_ERROR(DegenerateCrossing);
RELAYCOLL_ERROR(WindowTooLarge);
// reduced map
RELAYCOLL_ERROR(NoRootInBracket);
RELAYCOLL_ERROR(DegenerateDerivative);
RELAYCOLL_ERROR(OutsideNeighborhood);
// oscillator
RELAYCOLL_ERROR(SingularSurface);
RELAYCOLL_ERROR(NegativeEpsilon);
// continuation
RELAYCOLL_ERROR(NoConvergence);
RELAYCOLL_ERROR(SingularJacobian);
RELAYCOLL_ERROR(InitialPointFailed);
RELAYCOLL_ERROR(ParametrizationBreakdown);
RELAYCOLL_ERROR(NotAMaximum);
RELAYCOLL_ERROR(BreakupDetected);
// attractor analysis
RELAYCOLL_ERROR(LeftNeighborhood);
RELAYCOLL_ERROR(CentroidOnCurve);
RELAYCOLL_ERROR(InsufficientSamples);
// io
RELAYCOLL_ERROR(FormatError);

#undef RELAYCOLL_ERROR

}  // namespace relaycoll
