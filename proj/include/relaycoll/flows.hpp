#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "relaycoll/ode.hpp"
#include "relaycoll/types.hpp"

namespace relaycoll {

/// The pair of flows Y_+ and Y_- generated by y' = f(y, +1) and y' = f(y, -1).
/// `u` is always +1 or -1.
class FlowBackend {
 public:
  virtual ~FlowBackend() = default;

  virtual int dim() const = 0;
  virtual Vec field(const Vec& y, int u) const = 0;
  /// Y_u^t y; negative t runs the flow backwards.
  virtual Vec apply(const Vec& y, int u, double t) const = 0;
  /// Derivative of Y_u^t y with respect to y.
  virtual Mat state_jacobian(const Vec& y, int u, double t) const = 0;
  /// f'(y, u). The default uses central differences.
  virtual Mat field_jacobian(const Vec& y, int u) const;
  /// True when `apply` is exact up to rounding.
  virtual bool closed_form() const { return false; }
};

/// Closed-form affine flows of the rescaled oscillator
///   x'' + 2 zeta x' + (1 + zeta^2) x = (1 + zeta^2) u
/// in the state y = (x, x'). Y_u^t y = A(t) y + u v(t); the equilibria are (u, 0).
class AffineOscillatorFlow final : public FlowBackend {
 public:
  explicit AffineOscillatorFlow(double zeta) : zeta_(zeta) {}

  double zeta() const { return zeta_; }

  Mat2 matrix(double t) const;
  Vec2 offset(double t) const;
  Mat2 generator() const;
  Vec2 apply2(const Vec2& y, int u, double t) const { return matrix(t) * y + double(u) * offset(t); }
  Vec2 field2(const Vec2& y, int u) const;

  int dim() const override { return 2; }
  Vec field(const Vec& y, int u) const override;
  Vec apply(const Vec& y, int u, double t) const override;
  Mat state_jacobian(const Vec& y, int u, double t) const override;
  Mat field_jacobian(const Vec& y, int u) const override;
  bool closed_form() const override { return true; }

 private:
  double zeta_;
};

/// A(t) = e^{-zeta t} cos t I - e^{-zeta t} sin t [[-zeta, -1], [1 + zeta^2, zeta]].
Mat2 flow_matrix(double zeta, double t);
/// v(t) = e^{-zeta t} (-zeta sin t - cos t + e^{zeta t}, (1 + zeta^2) sin t).
Vec2 flow_offset(double zeta, double t);

/// Generic flows from user vector fields, integrated with adaptive
/// Dormand-Prince. The state Jacobian integrates the variational equation.
class NumericFlow final : public FlowBackend {
 public:
  using Field = std::function<Vec(const Vec&, int)>;
  using FieldJacobian = std::function<Mat(const Vec&, int)>;

  NumericFlow(int dim, Field f, std::optional<FieldJacobian> jac = std::nullopt,
              OdeOptions opts = {});

  int dim() const override { return dim_; }
  Vec field(const Vec& y, int u) const override { return f_(y, u); }
  Vec apply(const Vec& y, int u, double t) const override;
  Mat state_jacobian(const Vec& y, int u, double t) const override;
  Mat field_jacobian(const Vec& y, int u) const override;
  const OdeOptions& options() const { return opts_; }

 private:
  int dim_;
  Field f_;
  std::optional<FieldJacobian> jac_;
  OdeOptions opts_;
};

}  // namespace relaycoll
