#pragma once

#include <span>
#include <vector>

#include "scalefit/types.hpp"

namespace scalefit {

/// A differentiable residual vector r(theta) with analytic Jacobian. Fits
/// compose these with a Huber loss; the families below cache log(x), log(d_f)
/// and the observed losses so evaluation is a handful of array expressions.
class ResidualFamily {
 public:
  virtual ~ResidualFamily() = default;

  virtual Index residual_count() const = 0;
  virtual Index parameter_count() const = 0;

  /// Fills residuals (size residual_count). When jacobian is non-null it is
  /// resized to residual_count x parameter_count and filled.
  virtual void evaluate(const Vector& theta, Array& residuals,
                        Matrix* jacobian) const = 0;
};

/// Cached per-group arrays for one factor's runs.
struct RunArrays {
  Array log_x;
  Array log_d;
  Array loss;

  static RunArrays from_runs(std::span<const Run> runs);
  Index size() const { return loss.size(); }
};

/// theta = (a, beta, e); r_i = exp(a - beta ld_i) + exp(e) - loss_i.
class SingleLawResiduals final : public ResidualFamily {
 public:
  explicit SingleLawResiduals(RunArrays data);

  Index residual_count() const override { return data_.size(); }
  Index parameter_count() const override { return 3; }
  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override;

 private:
  RunArrays data_;
};

/// Joint law over one factor group, all parameters free.
/// Multiplicative theta = (a, alpha, beta, e); additive (a, b, alpha, beta, e).
class JointResiduals final : public ResidualFamily {
 public:
  JointResiduals(LawForm form, RunArrays data);

  Index residual_count() const override { return data_.size(); }
  Index parameter_count() const override {
    return form_ == LawForm::multiplicative ? 4 : 5;
  }
  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override;

 private:
  LawForm form_;
  RunArrays data_;
};

/// Joint law with (beta, e) pinned. Multiplicative theta = (a, alpha);
/// additive (a, b, alpha).
class PinnedJointResiduals final : public ResidualFamily {
 public:
  PinnedJointResiduals(LawForm form, RunArrays data, Real beta, Real e);

  Index residual_count() const override { return data_.size(); }
  Index parameter_count() const override {
    return form_ == LawForm::multiplicative ? 2 : 3;
  }
  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override;

 private:
  LawForm form_;
  RunArrays data_;
  Real beta_;
  Real e_;
};

/// Stacked residuals for several factor groups sharing (beta, e). Parameter
/// layout: per-factor blocks in group order, then the shared tail.
/// Multiplicative: (a_1, alpha_1, ..., a_k, alpha_k, beta, e).
/// Additive:       (a_1, b_1, alpha_1, ..., beta, e).
class SharedTailResiduals final : public ResidualFamily {
 public:
  SharedTailResiduals(LawForm form, std::vector<RunArrays> groups);

  Index residual_count() const override { return total_; }
  Index parameter_count() const override;
  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override;

  Index group_count() const { return static_cast<Index>(groups_.size()); }
  Index block_size() const { return form_ == LawForm::multiplicative ? 2 : 3; }

 private:
  LawForm form_;
  std::vector<RunArrays> groups_;
  Index total_ = 0;
};

/// F(theta) = sum_i huber(r_i(theta)); gradient J^T psi(r). The
/// finite-difference path replaces the analytic gradient with a central
/// difference of F, step 1e-6.
class HuberObjective {
 public:
  HuberObjective(const ResidualFamily& family, HuberConfig huber,
                 bool finite_difference = false);

  Real value(const Vector& theta) const;
  Real value_and_gradient(const Vector& theta, Vector& gradient) const;

 private:
  const ResidualFamily& family_;
  HuberConfig huber_;
  bool finite_difference_;
  mutable Array residuals_;
  mutable Matrix jacobian_;
};

}  // namespace scalefit
