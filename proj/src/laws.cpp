#include "scalefit/laws.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scalefit {

namespace {

void require_positive(Real value, const char* name) {
  if (!(value > 0)) {
    throw DomainError(std::string(name) + " must be positive");
  }
}

void require_positive(const Eigen::Ref<const Array>& values, const char* name) {
  if (values.size() == 0) return;
  if (!(values > 0).all()) {
    throw DomainError(std::string(name) + " must be positive");
  }
}

}  // namespace

Real predict_single(const SingleVarLaw& law, Real d_f) {
  require_positive(d_f, "d_f");
  return std::exp(law.a - law.beta * std::log(d_f)) + std::exp(law.e);
}

Array predict_single(const SingleVarLaw& law, const Eigen::Ref<const Array>& d_f) {
  require_positive(d_f, "d_f");
  return (law.a - law.beta * d_f.log()).exp() + std::exp(law.e);
}

Real predict_joint(const JointLaw& law, Real x, Real d_f) {
  validate(law);
  require_positive(x, "x");
  require_positive(d_f, "d_f");
  const Real lx = std::log(x);
  const Real ld = std::log(d_f);
  if (law.form == LawForm::multiplicative) {
    return std::exp(law.a - law.alpha * lx - law.beta * ld) + std::exp(law.e);
  }
  return std::exp(law.a - law.alpha * lx) + std::exp(*law.b - law.beta * ld) +
         std::exp(law.e);
}

Array predict_joint(const JointLaw& law, const Eigen::Ref<const Array>& x,
                    const Eigen::Ref<const Array>& d_f) {
  validate(law);
  require_positive(x, "x");
  require_positive(d_f, "d_f");
  if (x.size() != d_f.size()) {
    throw ArgumentError("x and d_f must have equal length");
  }
  if (law.form == LawForm::multiplicative) {
    return (law.a - law.alpha * x.log() - law.beta * d_f.log()).exp() +
           std::exp(law.e);
  }
  return (law.a - law.alpha * x.log()).exp() +
         (*law.b - law.beta * d_f.log()).exp() + std::exp(law.e);
}

Real predict(const AnyLaw& law, const Run& run) {
  if (const auto* single = std::get_if<SingleVarLaw>(&law)) {
    return predict_single(*single, run.d_f);
  }
  return predict_joint(std::get<JointLaw>(law), run.x, run.d_f);
}

Real huber_loss(Real residual, const HuberConfig& cfg) {
  if (!(cfg.delta > 0)) throw ArgumentError("huber delta must be positive");
  const Real r = std::abs(residual);
  if (r <= cfg.delta) return 0.5 * residual * residual;
  return cfg.delta * (r - 0.5 * cfg.delta);
}

Real huber_psi(Real residual, const HuberConfig& cfg) {
  if (!(cfg.delta > 0)) throw ArgumentError("huber delta must be positive");
  return std::min(std::max(residual, -cfg.delta), cfg.delta);
}

Real mean_abs_deviation(const AnyLaw& law, std::span<const Run> runs) {
  if (runs.empty()) {
    throw ArgumentError("mean_abs_deviation needs at least one run");
  }
  // Summing in sorted order makes the result exactly permutation-invariant.
  std::vector<Real> deviations;
  deviations.reserve(runs.size());
  for (const Run& run : runs) {
    deviations.push_back(std::abs(predict(law, run) - run.loss));
  }
  std::sort(deviations.begin(), deviations.end());
  Real total = 0;
  for (Real d : deviations) total += d;
  return total / static_cast<Real>(runs.size());
}

}  // namespace scalefit
