#include "scalefit/objective.hpp"

#include <cmath>

#include "scalefit/laws.hpp"

namespace scalefit {

RunArrays RunArrays::from_runs(std::span<const Run> runs) {
  RunArrays out;
  const Index n = static_cast<Index>(runs.size());
  out.log_x.resize(n);
  out.log_d.resize(n);
  out.loss.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Run& run = runs[static_cast<std::size_t>(i)];
    if (!(run.x > 0) || !(run.d_f > 0)) {
      throw DomainError("run coordinates must be positive");
    }
    out.log_x[i] = std::log(run.x);
    out.log_d[i] = std::log(run.d_f);
    out.loss[i] = run.loss;
  }
  return out;
}

SingleLawResiduals::SingleLawResiduals(RunArrays data) : data_(std::move(data)) {}

void SingleLawResiduals::evaluate(const Vector& theta, Array& residuals,
                                  Matrix* jacobian) const {
  const Real a = theta[0], beta = theta[1], e = theta[2];
  const Array term = (a - beta * data_.log_d).exp();
  const Real floor = std::exp(e);
  residuals = term + floor - data_.loss;
  if (jacobian) {
    jacobian->resize(data_.size(), 3);
    jacobian->col(0) = term;
    jacobian->col(1) = -data_.log_d * term;
    jacobian->col(2).setConstant(floor);
  }
}

JointResiduals::JointResiduals(LawForm form, RunArrays data)
    : form_(form), data_(std::move(data)) {}

void JointResiduals::evaluate(const Vector& theta, Array& residuals,
                              Matrix* jacobian) const {
  if (form_ == LawForm::multiplicative) {
    const Real a = theta[0], alpha = theta[1], beta = theta[2], e = theta[3];
    const Array term = (a - alpha * data_.log_x - beta * data_.log_d).exp();
    const Real floor = std::exp(e);
    residuals = term + floor - data_.loss;
    if (jacobian) {
      jacobian->resize(data_.size(), 4);
      jacobian->col(0) = term;
      jacobian->col(1) = -data_.log_x * term;
      jacobian->col(2) = -data_.log_d * term;
      jacobian->col(3).setConstant(floor);
    }
    return;
  }
  const Real a = theta[0], b = theta[1], alpha = theta[2], beta = theta[3],
             e = theta[4];
  const Array u = (a - alpha * data_.log_x).exp();
  const Array v = (b - beta * data_.log_d).exp();
  const Real floor = std::exp(e);
  residuals = u + v + floor - data_.loss;
  if (jacobian) {
    jacobian->resize(data_.size(), 5);
    jacobian->col(0) = u;
    jacobian->col(1) = v;
    jacobian->col(2) = -data_.log_x * u;
    jacobian->col(3) = -data_.log_d * v;
    jacobian->col(4).setConstant(floor);
  }
}

PinnedJointResiduals::PinnedJointResiduals(LawForm form, RunArrays data,
                                           Real beta, Real e)
    : form_(form), data_(std::move(data)), beta_(beta), e_(e) {}

void PinnedJointResiduals::evaluate(const Vector& theta, Array& residuals,
                                    Matrix* jacobian) const {
  const Real floor = std::exp(e_);
  if (form_ == LawForm::multiplicative) {
    const Real a = theta[0], alpha = theta[1];
    const Array term = (a - alpha * data_.log_x - beta_ * data_.log_d).exp();
    residuals = term + floor - data_.loss;
    if (jacobian) {
      jacobian->resize(data_.size(), 2);
      jacobian->col(0) = term;
      jacobian->col(1) = -data_.log_x * term;
    }
    return;
  }
  const Real a = theta[0], b = theta[1], alpha = theta[2];
  const Array u = (a - alpha * data_.log_x).exp();
  const Array v = (b - beta_ * data_.log_d).exp();
  residuals = u + v + floor - data_.loss;
  if (jacobian) {
    jacobian->resize(data_.size(), 3);
    jacobian->col(0) = u;
    jacobian->col(1) = v;
    jacobian->col(2) = -data_.log_x * u;
  }
}

SharedTailResiduals::SharedTailResiduals(LawForm form,
                                         std::vector<RunArrays> groups)
    : form_(form), groups_(std::move(groups)) {
  for (const RunArrays& g : groups_) total_ += g.size();
}

Index SharedTailResiduals::parameter_count() const {
  return block_size() * group_count() + 2;
}

void SharedTailResiduals::evaluate(const Vector& theta, Array& residuals,
                                   Matrix* jacobian) const {
  const Index bs = block_size();
  const Index k = group_count();
  const Real beta = theta[bs * k];
  const Real e = theta[bs * k + 1];
  const Real floor = std::exp(e);
  residuals.resize(total_);
  if (jacobian) {
    jacobian->resize(total_, parameter_count());
    jacobian->setZero();
  }
  Index row = 0;
  for (Index gi = 0; gi < k; ++gi) {
    const RunArrays& g = groups_[static_cast<std::size_t>(gi)];
    const Index n = g.size();
    const Index base = bs * gi;
    if (form_ == LawForm::multiplicative) {
      const Real a = theta[base], alpha = theta[base + 1];
      const Array term = (a - alpha * g.log_x - beta * g.log_d).exp();
      residuals.segment(row, n) = term + floor - g.loss;
      if (jacobian) {
        jacobian->col(base).segment(row, n) = term;
        jacobian->col(base + 1).segment(row, n) = -g.log_x * term;
        jacobian->col(bs * k).segment(row, n) = -g.log_d * term;
        jacobian->col(bs * k + 1).segment(row, n).setConstant(floor);
      }
    } else {
      const Real a = theta[base], b = theta[base + 1], alpha = theta[base + 2];
      const Array u = (a - alpha * g.log_x).exp();
      const Array v = (b - beta * g.log_d).exp();
      residuals.segment(row, n) = u + v + floor - g.loss;
      if (jacobian) {
        jacobian->col(base).segment(row, n) = u;
        jacobian->col(base + 1).segment(row, n) = v;
        jacobian->col(base + 2).segment(row, n) = -g.log_x * u;
        jacobian->col(bs * k).segment(row, n) = -g.log_d * v;
        jacobian->col(bs * k + 1).segment(row, n).setConstant(floor);
      }
    }
    row += n;
  }
}

HuberObjective::HuberObjective(const ResidualFamily& family, HuberConfig huber,
                               bool finite_difference)
    : family_(family), huber_(huber), finite_difference_(finite_difference) {
  if (!(huber_.delta > 0)) throw ArgumentError("huber delta must be positive");
}

Real HuberObjective::value(const Vector& theta) const {
  family_.evaluate(theta, residuals_, nullptr);
  const Real delta = huber_.delta;
  Real total = 0;
  for (Index i = 0; i < residuals_.size(); ++i) {
    const Real r = residuals_[i];
    const Real ar = std::abs(r);
    total += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
  }
  return total;
}

Real HuberObjective::value_and_gradient(const Vector& theta,
                                        Vector& gradient) const {
  if (finite_difference_) {
    const Real h = 1e-6;
    gradient.resize(theta.size());
    Vector probe = theta;
    for (Index i = 0; i < theta.size(); ++i) {
      probe[i] = theta[i] + h;
      const Real up = value(probe);
      probe[i] = theta[i] - h;
      const Real down = value(probe);
      probe[i] = theta[i];
      gradient[i] = (up - down) / (2 * h);
    }
    return value(theta);
  }
  family_.evaluate(theta, residuals_, &jacobian_);
  const Real delta = huber_.delta;
  Real total = 0;
  Array psi(residuals_.size());
  for (Index i = 0; i < residuals_.size(); ++i) {
    const Real r = residuals_[i];
    const Real ar = std::abs(r);
    total += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
    psi[i] = std::min(std::max(r, -delta), delta);
  }
  gradient = jacobian_.transpose() * psi.matrix();
  return total;
}

}  // namespace scalefit
