#pragma once

#include <span>

#include "scalefit/types.hpp"

namespace scalefit {

/// L(d_f) = A / d_f^beta + E. Throws DomainError for d_f <= 0.
Real predict_single(const SingleVarLaw& law, Real d_f);
Array predict_single(const SingleVarLaw& law, const Eigen::Ref<const Array>& d_f);

/// Multiplicative: L(x, d_f) = A x^-alpha d_f^-beta + E.
/// Additive:       L(x, d_f) = A x^-alpha + B d_f^-beta + E.
/// Throws DomainError for non-positive x or d_f, InvalidLawError for a law
/// whose b presence disagrees with its form.
Real predict_joint(const JointLaw& law, Real x, Real d_f);
Array predict_joint(const JointLaw& law, const Eigen::Ref<const Array>& x,
                    const Eigen::Ref<const Array>& d_f);

Real predict(const AnyLaw& law, const Run& run);

/// 0.5 r^2 inside |r| <= delta, delta (|r| - delta/2) outside; C1 at the knot.
Real huber_loss(Real residual, const HuberConfig& cfg);

/// d huber / d r: r clamped to [-delta, delta].
Real huber_psi(Real residual, const HuberConfig& cfg);

/// Mean |prediction - loss| in raw perplexity space. Order-invariant.
/// Throws ArgumentError on an empty run list.
Real mean_abs_deviation(const AnyLaw& law, std::span<const Run> runs);

}  // namespace scalefit
