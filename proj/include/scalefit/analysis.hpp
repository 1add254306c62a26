#pragma once

#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "scalefit/fit.hpp"
#include "scalefit/types.hpp"

namespace scalefit {

// ---------------------------------------------------------------------------
// Form comparison
// ---------------------------------------------------------------------------

using FitKey = std::tuple<FactorKind, Method, LawForm>;

struct FormComparisonRow {
  FactorKind factor = FactorKind::model_size;
  Method method = Method::fmt;
  Real mult_delta_h = 0;
  Real add_delta_h = 0;
};

struct FormComparison {
  std::vector<FormComparisonRow> rows;  // sorted by (factor, method)
  Real mult_average = 0;                // arithmetic mean of the mult column
  Real add_average = 0;
};

/// Pairs up multiplicative and additive reports per (factor, method) and
/// tabulates held-out deviations. Every (factor, method) seen must carry both
/// forms with delta_held_out populated; a gap raises ArgumentError naming it.
FormComparison compare_forms(const std::map<FitKey, FitReport>& fits);

// ---------------------------------------------------------------------------
// Crossover analysis
// ---------------------------------------------------------------------------

struct Bracket {
  Real lo = 1.0;
  Real hi = 1e9;
};

struct CriticalPoint {
  Real d_f = 0;
  bool multiple_crossings = false;  // more than one sign change in the bracket
};

/// Smallest d_f in the bracket where the two laws predict equal loss at x,
/// found by a log-spaced sign scan plus secant/bisection refinement. The
/// root g satisfies |g| <= 1e-10 max(1, prediction). Throws DegenerateError
/// for identical laws, NoCrossoverError when no sign change lies in the
/// bracket.
CriticalPoint critical_point_numeric(const JointLaw& law1, const JointLaw& law2,
                                     Real x, const Bracket& bracket = {});

/// Closed-form crossover power law d_f^c(x) = H x^gamma for two
/// multiplicative laws over the same factor:
///   H = exp((a1 - a2) / (beta1 - beta2)),  gamma = (alpha2 - alpha1) / (beta1 - beta2).
/// Requires equal floors to hold exactly; the caller owns that judgment.
/// Throws UnsupportedFormError for additive laws, DegenerateError when
/// beta1 == beta2.
struct CriticalPowerLaw {
  Real h = 0;
  Real gamma = 0;

  Real critical_size(Real x) const;
};

CriticalPowerLaw critical_point_closed_form(const JointLaw& law1,
                                            const JointLaw& law2);

enum class CrossoverStatus { found, none, degenerate };

struct CriticalCurvePoint {
  Real x = 0;
  std::optional<Real> d_f;
  CrossoverStatus status = CrossoverStatus::none;
  bool multiple_crossings = false;
};

/// critical_point_numeric swept over x values; absences are recorded rather
/// than thrown.
std::vector<CriticalCurvePoint> critical_curve(const JointLaw& law1,
                                               const JointLaw& law2,
                                               std::span<const Real> x_values,
                                               const Bracket& bracket = {});

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

/// Pearson r, clamped to [-1, 1]. Throws ArgumentError for fewer than two
/// pairs, CorrelationError when either coordinate has zero variance.
Real pearson_correlation(std::span<const std::pair<Real, Real>> pairs);

}  // namespace scalefit
