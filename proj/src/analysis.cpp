#include "scalefit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scalefit/laws.hpp"

namespace scalefit {

namespace {

bool same_parameters(const JointLaw& lhs, const JointLaw& rhs) {
  return lhs.form == rhs.form && lhs.a == rhs.a && lhs.b == rhs.b &&
         lhs.alpha == rhs.alpha && lhs.beta == rhs.beta && lhs.e == rhs.e;
}

void check_pair(const JointLaw& law1, const JointLaw& law2) {
  validate(law1);
  validate(law2);
  if (law1.factor.kind != law2.factor.kind) {
    throw ArgumentError("crossover laws must share a factor kind");
  }
}

}  // namespace

FormComparison compare_forms(const std::map<FitKey, FitReport>& fits) {
  std::set<std::pair<FactorKind, Method>> cells;
  for (const auto& [key, report] : fits) {
    cells.emplace(std::get<0>(key), std::get<1>(key));
  }
  if (cells.empty()) {
    throw ArgumentError("compare_forms needs at least one fit");
  }

  FormComparison comparison;
  Real mult_total = 0;
  Real add_total = 0;
  for (const auto& [factor, method] : cells) {
    FormComparisonRow row;
    row.factor = factor;
    row.method = method;
    for (LawForm form : {LawForm::multiplicative, LawForm::additive}) {
      const auto it = fits.find(FitKey{factor, method, form});
      const std::string cell = std::string("(") + to_string(factor) + ", " +
                               to_string(method) + ")";
      if (it == fits.end()) {
        throw ArgumentError(std::string("comparison is missing the ") +
                            to_string(form) + " fit for " + cell);
      }
      if (!it->second.delta_held_out) {
        throw ArgumentError(std::string("the ") + to_string(form) +
                            " fit for " + cell +
                            " has no held-out deviation");
      }
      (form == LawForm::multiplicative ? row.mult_delta_h : row.add_delta_h) =
          *it->second.delta_held_out;
    }
    mult_total += row.mult_delta_h;
    add_total += row.add_delta_h;
    comparison.rows.push_back(row);
  }
  const Real count = static_cast<Real>(comparison.rows.size());
  comparison.mult_average = mult_total / count;
  comparison.add_average = add_total / count;
  return comparison;
}

CriticalPoint critical_point_numeric(const JointLaw& law1, const JointLaw& law2,
                                     Real x, const Bracket& bracket) {
  check_pair(law1, law2);
  if (!(x > 0)) throw DomainError("x must be positive");
  if (!(bracket.lo > 0) || !(bracket.lo < bracket.hi)) {
    throw ArgumentError("bracket must satisfy 0 < lo < hi");
  }
  if (same_parameters(law1, law2)) {
    throw DegenerateError("identical laws cross everywhere");
  }

  const auto gap = [&](Real d) {
    return predict_joint(law1, x, d) - predict_joint(law2, x, d);
  };

  // Log-spaced sign scan; refinement hits only the first crossing, further
  // sign changes just set the multiplicity flag.
  constexpr int kScanPoints = 257;
  const Real log_lo = std::log(bracket.lo);
  const Real log_hi = std::log(bracket.hi);
  Array nodes(kScanPoints);
  for (int i = 0; i < kScanPoints; ++i) {
    nodes[i] = std::exp(log_lo + (log_hi - log_lo) * i / (kScanPoints - 1));
  }
  nodes[0] = bracket.lo;
  nodes[kScanPoints - 1] = bracket.hi;

  std::vector<std::pair<Real, Real>> endpoints;  // (d, g) at crossings
  int crossings = 0;
  Real exact_root = -1;
  Real prev_d = nodes[0];
  Real prev_g = gap(prev_d);
  if (!std::isfinite(prev_g)) {
    throw NumericalError("non-finite gap during crossover scan",
                         (Vector(1) << prev_d).finished());
  }
  if (prev_g == 0) {
    ++crossings;
    exact_root = prev_d;
  }
  for (int i = 1; i < kScanPoints; ++i) {
    const Real d = nodes[i];
    const Real g = gap(d);
    if (!std::isfinite(g)) {
      throw NumericalError("non-finite gap during crossover scan",
                           (Vector(1) << d).finished());
    }
    if (g == 0) {
      ++crossings;
      if (exact_root < 0) exact_root = d;
    } else if (prev_g != 0 && std::signbit(g) != std::signbit(prev_g)) {
      ++crossings;
      if (exact_root < 0 && endpoints.empty()) {
        endpoints.emplace_back(prev_d, prev_g);
        endpoints.emplace_back(d, g);
      }
    }
    prev_d = d;
    prev_g = g;
  }

  if (crossings == 0) {
    throw NoCrossoverError("no crossover inside the bracket");
  }

  Real root;
  if (exact_root >= 0 &&
      (endpoints.empty() || exact_root <= endpoints.front().first)) {
    root = exact_root;
  } else {
    Real lo = endpoints[0].first, g_lo = endpoints[0].second;
    Real hi = endpoints[1].first, g_hi = endpoints[1].second;
    for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
      const Real secant = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
      const Real width = hi - lo;
      const Real mid =
          (secant > lo + 0.01 * width && secant < hi - 0.01 * width)
              ? secant
              : 0.5 * (lo + hi);
      const Real g_mid = gap(mid);
      if (g_mid == 0) {
        lo = hi = mid;
        g_lo = g_hi = 0;
        break;
      }
      if (std::signbit(g_mid) == std::signbit(g_lo)) {
        lo = mid;
        g_lo = g_mid;
      } else {
        hi = mid;
        g_hi = g_mid;
      }
    }
    root = std::abs(g_lo) <= std::abs(g_hi) ? lo : hi;
  }

  const Real scale = std::max<Real>(1, std::abs(predict_joint(law1, x, root)));
  if (std::abs(gap(root)) > 1e-10 * scale) {
    throw NumericalError("crossover refinement did not reach tolerance",
                         (Vector(1) << root).finished());
  }
  return CriticalPoint{root, crossings > 1};
}

Real CriticalPowerLaw::critical_size(Real x) const {
  if (!(x > 0)) throw DomainError("x must be positive");
  return h * std::pow(x, gamma);
}

CriticalPowerLaw critical_point_closed_form(const JointLaw& law1,
                                            const JointLaw& law2) {
  check_pair(law1, law2);
  if (law1.form != LawForm::multiplicative ||
      law2.form != LawForm::multiplicative) {
    throw UnsupportedFormError(
        "closed-form crossover exists only for multiplicative laws");
  }
  if (law1.beta == law2.beta) {
    throw DegenerateError(
        "equal data exponents leave no closed-form crossover");
  }
  // H in log space: (A1/A2)^(1/(b1-b2)) overflows long before the answer does.
  CriticalPowerLaw out;
  out.h = std::exp((law1.a - law2.a) / (law1.beta - law2.beta));
  out.gamma = (law2.alpha - law1.alpha) / (law1.beta - law2.beta);
  return out;
}

std::vector<CriticalCurvePoint> critical_curve(const JointLaw& law1,
                                               const JointLaw& law2,
                                               std::span<const Real> x_values,
                                               const Bracket& bracket) {
  std::vector<CriticalCurvePoint> curve;
  curve.reserve(x_values.size());
  for (Real x : x_values) {
    CriticalCurvePoint point;
    point.x = x;
    try {
      const CriticalPoint found =
          critical_point_numeric(law1, law2, x, bracket);
      point.d_f = found.d_f;
      point.status = CrossoverStatus::found;
      point.multiple_crossings = found.multiple_crossings;
    } catch (const NoCrossoverError&) {
      point.status = CrossoverStatus::none;
    } catch (const DegenerateError&) {
      point.status = CrossoverStatus::degenerate;
    }
    curve.push_back(point);
  }
  return curve;
}

Real pearson_correlation(std::span<const std::pair<Real, Real>> pairs) {
  if (pairs.size() < 2) {
    throw ArgumentError("correlation needs at least two pairs");
  }
  const Real n = static_cast<Real>(pairs.size());
  Real mean_x = 0, mean_y = 0;
  for (const auto& [x, y] : pairs) {
    mean_x += x;
    mean_y += y;
  }
  mean_x /= n;
  mean_y /= n;
  Real sxx = 0, syy = 0, sxy = 0;
  for (const auto& [x, y] : pairs) {
    const Real dx = x - mean_x;
    const Real dy = y - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) {
    throw CorrelationError("zero variance makes the correlation undefined");
  }
  const Real r = sxy / std::sqrt(sxx * syy);
  return std::min<Real>(1, std::max<Real>(-1, r));
}

}  // namespace scalefit
