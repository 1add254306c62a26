#include "scalefit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace scalefit {

namespace {

constexpr Real kC1 = 1e-4;           // sufficient-decrease constant
constexpr Real kC2 = 0.9;            // curvature constant
constexpr Real kMaxStep = 1e10;
constexpr int kMaxBracket = 12;
constexpr int kMaxZoom = 30;
constexpr Real kInf = std::numeric_limits<Real>::infinity();

struct Probe {
  Real t = 0;
  Real f = kInf;
  Real df = 0;  // directional derivative g(x + t d) . d
  Vector g;     // valid only when f is finite
};

// Minimizer of the Hermite cubic through two probes, safeguarded into the
// middle of [lo, hi]; bisection when the interpolant degenerates.
Real cubic_step(const Probe& p, const Probe& q, Real lo, Real hi) {
  const Real mid = 0.5 * (lo + hi);
  const Real gap = hi - lo;
  if (!(gap > 0)) return mid;
  const Real d1 = p.df + q.df - 3 * (p.f - q.f) / (p.t - q.t);
  const Real disc = d1 * d1 - p.df * q.df;
  if (!(disc >= 0) || !std::isfinite(disc)) return mid;
  const Real d2 = std::copysign(std::sqrt(disc), q.t - p.t);
  Real t = q.t - (q.t - p.t) * (q.df + d2 - d1) / (q.df - p.df + 2 * d2);
  if (!std::isfinite(t)) return mid;
  return std::min(std::max(t, lo + 0.05 * gap), hi - 0.05 * gap);
}

class LineSearch {
 public:
  LineSearch(const std::function<Real(const Vector&, Vector&)>& fg,
             const Vector& x, const Vector& d, Real f0, Real df0)
      : fg_(fg), x_(x), d_(d), f0_(f0), df0_(df0) {}

  Probe eval(Real t) {
    Probe p;
    p.t = t;
    trial_ = x_ + t * d_;
    p.g.resize(x_.size());
    const Real f = fg_(trial_, p.g);
    // A non-finite trial only means the step went too far; the caller
    // shrinks the bracket instead of aborting.
    if (std::isfinite(f) && p.g.allFinite()) {
      p.f = f;
      p.df = p.g.dot(d_);
    }
    return p;
  }

  bool sufficient_decrease(const Probe& p) const {
    return p.f <= f0_ + kC1 * p.t * df0_;
  }
  bool curvature_ok(const Probe& p) const {
    return std::abs(p.df) <= -kC2 * df0_;
  }

  // Strong Wolfe search per Nocedal & Wright (bracket, then zoom with cubic
  // interpolation). Falls back to the best sufficient-decrease point when
  // the curvature condition is unreachable at numerical precision.
  bool search(Real t0, Probe& out) {
    Probe prev;
    prev.t = 0;
    prev.f = f0_;
    prev.df = df0_;
    Probe lo, hi;
    bool bracketed = false;
    Real t = t0;
    for (int i = 0; i < kMaxBracket; ++i) {
      Probe cur = eval(t);
      if (!std::isfinite(cur.f) ||
          !sufficient_decrease(cur) || (i > 0 && cur.f >= prev.f)) {
        lo = prev;
        hi = std::move(cur);
        bracketed = true;
        break;
      }
      if (curvature_ok(cur)) {
        out = std::move(cur);
        return true;
      }
      if (cur.df >= 0) {
        hi = std::move(prev);
        lo = std::move(cur);
        bracketed = true;
        break;
      }
      prev = std::move(cur);
      if (t >= kMaxStep) break;
      t = std::min(2 * t, kMaxStep);
    }
    if (!bracketed) {
      // Monotone decrease all the way out: take the furthest probe.
      if (prev.t > 0 && prev.f < f0_) {
        out = std::move(prev);
        return true;
      }
      return false;
    }
    for (int j = 0; j < kMaxZoom; ++j) {
      const Real a = std::min(lo.t, hi.t);
      const Real b = std::max(lo.t, hi.t);
      if (!(b - a > 1e-16 * std::max<Real>(1, b))) break;
      const Real t_next = std::isfinite(hi.f)
                              ? cubic_step(lo, hi, a, b)
                              : 0.5 * (lo.t + hi.t);
      Probe cur = eval(t_next);
      if (!std::isfinite(cur.f) || !sufficient_decrease(cur) ||
          cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (curvature_ok(cur)) {
        out = std::move(cur);
        return true;
      }
      if (cur.df * (hi.t - lo.t) >= 0) hi = std::move(lo);
      lo = std::move(cur);
    }
    if (lo.t > 0 && lo.f < f0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

 private:
  const std::function<Real(const Vector&, Vector&)>& fg_;
  const Vector& x_;
  const Vector& d_;
  Real f0_;
  Real df0_;
  Vector trial_;
};

}  // namespace

MinimizeResult lbfgs_minimize(
    const std::function<Real(const Vector&, Vector&)>& value_and_gradient,
    const Vector& init, const OptimizerConfig& cfg) {
  if (cfg.max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
  if (cfg.history_size < 1) throw ArgumentError("history_size must be >= 1");

  Vector x = init;
  Vector g(x.size());
  Real f = value_and_gradient(x, g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw NumericalError("non-finite objective or gradient at initial point", x);
  }

  MinimizeResult result;
  result.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (result.gradient_norm <= cfg.gradient_tolerance) {
    result.parameters = std::move(x);
    result.objective = f;
    result.converged = true;
    return result;
  }

  std::deque<Vector> s_hist, y_hist;
  std::deque<Real> rho_hist;
  std::vector<Real> alpha(static_cast<std::size_t>(cfg.history_size));
  Vector d(x.size());

  int iterations = 0;
  bool converged = false;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    // Two-loop recursion for d = -H g.
    d = -g;
    const int k = static_cast<int>(s_hist.size());
    for (int i = k - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      alpha[ui] = rho_hist[ui] * s_hist[ui].dot(d);
      d -= alpha[ui] * y_hist[ui];
    }
    if (k > 0) {
      d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (int i = 0; i < k; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Real beta = rho_hist[ui] * y_hist[ui].dot(d);
        d += (alpha[ui] - beta) * s_hist[ui];
      }
    }
    Real df0 = g.dot(d);
    if (!(df0 < 0)) {
      // Stale curvature produced a non-descent direction; restart steepest.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      df0 = -g.squaredNorm();
      if (!(df0 < 0)) break;
    }

    const Real t0 =
        iter == 1 ? std::min<Real>(1.0, 1.0 / g.template lpNorm<1>()) : 1.0;
    LineSearch line(value_and_gradient, x, d, f, df0);
    Probe accepted;
    if (!line.search(t0, accepted)) break;

    Vector s = accepted.t * d;
    Vector y = accepted.g - g;
    x += s;
    f = accepted.f;
    g = std::move(accepted.g);
    ++iterations;
    result.gradient_norm = g.lpNorm<Eigen::Infinity>();

    const Real step_norm = s.lpNorm<Eigen::Infinity>();
    const Real sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == cfg.history_size) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      rho_hist.push_back(1 / sy);
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
    }
    if (result.gradient_norm <= cfg.gradient_tolerance ||
        step_norm <= cfg.parameter_tolerance) {
      converged = true;
      break;
    }
  }

  result.parameters = std::move(x);
  result.objective = f;
  result.converged = converged;
  result.iterations = iterations;
  return result;
}

MinimizeResult minimize_huber_objective(const ResidualFamily& family,
                                        const Vector& init,
                                        const OptimizerConfig& cfg,
                                        const HuberConfig& huber) {
  HuberObjective objective(family, huber, cfg.finite_difference_gradients);
  const auto fg = [&objective](const Vector& theta, Vector& grad) {
    return objective.value_and_gradient(theta, grad);
  };
  return lbfgs_minimize(fg, init, cfg);
}

}  // namespace scalefit
