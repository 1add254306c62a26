#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <scalefit/objective.hpp>
#include <scalefit/optimize.hpp>
#include <scalefit/synth.hpp>
#include <scalefit/types.hpp>

using namespace scalefit;

namespace {

// r(theta) = theta - target, one residual per coordinate.
class ShiftResiduals final : public ResidualFamily {
 public:
  explicit ShiftResiduals(Vector target) : target_(std::move(target)) {}

  Index residual_count() const override { return target_.size(); }
  Index parameter_count() const override { return target_.size(); }

  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override {
    residuals = (theta - target_).array();
    if (jacobian != nullptr) {
      jacobian->setIdentity(target_.size(), target_.size());
    }
  }

 private:
  Vector target_;
};

// Exponential blow-up used to provoke non-finite objective values.
class ExplodingResiduals final : public ResidualFamily {
 public:
  Index residual_count() const override { return 1; }
  Index parameter_count() const override { return 1; }
  void evaluate(const Vector& theta, Array& residuals,
                Matrix* jacobian) const override {
    residuals.resize(1);
    residuals[0] = std::exp(theta[0]);
    if (jacobian != nullptr) {
      jacobian->resize(1, 1);
      (*jacobian)(0, 0) = std::exp(theta[0]);
    }
  }
};

RunArrays arrays_from(const std::vector<Run>& runs) {
  return RunArrays::from_runs(runs);
}

Vector fd_gradient(const HuberObjective& obj, const Vector& theta) {
  const Real h = 1e-6;
  Vector g(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    Vector lo = theta, hi = theta;
    lo[i] -= h;
    hi[i] += h;
    g[i] = (obj.value(hi) - obj.value(lo)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("quadratic bowl converges to the residual root") {
  Vector target(2);
  target << 3.0, -1.5;
  ShiftResiduals family(target);
  Vector init = Vector::Zero(2);
  const auto result =
      minimize_huber_objective(family, init, OptimizerConfig{}, HuberConfig{10.0});
  CHECK(result.converged);
  CHECK(std::abs(result.parameters[0] - 3.0) < 1e-6);
  CHECK(std::abs(result.parameters[1] + 1.5) < 1e-6);
  CHECK(result.objective < 1e-12);
}

TEST_CASE("zero gradient at the start returns immediately") {
  Vector target(2);
  target << 4.0, 4.0;
  ShiftResiduals family(target);
  const auto result = minimize_huber_objective(family, target, OptimizerConfig{},
                                               HuberConfig{1.0});
  CHECK(result.converged);
  CHECK(result.iterations == 0);
  CHECK(result.parameters == target);
}

TEST_CASE("non-finite objective at the start raises with the iterate") {
  ExplodingResiduals family;
  Vector init(1);
  init << 1e4;  // exp overflows to inf
  bool threw = false;
  try {
    minimize_huber_objective(family, init, OptimizerConfig{}, HuberConfig{1.0});
  } catch (const NumericalError& err) {
    threw = true;
    REQUIRE(err.iterate().size() == 1);
    CHECK(err.iterate()[0] == 1e4);
  }
  CHECK(threw);
}

TEST_CASE("rosenbrock valley is traversed to the global minimum") {
  const auto fg = [](const Vector& p, Vector& g) {
    const Real x = p[0], y = p[1];
    g.resize(2);
    g[0] = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x);
    g[1] = 200.0 * (y - x * x);
    const Real t = y - x * x;
    return 100.0 * t * t + (1.0 - x) * (1.0 - x);
  };
  Vector init(2);
  init << -1.2, 1.0;
  const auto result = lbfgs_minimize(fg, init, OptimizerConfig{});
  CHECK(result.converged);
  CHECK(std::abs(result.parameters[0] - 1.0) < 1e-6);
  CHECK(std::abs(result.parameters[1] - 1.0) < 1e-6);
}

TEST_CASE("line search survives non-finite trial points") {
  // Objective finite near the start but infinite for theta > 10; the search
  // must shrink past the cliff instead of aborting.
  const auto fg = [](const Vector& p, Vector& g) {
    const Real x = p[0];
    if (x > 10.0) {
      g.resize(1);
      g[0] = std::numeric_limits<Real>::quiet_NaN();
      return std::numeric_limits<Real>::infinity();
    }
    g.resize(1);
    g[0] = 2.0 * (x - 9.0);
    return (x - 9.0) * (x - 9.0);
  };
  Vector init(1);
  init << 0.0;
  const auto result = lbfgs_minimize(fg, init, OptimizerConfig{});
  CHECK(result.converged);
  CHECK(std::abs(result.parameters[0] - 9.0) < 1e-6);
}

TEST_CASE("iteration cap is honored") {
  const auto fg = [](const Vector& p, Vector& g) {
    g.resize(1);
    g[0] = 2.0 * p[0];
    return p[0] * p[0];
  };
  Vector init(1);
  init << 100.0;
  OptimizerConfig cfg;
  cfg.max_iterations = 1;
  const auto result = lbfgs_minimize(fg, init, cfg);
  CHECK(result.iterations <= 1);
}

TEST_CASE("analytic gradients match finite differences for every family") {
  const auto law = JointLaw::multiplicative(
      ScalingFactor::of(FactorKind::model_size), 1.2e5, 0.52, 0.15, 0.75);
  GridSpec grid;
  grid.x_values = {1e9, 2e9, 4e9, 8e9};
  grid.d_f_values = {1e5, 5e5, 1e6, 2e6, 4.5e6};
  const auto runs = generate(law, grid, NoiseSpec{0.01, 3});
  const RunArrays data = arrays_from(runs);
  const HuberConfig huber{};

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Real> ua(5.0, 13.0);
  std::uniform_real_distribution<Real> ue(0.01, 0.8);
  std::uniform_real_distribution<Real> uf(-1.0, 0.2);

  const auto check_family = [&](const ResidualFamily& family,
                                const Vector& theta) {
    HuberObjective obj(family, huber);
    Vector analytic(theta.size());
    const Real value = obj.value_and_gradient(theta, analytic);
    CHECK(value == obj.value(theta));
    const Vector fd = fd_gradient(obj, theta);
    // The central difference itself carries cancellation noise of order
    // eps * |f| / h, which dominates for components whose gradient is tiny
    // relative to the objective.
    const Real fd_noise =
        std::numeric_limits<Real>::epsilon() * std::abs(value) / 1e-6;
    for (Index i = 0; i < theta.size(); ++i) {
      const Real scale = std::max<Real>(1e-8, std::abs(fd[i]));
      CHECK(std::abs(analytic[i] - fd[i]) <= 1e-4 * scale + 8 * fd_noise);
    }
  };

  for (int trial = 0; trial < 20; ++trial) {
    Vector single(3);
    single << ua(rng), ue(rng), uf(rng);
    check_family(SingleLawResiduals(data), single);

    Vector mult(4);
    mult << ua(rng), ue(rng), ue(rng), uf(rng);
    check_family(JointResiduals(LawForm::multiplicative, data), mult);

    Vector add(5);
    add << ua(rng), ua(rng) - 3.0, ue(rng), ue(rng), uf(rng);
    check_family(JointResiduals(LawForm::additive, data), add);

    Vector pinned_m(2);
    pinned_m << ua(rng), ue(rng);
    check_family(PinnedJointResiduals(LawForm::multiplicative, data, 0.15,
                                      std::log(0.75)),
                 pinned_m);

    Vector pinned_a(3);
    pinned_a << ua(rng), ua(rng) - 3.0, ue(rng);
    check_family(PinnedJointResiduals(LawForm::additive, data, 0.15,
                                      std::log(0.75)),
                 pinned_a);

    SharedTailResiduals shared(LawForm::multiplicative, {data, data});
    Vector shared_theta(6);
    shared_theta << ua(rng), ue(rng), ua(rng), ue(rng), ue(rng), uf(rng);
    check_family(shared, shared_theta);

    SharedTailResiduals shared_add(LawForm::additive, {data, data});
    Vector shared_add_theta(8);
    shared_add_theta << ua(rng), ua(rng) - 3.0, ue(rng), ua(rng),
        ua(rng) - 3.0, ue(rng), ue(rng), uf(rng);
    check_family(shared_add, shared_add_theta);
  }
}

TEST_CASE("finite-difference fallback tracks the analytic gradient") {
  const auto law = JointLaw::multiplicative(
      ScalingFactor::of(FactorKind::model_size), 3.3e3, 0.34, 0.14, 1.0);
  GridSpec grid;
  grid.x_values = {1e9, 4e9};
  grid.d_f_values = {1e4, 1e5, 1e6};
  const auto runs = generate(law, grid, NoiseSpec{});
  JointResiduals family(LawForm::multiplicative, arrays_from(runs));

  HuberObjective analytic(family, HuberConfig{}, false);
  HuberObjective fallback(family, HuberConfig{}, true);
  Vector theta(4);
  theta << 8.0, 0.3, 0.12, 0.1;
  Vector ga(4), gf(4);
  analytic.value_and_gradient(theta, ga);
  fallback.value_and_gradient(theta, gf);
  for (Index i = 0; i < 4; ++i) {
    CHECK(std::abs(ga[i] - gf[i]) <=
          1e-5 * std::max<Real>(1e-8, std::abs(ga[i])));
  }
}

TEST_CASE("shared-tail layout stacks group blocks before the common tail") {
  const auto law = JointLaw::multiplicative(
      ScalingFactor::of(FactorKind::model_size), 1e3, 0.3, 0.1, 0.5);
  GridSpec grid;
  grid.x_values = {1e9, 2e9};
  grid.d_f_values = {1e4, 1e5};
  const auto runs = generate(law, grid, NoiseSpec{});
  const RunArrays data = arrays_from(runs);

  SharedTailResiduals shared(LawForm::multiplicative, {data, data});
  REQUIRE(shared.parameter_count() == 6);
  REQUIRE(shared.residual_count() == 8);
  CHECK(shared.block_size() == 2);
  CHECK(shared.group_count() == 2);

  // With identical per-factor blocks the stacked residuals repeat the
  // single-group residuals twice.
  JointResiduals lone(LawForm::multiplicative, data);
  Vector lone_theta(4);
  lone_theta << 7.0, 0.3, 0.1, -0.7;
  Vector shared_theta(6);
  shared_theta << 7.0, 0.3, 7.0, 0.3, 0.1, -0.7;
  Array r_lone, r_shared;
  lone.evaluate(lone_theta, r_lone, nullptr);
  shared.evaluate(shared_theta, r_shared, nullptr);
  for (Index i = 0; i < 4; ++i) {
    CHECK(r_shared[i] == r_lone[i]);
    CHECK(r_shared[i + 4] == r_lone[i]);
  }
}

TEST_CASE("run arrays reject non-positive coordinates") {
  std::vector<Run> bad = {Run{"t", Method::fmt,
                              ScalingFactor::of(FactorKind::model_size), 0.0,
                              1e5, 1.0, Split::fit}};
  CHECK_THROWS_AS(RunArrays::from_runs(bad), DomainError);
}
