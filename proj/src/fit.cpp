#include "scalefit/fit.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include "scalefit/laws.hpp"
#include "scalefit/objective.hpp"

namespace scalefit {

namespace {

struct SplitView {
  std::vector<Run> fit;
  std::vector<Run> held_out;
};

SplitView partition(std::span<const Run> runs) {
  SplitView view;
  for (const Run& run : runs) {
    (run.split == Split::fit ? view.fit : view.held_out).push_back(run);
  }
  return view;
}

std::size_t distinct_count(const std::vector<Run>& runs, Real Run::*field) {
  std::set<Real> values;
  for (const Run& run : runs) values.insert(run.*field);
  return values.size();
}

struct BestStart {
  Vector theta;
  Real objective = 0;
  bool converged = false;
  int index = -1;
};

/// Runs the optimizer from every start; the winner is the lowest finished
/// objective, with sub-1e-12 differences treated as ties resolved toward the
/// lower grid index. Work is farmed to threads but each start's computation
/// and the index-ordered reduction are shared-state-free, so the pick is
/// identical for any worker count.
BestStart run_grid(const ResidualFamily& family,
                   const std::vector<Vector>& starts,
                   const OptimizerConfig& opt, const HuberConfig& huber,
                   const std::string& what) {
  const int n = static_cast<int>(starts.size());
  std::vector<std::optional<MinimizeResult>> outcomes(
      static_cast<std::size_t>(n));
  const int workers = std::min(grid_thread_count(), n);

  const auto run_one = [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      outcomes[ui] = minimize_huber_objective(family, starts[ui], opt, huber);
    } catch (const NumericalError&) {
      // This start diverged; the grid may still produce a candidate.
    }
  };

  if (workers <= 1) {
    for (int i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<int> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  BestStart best;
  for (int i = 0; i < n; ++i) {
    const auto& outcome = outcomes[static_cast<std::size_t>(i)];
    if (!outcome) continue;
    if (best.index < 0 || outcome->objective < best.objective - 1e-12) {
      best.theta = outcome->parameters;
      best.objective = outcome->objective;
      best.converged = outcome->converged;
      best.index = i;
    }
  }
  if (best.index < 0) {
    throw FitFailureError(what + ": every grid start failed numerically");
  }
  return best;
}

FitReport make_report(AnyLaw law, std::span<const Run> runs,
                      const SplitView& view, const BestStart& best) {
  FitReport report;
  report.law = std::move(law);
  report.delta_fit = mean_abs_deviation(report.law, view.fit);
  if (!view.held_out.empty()) {
    report.delta_held_out = mean_abs_deviation(report.law, view.held_out);
  }
  report.objective_value = best.objective;
  report.converged = best.converged;
  report.best_init_index = best.index;
  report.residuals.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    report.residuals.emplace_back(
        static_cast<int>(i), predict(report.law, runs[i]) - runs[i].loss);
  }
  return report;
}

void require_single_factor(std::span<const Run> runs, const char* what) {
  for (const Run& run : runs) {
    if (run.factor.kind != runs.front().factor.kind) {
      throw ArgumentError(std::string(what) +
                          ": runs must share one factor kind");
    }
  }
}

}  // namespace

int grid_thread_count() {
  if (const char* env = std::getenv("SCALEFIT_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end && *end == '\0' && parsed >= 1 && parsed <= 1024) {
      return static_cast<int>(parsed);
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

FitReport fit_single(std::span<const Run> runs, const InitGrid& grid,
                     const OptimizerConfig& opt, const HuberConfig& huber) {
  const SplitView view = partition(runs);
  if (view.fit.size() < 4) {
    throw UnderdeterminedError(
        "single-variable fit needs at least 4 fit-split runs, got " +
        std::to_string(view.fit.size()));
  }
  SingleLawResiduals family(RunArrays::from_runs(view.fit));

  std::vector<Vector> starts;
  starts.reserve(grid.a_values.size() * grid.beta_values.size() *
                 grid.e_values.size());
  for (Real a : grid.a_values) {
    for (Real beta : grid.beta_values) {
      for (Real e : grid.e_values) {
        starts.push_back((Vector(3) << a, beta, e).finished());
      }
    }
  }
  const BestStart best = run_grid(family, starts, opt, huber, "fit_single");
  const SingleVarLaw law{best.theta[0], best.theta[1], best.theta[2]};
  return make_report(law, runs, view, best);
}

Stage1Result fit_joint_stage1(
    const std::map<FactorKind, std::vector<Run>>& groups, LawForm form,
    const InitGrid& grid, const OptimizerConfig& opt, const HuberConfig& huber) {
  // PET groups are excluded from the shared estimate by construction.
  const FactorKind wanted[] = {FactorKind::model_size,
                               FactorKind::pretraining_tokens};
  std::vector<RunArrays> arrays;
  for (FactorKind kind : wanted) {
    const auto it = groups.find(kind);
    if (it == groups.end() || it->second.empty()) {
      throw ArgumentError(std::string("stage one requires a ") +
                          to_string(kind) + " group");
    }
    const SplitView view = partition(it->second);
    if (distinct_count(view.fit, &Run::x) < 2 ||
        distinct_count(view.fit, &Run::d_f) < 4) {
      throw UnderdeterminedError(
          std::string("stage one needs >= 2 x values and >= 4 d_f values in "
                      "the fit split of the ") +
          to_string(kind) + " group");
    }
    arrays.push_back(RunArrays::from_runs(view.fit));
  }

  SharedTailResiduals family(form, std::move(arrays));
  const bool additive = form == LawForm::additive;

  // One per-factor (a, b, alpha) start is replicated across both factor
  // blocks, so the start count matches the single-group enumeration.
  std::vector<Vector> starts;
  for (Real a : grid.a_values) {
    for (std::size_t bi = 0; bi < (additive ? grid.b_values.size() : 1); ++bi) {
      for (Real alpha : grid.alpha_values) {
        for (Real beta : grid.beta_values) {
          for (Real e : grid.e_values) {
            Vector theta(family.parameter_count());
            for (Index gi = 0; gi < family.group_count(); ++gi) {
              const Index base = family.block_size() * gi;
              theta[base] = a;
              if (additive) {
                theta[base + 1] = grid.b_values[bi];
                theta[base + 2] = alpha;
              } else {
                theta[base + 1] = alpha;
              }
            }
            theta[family.block_size() * family.group_count()] = beta;
            theta[family.block_size() * family.group_count() + 1] = e;
            starts.push_back(std::move(theta));
          }
        }
      }
    }
  }

  const BestStart best =
      run_grid(family, starts, opt, huber, "fit_joint_stage1");

  Stage1Result result;
  const Index bs = family.block_size();
  result.beta = best.theta[bs * family.group_count()];
  result.e = best.theta[bs * family.group_count() + 1];
  for (Index gi = 0; gi < family.group_count(); ++gi) {
    Stage1Result::FactorParams params;
    const Index base = bs * gi;
    params.a = best.theta[base];
    if (additive) {
      params.b = best.theta[base + 1];
      params.alpha = best.theta[base + 2];
    } else {
      params.alpha = best.theta[base + 1];
    }
    result.per_factor[wanted[gi]] = params;
  }
  result.objective_value = best.objective;
  result.converged = best.converged;
  result.best_init_index = best.index;
  return result;
}

FitReport fit_joint_stage2(std::span<const Run> runs, Real fixed_beta,
                           Real fixed_e, LawForm form, const InitGrid& grid,
                           const OptimizerConfig& opt,
                           const HuberConfig& huber) {
  if (runs.empty()) throw ArgumentError("fit_joint_stage2: no runs supplied");
  if (!std::isfinite(fixed_beta) || !std::isfinite(fixed_e)) {
    throw ArgumentError("fit_joint_stage2: pinned beta and e must be finite");
  }
  require_single_factor(runs, "fit_joint_stage2");

  const SplitView view = partition(runs);
  const bool additive = form == LawForm::additive;
  const std::size_t free_params = additive ? 3 : 2;
  if (view.fit.size() < free_params + 1) {
    throw UnderdeterminedError(
        "stage-two fit needs at least " + std::to_string(free_params + 1) +
        " fit-split runs, got " + std::to_string(view.fit.size()));
  }
  if (distinct_count(view.fit, &Run::x) < 2) {
    throw UnderdeterminedError(
        "stage-two fit over a single x value cannot identify alpha");
  }

  PinnedJointResiduals family(form, RunArrays::from_runs(view.fit), fixed_beta,
                              fixed_e);
  std::vector<Vector> starts;
  for (Real a : grid.a_values) {
    if (additive) {
      for (Real b : grid.b_values) {
        for (Real alpha : grid.alpha_values) {
          starts.push_back((Vector(3) << a, b, alpha).finished());
        }
      }
    } else {
      for (Real alpha : grid.alpha_values) {
        starts.push_back((Vector(2) << a, alpha).finished());
      }
    }
  }
  const BestStart best =
      run_grid(family, starts, opt, huber, "fit_joint_stage2");

  JointLaw law;
  law.form = form;
  law.factor = runs.front().factor;
  law.a = best.theta[0];
  if (additive) {
    law.b = best.theta[1];
    law.alpha = best.theta[2];
  } else {
    law.alpha = best.theta[1];
  }
  law.beta = fixed_beta;  // pinned verbatim
  law.e = fixed_e;
  return make_report(law, runs, view, best);
}

FitReport fit_joint_free(std::span<const Run> runs, LawForm form,
                         const InitGrid& grid, const OptimizerConfig& opt,
                         const HuberConfig& huber) {
  if (runs.empty()) throw ArgumentError("fit_joint_free: no runs supplied");
  require_single_factor(runs, "fit_joint_free");

  const SplitView view = partition(runs);
  const bool additive = form == LawForm::additive;
  const std::size_t free_params = additive ? 5 : 4;
  if (view.fit.size() < free_params + 1) {
    throw UnderdeterminedError(
        "free joint fit needs at least " + std::to_string(free_params + 1) +
        " fit-split runs, got " + std::to_string(view.fit.size()));
  }
  if (distinct_count(view.fit, &Run::x) < 2) {
    throw UnderdeterminedError(
        "free joint fit over a single x value cannot identify alpha");
  }
  if (distinct_count(view.fit, &Run::d_f) < 2) {
    throw UnderdeterminedError(
        "free joint fit over a single d_f value cannot identify beta");
  }

  JointResiduals family(form, RunArrays::from_runs(view.fit));
  std::vector<Vector> starts;
  for (Real a : grid.a_values) {
    for (std::size_t bi = 0; bi < (additive ? grid.b_values.size() : 1); ++bi) {
      for (Real alpha : grid.alpha_values) {
        for (Real beta : grid.beta_values) {
          for (Real e : grid.e_values) {
            Vector theta(additive ? 5 : 4);
            if (additive) {
              theta << a, grid.b_values[bi], alpha, beta, e;
            } else {
              theta << a, alpha, beta, e;
            }
            starts.push_back(std::move(theta));
          }
        }
      }
    }
  }
  const BestStart best = run_grid(family, starts, opt, huber, "fit_joint_free");

  JointLaw law;
  law.form = form;
  law.factor = runs.front().factor;
  law.a = best.theta[0];
  if (additive) {
    law.b = best.theta[1];
    law.alpha = best.theta[2];
    law.beta = best.theta[3];
    law.e = best.theta[4];
  } else {
    law.alpha = best.theta[1];
    law.beta = best.theta[2];
    law.e = best.theta[3];
  }
  return make_report(law, runs, view, best);
}

Real evaluate_split(const AnyLaw& law, std::span<const Run> runs, Split split) {
  std::vector<Run> selected;
  for (const Run& run : runs) {
    if (run.split == split) selected.push_back(run);
  }
  if (selected.empty()) {
    throw ArgumentError(std::string("no runs in the ") + to_string(split) +
                        " split");
  }
  return mean_abs_deviation(law, selected);
}

}  // namespace scalefit
