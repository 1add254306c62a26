#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scalefit/optimize.hpp"
#include "scalefit/types.hpp"

namespace scalefit {

/// Initialization grid for the multi-start fits. Starts are enumerated as a
/// Cartesian product in row-major order with the later lists innermost:
///   single-variable fit      a, beta, e
///   joint free / stage one   a, (b,) alpha, beta, e
///   stage two                a, (b,) alpha
/// best_init_index in the reports refers to this enumeration.
struct InitGrid {
  std::vector<Real> a_values{0, 5, 10, 15};
  std::vector<Real> b_values{0, 5, 10};
  std::vector<Real> alpha_values{0, 0.25, 0.5, 1};
  std::vector<Real> beta_values{0, 0.05, 0.15, 0.5};
  std::vector<Real> e_values{-1, 0, 1};
};

/// Result of one law fit. residuals holds (index into the supplied run list,
/// prediction - loss) for every supplied run, both splits.
struct FitReport {
  AnyLaw law;
  Real delta_fit = 0;
  std::optional<Real> delta_held_out;
  Real objective_value = 0;
  bool converged = false;
  int best_init_index = -1;
  std::vector<std::pair<int, Real>> residuals;
};

/// Stage-one estimate: shared (beta, e) plus per-factor amplitude blocks.
struct Stage1Result {
  struct FactorParams {
    Real a = 0;
    std::optional<Real> b;
    Real alpha = 0;
  };

  Real beta = 0;
  Real e = 0;
  std::map<FactorKind, FactorParams> per_factor;
  Real objective_value = 0;
  bool converged = false;
  int best_init_index = -1;
};

/// Data-scaling fit over d_f alone; x is not consulted. Needs >= 4 fit-split
/// runs. Throws UnderdeterminedError / FitFailureError.
FitReport fit_single(std::span<const Run> runs, const InitGrid& grid,
                     const OptimizerConfig& opt, const HuberConfig& huber);

/// Joint fit of the model-size and pretraining-token groups with shared
/// (beta, e). PET groups are ignored here; their exponents come from stage
/// two with the shared tail pinned. Keys must include both required factors.
Stage1Result fit_joint_stage1(const std::map<FactorKind, std::vector<Run>>& groups,
                              LawForm form, const InitGrid& grid,
                              const OptimizerConfig& opt,
                              const HuberConfig& huber);

/// Per-factor refit with (beta, e) fixed. The returned law carries
/// fixed_beta and fixed_e verbatim.
FitReport fit_joint_stage2(std::span<const Run> runs, Real fixed_beta,
                           Real fixed_e, LawForm form, const InitGrid& grid,
                           const OptimizerConfig& opt, const HuberConfig& huber);

/// Single-group joint fit with every parameter free (the two_stage = false
/// path).
FitReport fit_joint_free(std::span<const Run> runs, LawForm form,
                         const InitGrid& grid, const OptimizerConfig& opt,
                         const HuberConfig& huber);

/// Mean absolute deviation of the law over one split of the given runs.
/// Throws ArgumentError when the split is empty.
Real evaluate_split(const AnyLaw& law, std::span<const Run> runs, Split split);

/// Number of optimizer workers: SCALEFIT_THREADS when set to a positive
/// integer, otherwise the hardware concurrency. Grid results are identical
/// for any worker count.
int grid_thread_count();

}  // namespace scalefit
