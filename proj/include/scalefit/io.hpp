#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalefit/analysis.hpp"
#include "scalefit/fit.hpp"
#include "scalefit/synth.hpp"
#include "scalefit/types.hpp"

namespace scalefit {

struct IngestOptions {
  /// Collapse rows identical in (task, method, factor, x, d_f, split) to one
  /// row carrying the mean loss.
  bool average_seed_runs = false;
};

struct Provenance {
  std::string source;
  bool averaged = false;
};

struct RunTable {
  std::vector<Run> rows;
  Provenance provenance;
};

/// Reads the run CSV schema: header `task,method,factor,x,d_f,loss,split`,
/// numeric fields in decimal or scientific notation. Malformed rows, unknown
/// labels and non-positive x / d_f / loss raise ParseError naming the
/// 1-based line; a file with no data rows raises EmptyDatasetError.
RunTable ingest_csv(const std::filesystem::path& path,
                    const IngestOptions& options = {});
RunTable ingest_csv(std::istream& in, const std::string& source_name,
                    const IngestOptions& options = {});

/// Writes rows back in schema order with shortest round-trip numerals, so
/// ingest(write(ingest(f))) == ingest(f) byte for byte.
void write_csv(std::span<const Run> rows, std::ostream& out);
void write_csv(std::span<const Run> rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Job configuration
// ---------------------------------------------------------------------------

struct JobConfig {
  HuberConfig huber;
  InitGrid grid;
  OptimizerConfig optimizer;
  std::vector<LawForm> forms{LawForm::multiplicative, LawForm::additive};
  bool two_stage = true;
  bool average_seed_runs = false;
};

/// Parses a config JSON object; absent keys keep their defaults. Unknown
/// keys and non-positive tolerances raise ArgumentError.
JobConfig job_config_from_json(const nlohmann::json& j);
JobConfig load_job_config(const std::filesystem::path& path);
nlohmann::json job_config_to_json(const JobConfig& cfg);

// ---------------------------------------------------------------------------
// Law and report serialization
// ---------------------------------------------------------------------------

nlohmann::json law_to_json(const JointLaw& law);
/// Accepts either log-space keys (a, b, alpha, beta, e) or natural-space
/// amplitudes (A, B, E); log keys win when both are present.
JointLaw law_from_json(const nlohmann::json& j);

nlohmann::json fit_report_to_json(const FitReport& report);
FitReport fit_report_from_json(const nlohmann::json& j);

GridSpec grid_spec_from_json(const nlohmann::json& j);
nlohmann::json grid_spec_to_json(const GridSpec& grid);

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Full fitting pipeline over a run table: per (task, method, form) either
/// the two-stage recipe (stage one over the model-size and pretraining
/// groups, stage two per factor with the shared tail pinned) or free
/// per-factor fits. Returns the report bundle: per-fit reports, a parameter
/// summary, and a held-out form comparison when both forms were fitted.
nlohmann::json run_fit_command(const RunTable& table, const JobConfig& cfg);

/// Rebuilds the comparison table from a report bundle produced by
/// run_fit_command.
nlohmann::json run_compare_command(const nlohmann::json& report_bundle);

struct CurveRange {
  Real d_f_min = 0;
  Real d_f_max = 0;
  int samples = 0;
};

struct LabeledLaw {
  std::string label;
  JointLaw law;
};

/// Tab-separated prediction curves, one block per law: columns x, d_f, loss;
/// d_f sampled log-uniformly over the range at each x.
void emit_curves(std::span<const LabeledLaw> laws, std::span<const Real> x_values,
                 const CurveRange& range, std::ostream& out);

struct CriticalRequest {
  std::string task;            // empty: the bundle's only task
  FactorKind factor = FactorKind::model_size;
  LawForm form = LawForm::multiplicative;
  std::vector<Real> x_values;
  Bracket bracket;
};

/// Crossover table for every method pair of one factor in a report bundle:
/// closed-form (H, gamma) in the header where the form supports it, then one
/// row per (pair, x) from critical_curve. Needs laws for at least two
/// methods.
void run_critical_command(const nlohmann::json& report_bundle,
                          const CriticalRequest& request, std::ostream& out);

/// Pearson correlation of a two-column CSV with header `lhs,rhs`.
nlohmann::json run_corr_command(std::istream& in, const std::string& source_name);

}  // namespace scalefit
