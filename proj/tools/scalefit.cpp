// scalefit: fit scaling laws for LLM finetuning from tabular run data, then
// compare functional forms, locate method crossovers, sample prediction
// curves, and generate synthetic run tables.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scalefit/io.hpp"

namespace {

using nlohmann::json;
using namespace scalefit;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ParseError(path + ": " + err.what(), 0);
  }
  return j;
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct FitArgs {
  std::string data, config, out;
};

struct CompareArgs {
  std::string report, out;
};

struct CriticalArgs {
  std::string laws, task, factor = "model_size", form = "multiplicative", out;
  std::vector<Real> x;
  std::vector<Real> bracket;
};

struct CurvesArgs {
  std::string laws, law, task, factor = "model_size", form = "multiplicative",
              out;
  std::vector<Real> x;
  Real d_f_min = 0, d_f_max = 0;
  int samples = 33;
};

struct SynthArgs {
  std::string law, grid, task = "synthetic", method = "fmt", out;
  Real sigma = 0;
  std::uint64_t seed = 0;
};

struct CorrArgs {
  std::string data, out;
};

int run_fit(const FitArgs& args) {
  JobConfig cfg;
  if (!args.config.empty()) cfg = load_job_config(args.config);
  const RunTable table =
      ingest_csv(std::filesystem::path(args.data),
                 IngestOptions{cfg.average_seed_runs});
  write_json(args.out, run_fit_command(table, cfg));
  return 0;
}

int run_compare(const CompareArgs& args) {
  write_json(args.out, run_compare_command(load_json(args.report)));
  return 0;
}

int run_critical(const CriticalArgs& args) {
  CriticalRequest request;
  request.task = args.task;
  request.factor = parse_factor_kind(args.factor);
  request.form = parse_law_form(args.form);
  request.x_values = args.x;
  if (!args.bracket.empty()) {
    if (args.bracket.size() != 2) {
      throw ArgumentError("--bracket takes exactly lo,hi");
    }
    request.bracket = Bracket{args.bracket[0], args.bracket[1]};
  }
  std::ostringstream out;
  run_critical_command(load_json(args.laws), request, out);
  write_text(args.out, out.str());
  return 0;
}

int run_curves(const CurvesArgs& args) {
  if (args.laws.empty() == args.law.empty()) {
    throw ArgumentError("pass exactly one of --laws (report bundle) or --law");
  }
  std::vector<LabeledLaw> laws;
  if (!args.law.empty()) {
    laws.push_back(LabeledLaw{"law", law_from_json(load_json(args.law))});
  } else {
    const json bundle = load_json(args.laws);
    if (!bundle.contains("tasks")) {
      throw ArgumentError("not a fit report bundle: missing 'tasks'");
    }
    const json& tasks = bundle.at("tasks");
    std::string task = args.task;
    if (task.empty()) {
      if (tasks.size() != 1) {
        throw ArgumentError(
            "report bundle holds several tasks; name one explicitly");
      }
      task = tasks.items().begin().key();
    } else if (!tasks.contains(task)) {
      throw ArgumentError("report bundle has no task '" + task + "'");
    }
    const std::string form = args.form;
    for (Method method : {Method::fmt, Method::prompt, Method::lora}) {
      const json& methods = tasks.at(task);
      if (!methods.contains(to_string(method))) continue;
      const json& method_node = methods.at(to_string(method));
      if (!method_node.contains(form)) continue;
      const json& fits = method_node.at(form).at("fits");
      if (!fits.contains(args.factor)) continue;
      laws.push_back(LabeledLaw{
          to_string(method), law_from_json(fits.at(args.factor).at("law"))});
    }
    if (laws.empty()) {
      throw ArgumentError("report bundle holds no " + form + " laws over " +
                          args.factor + " for task '" + task + "'");
    }
  }
  std::ostringstream out;
  emit_curves(laws, args.x, CurveRange{args.d_f_min, args.d_f_max, args.samples},
              out);
  write_text(args.out, out.str());
  return 0;
}

int run_synth(const SynthArgs& args) {
  const json law_json = load_json(args.law);
  const NoiseSpec base_noise{args.sigma, args.seed};
  std::vector<Run> rows;
  if (law_json.is_array()) {
    std::uint64_t entry_index = 0;
    for (const json& entry : law_json) {
      const JointLaw law = law_from_json(entry.at("law"));
      GridSpec grid;
      if (entry.contains("grid")) {
        grid = grid_spec_from_json(entry.at("grid"));
      } else if (!args.grid.empty()) {
        grid = grid_spec_from_json(load_json(args.grid));
      } else {
        throw ArgumentError(
            "law entry " + std::to_string(entry_index) +
            " has no grid and no --grid fallback was given");
      }
      RunLabels labels;
      labels.task = entry.value("task", args.task);
      labels.method = parse_method(entry.value("method", args.method));
      // Entries draw from disjoint noise streams; entry 0 matches the
      // single-law layout exactly.
      NoiseSpec noise{args.sigma, args.seed + entry_index};
      for (Run& run : generate(law, grid, noise, labels)) {
        rows.push_back(std::move(run));
      }
      ++entry_index;
    }
  } else {
    if (args.grid.empty()) throw ArgumentError("--grid is required");
    const GridSpec grid = grid_spec_from_json(load_json(args.grid));
    RunLabels labels{args.task, parse_method(args.method)};
    rows = generate(law_from_json(law_json), grid, base_noise, labels);
  }
  std::ostringstream out;
  write_csv(rows, out);
  write_text(args.out, out.str());
  return 0;
}

int run_corr(const CorrArgs& args) {
  std::ifstream in(args.data);
  if (!in) throw IoError("cannot open " + args.data);
  write_json(args.out, run_corr_command(in, args.data));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scaling-law fitting and crossover analysis for LLM finetuning"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "fit joint scaling laws to a run table");
  fit->add_option("--data", fit_args.data, "run table CSV")->required();
  fit->add_option("--config", fit_args.config, "job config JSON");
  fit->add_option("--out", fit_args.out, "report bundle path (default stdout)");

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand(
      "compare", "tabulate held-out error of multiplicative vs additive fits");
  compare->add_option("--report", compare_args.report, "fit report bundle")
      ->required();
  compare->add_option("--out", compare_args.out, "comparison path");

  CriticalArgs critical_args;
  CLI::App* critical = app.add_subcommand(
      "critical", "crossover finetuning data sizes between method pairs");
  critical->add_option("--laws", critical_args.laws, "fit report bundle")
      ->required();
  critical->add_option("--task", critical_args.task, "task label in the bundle");
  critical->add_option("--factor", critical_args.factor,
                       "factor kind (default model_size)");
  critical->add_option("--form", critical_args.form,
                       "law form (default multiplicative)");
  critical->add_option("--x", critical_args.x, "factor values to sweep")
      ->required()
      ->delimiter(',');
  critical->add_option("--bracket", critical_args.bracket,
                       "d_f search bracket lo,hi (default 1,1e9)")
      ->delimiter(',');
  critical->add_option("--out", critical_args.out, "crossover table path");

  CurvesArgs curves_args;
  CLI::App* curves = app.add_subcommand(
      "curves", "sample predicted loss curves from fitted laws");
  curves->add_option("--laws", curves_args.laws, "fit report bundle");
  curves->add_option("--law", curves_args.law, "single law JSON");
  curves->add_option("--task", curves_args.task, "task label in the bundle");
  curves->add_option("--factor", curves_args.factor,
                     "factor kind (default model_size)");
  curves->add_option("--form", curves_args.form,
                     "law form (default multiplicative)");
  curves->add_option("--x", curves_args.x, "factor values")
      ->required()
      ->delimiter(',');
  curves->add_option("--d-f-min", curves_args.d_f_min, "smallest d_f")
      ->required();
  curves->add_option("--d-f-max", curves_args.d_f_max, "largest d_f")
      ->required();
  curves->add_option("--samples", curves_args.samples,
                     "d_f samples per x (default 33)");
  curves->add_option("--out", curves_args.out, "curves path");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic run table from a law");
  synth->add_option("--law", synth_args.law,
                    "law JSON (single object, or array of {law, grid, task, "
                    "method} entries)")
      ->required();
  synth->add_option("--grid", synth_args.grid, "grid JSON");
  synth->add_option("--sigma", synth_args.sigma, "noise scale (default 0)");
  synth->add_option("--seed", synth_args.seed, "noise seed (default 0)");
  synth->add_option("--task", synth_args.task, "task label");
  synth->add_option("--method", synth_args.method, "method label");
  synth->add_option("--out", synth_args.out, "run table path");

  CorrArgs corr_args;
  CLI::App* corr = app.add_subcommand(
      "corr", "Pearson correlation of a two-column CSV (header lhs,rhs)");
  corr->add_option("--data", corr_args.data, "pair table CSV")->required();
  corr->add_option("--out", corr_args.out, "correlation JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (compare->parsed()) return run_compare(compare_args);
    if (critical->parsed()) return run_critical(critical_args);
    if (curves->parsed()) return run_curves(curves_args);
    if (synth->parsed()) return run_synth(synth_args);
    if (corr->parsed()) return run_corr(corr_args);
  } catch (const scalefit::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
