#include "scalefit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "scalefit/laws.hpp"

namespace scalefit {

namespace {

constexpr const char* kRunHeader = "task,method,factor,x,d_f,loss,split";

std::string format_real(Real value) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::optional<Real> parse_real(const std::string& text) {
  Real value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] void parse_fail(const std::string& source, long line,
                             const std::string& what) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + what, line);
}

Real positive_field(const std::string& source, long line,
                    const std::string& text, const char* name) {
  const auto value = parse_real(text);
  if (!value || !std::isfinite(*value)) {
    parse_fail(source, line, std::string("bad numeric value for ") + name +
                                 ": '" + text + "'");
  }
  if (!(*value > 0)) {
    parse_fail(source, line, std::string(name) + " must be positive, got '" +
                                 text + "'");
  }
  return *value;
}

std::vector<Run> average_rows(std::vector<Run> rows) {
  using Key = std::tuple<std::string, int, int, Real, Real, int>;
  std::map<Key, std::size_t> index_of;
  struct Bucket {
    Run row;
    Real total = 0;
    int count = 0;
  };
  std::vector<Bucket> buckets;
  for (Run& row : rows) {
    const Key key{row.task, static_cast<int>(row.method),
                  static_cast<int>(row.factor.kind), row.x, row.d_f,
                  static_cast<int>(row.split)};
    const auto [it, inserted] = index_of.emplace(key, buckets.size());
    if (inserted) {
      buckets.push_back(Bucket{row, row.loss, 1});
    } else {
      Bucket& bucket = buckets[it->second];
      bucket.total += row.loss;
      ++bucket.count;
    }
  }
  std::vector<Run> averaged;
  averaged.reserve(buckets.size());
  for (Bucket& bucket : buckets) {
    bucket.row.loss = bucket.total / bucket.count;
    averaged.push_back(std::move(bucket.row));
  }
  return averaged;
}

}  // namespace

RunTable ingest_csv(std::istream& in, const std::string& source_name,
                    const IngestOptions& options) {
  std::string line;
  long line_number = 0;
  if (!std::getline(in, line)) {
    throw EmptyDatasetError(source_name + ": empty file");
  }
  ++line_number;
  if (strip_cr(line) != kRunHeader) {
    parse_fail(source_name, line_number,
               std::string("expected header '") + kRunHeader + "'");
  }

  std::vector<Run> rows;
  while (std::getline(in, line)) {
    ++line_number;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 7) {
      parse_fail(source_name, line_number,
                 "expected 7 fields, got " + std::to_string(fields.size()));
    }
    Run run;
    if (fields[0].empty()) {
      parse_fail(source_name, line_number, "task label must be non-empty");
    }
    run.task = fields[0];
    try {
      run.method = parse_method(fields[1]);
      run.factor = ScalingFactor::of(parse_factor_kind(fields[2]));
      run.split = parse_split(fields[6]);
    } catch (const ArgumentError& err) {
      parse_fail(source_name, line_number, err.what());
    }
    run.x = positive_field(source_name, line_number, fields[3], "x");
    run.d_f = positive_field(source_name, line_number, fields[4], "d_f");
    run.loss = positive_field(source_name, line_number, fields[5], "loss");
    rows.push_back(std::move(run));
  }
  if (rows.empty()) {
    throw EmptyDatasetError(source_name + ": no data rows");
  }
  if (options.average_seed_runs) {
    rows = average_rows(std::move(rows));
  }
  RunTable table;
  table.rows = std::move(rows);
  table.provenance = Provenance{source_name, options.average_seed_runs};
  return table;
}

RunTable ingest_csv(const std::filesystem::path& path,
                    const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return ingest_csv(in, path.string(), options);
}

void write_csv(std::span<const Run> rows, std::ostream& out) {
  out << kRunHeader << '\n';
  for (const Run& run : rows) {
    out << run.task << ',' << to_string(run.method) << ','
        << to_string(run.factor.kind) << ',' << format_real(run.x) << ','
        << format_real(run.d_f) << ',' << format_real(run.loss) << ','
        << to_string(run.split) << '\n';
  }
  if (!out) throw IoError("failed writing run table");
}

void write_csv(std::span<const Run> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_csv(rows, out);
}

// ---------------------------------------------------------------------------
// Job configuration
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ArgumentError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

std::vector<Real> real_list(const json& j, const char* name) {
  if (!j.is_array() || j.empty()) {
    throw ArgumentError(std::string(name) + " must be a non-empty array");
  }
  std::vector<Real> values;
  for (const auto& item : j) {
    if (!item.is_number()) {
      throw ArgumentError(std::string(name) + " must hold numbers");
    }
    values.push_back(item.get<Real>());
  }
  return values;
}

}  // namespace

JobConfig job_config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  require_keys(j,
               {"huber", "grid", "optimizer", "forms", "two_stage",
                "average_seed_runs"},
               "config");
  JobConfig cfg;
  if (j.contains("huber")) {
    const json& h = j.at("huber");
    require_keys(h, {"delta"}, "huber");
    if (h.contains("delta")) cfg.huber.delta = h.at("delta").get<Real>();
    if (!(cfg.huber.delta > 0)) {
      throw ArgumentError("huber.delta must be positive");
    }
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    require_keys(g,
                 {"a_values", "b_values", "alpha_values", "beta_values",
                  "e_values"},
                 "grid");
    if (g.contains("a_values")) cfg.grid.a_values = real_list(g.at("a_values"), "grid.a_values");
    if (g.contains("b_values")) cfg.grid.b_values = real_list(g.at("b_values"), "grid.b_values");
    if (g.contains("alpha_values")) cfg.grid.alpha_values = real_list(g.at("alpha_values"), "grid.alpha_values");
    if (g.contains("beta_values")) cfg.grid.beta_values = real_list(g.at("beta_values"), "grid.beta_values");
    if (g.contains("e_values")) cfg.grid.e_values = real_list(g.at("e_values"), "grid.e_values");
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    require_keys(o,
                 {"max_iterations", "gradient_tolerance", "parameter_tolerance",
                  "history_size", "finite_difference_gradients"},
                 "optimizer");
    OptimizerConfig& opt = cfg.optimizer;
    if (o.contains("max_iterations")) opt.max_iterations = o.at("max_iterations").get<int>();
    if (o.contains("gradient_tolerance")) opt.gradient_tolerance = o.at("gradient_tolerance").get<Real>();
    if (o.contains("parameter_tolerance")) opt.parameter_tolerance = o.at("parameter_tolerance").get<Real>();
    if (o.contains("history_size")) opt.history_size = o.at("history_size").get<int>();
    if (o.contains("finite_difference_gradients")) {
      opt.finite_difference_gradients = o.at("finite_difference_gradients").get<bool>();
    }
    if (opt.max_iterations < 1) throw ArgumentError("optimizer.max_iterations must be >= 1");
    if (opt.history_size < 1) throw ArgumentError("optimizer.history_size must be >= 1");
    if (!(opt.gradient_tolerance >= 0) || !(opt.parameter_tolerance >= 0)) {
      throw ArgumentError("optimizer tolerances must be non-negative");
    }
  }
  if (j.contains("forms")) {
    cfg.forms.clear();
    if (!j.at("forms").is_array() || j.at("forms").empty()) {
      throw ArgumentError("forms must be a non-empty array");
    }
    for (const auto& item : j.at("forms")) {
      const LawForm form = parse_law_form(item.get<std::string>());
      for (LawForm existing : cfg.forms) {
        if (existing == form) throw ArgumentError("duplicate entry in forms");
      }
      cfg.forms.push_back(form);
    }
  }
  if (j.contains("two_stage")) cfg.two_stage = j.at("two_stage").get<bool>();
  if (j.contains("average_seed_runs")) {
    cfg.average_seed_runs = j.at("average_seed_runs").get<bool>();
  }
  return cfg;
}

JobConfig load_job_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ParseError(path.string() + ": " + err.what(), 0);
  }
  return job_config_from_json(j);
}

json job_config_to_json(const JobConfig& cfg) {
  json forms = json::array();
  for (LawForm form : cfg.forms) forms.push_back(to_string(form));
  return json{
      {"huber", {{"delta", cfg.huber.delta}}},
      {"grid",
       {{"a_values", cfg.grid.a_values},
        {"b_values", cfg.grid.b_values},
        {"alpha_values", cfg.grid.alpha_values},
        {"beta_values", cfg.grid.beta_values},
        {"e_values", cfg.grid.e_values}}},
      {"optimizer",
       {{"max_iterations", cfg.optimizer.max_iterations},
        {"gradient_tolerance", cfg.optimizer.gradient_tolerance},
        {"parameter_tolerance", cfg.optimizer.parameter_tolerance},
        {"history_size", cfg.optimizer.history_size},
        {"finite_difference_gradients",
         cfg.optimizer.finite_difference_gradients}}},
      {"forms", forms},
      {"two_stage", cfg.two_stage},
      {"average_seed_runs", cfg.average_seed_runs}};
}

// ---------------------------------------------------------------------------
// Law and report serialization
// ---------------------------------------------------------------------------

json law_to_json(const JointLaw& law) {
  validate(law);
  json j{{"form", to_string(law.form)},
         {"factor",
          {{"kind", to_string(law.factor.kind)}, {"unit", law.factor.unit}}},
         {"a", law.a},
         {"alpha", law.alpha},
         {"beta", law.beta},
         {"e", law.e},
         {"A", law.amplitude()},
         {"E", law.floor()}};
  if (law.b) {
    j["b"] = *law.b;
    j["B"] = std::exp(*law.b);
  }
  return j;
}

JointLaw law_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("law must be a JSON object");
  JointLaw law;
  law.form = parse_law_form(j.at("form").get<std::string>());
  const json& factor = j.at("factor");
  if (factor.is_string()) {
    law.factor = ScalingFactor::of(parse_factor_kind(factor.get<std::string>()));
  } else {
    law.factor.kind = parse_factor_kind(factor.at("kind").get<std::string>());
    law.factor.unit = factor.contains("unit")
                          ? factor.at("unit").get<std::string>()
                          : default_unit(law.factor.kind);
  }
  law.alpha = j.at("alpha").get<Real>();
  law.beta = j.at("beta").get<Real>();

  if (j.contains("a")) {
    law.a = j.at("a").get<Real>();
  } else {
    const Real A = j.at("A").get<Real>();
    if (!(A > 0)) throw DomainError("law amplitude A must be positive");
    law.a = std::log(A);
  }
  if (j.contains("e")) {
    law.e = j.at("e").get<Real>();
  } else {
    const Real E = j.at("E").get<Real>();
    if (!(E > 0)) throw DomainError("law floor E must be positive");
    law.e = std::log(E);
  }
  if (law.form == LawForm::additive) {
    if (j.contains("b")) {
      law.b = j.at("b").get<Real>();
    } else if (j.contains("B")) {
      const Real B = j.at("B").get<Real>();
      if (!(B > 0)) throw DomainError("law amplitude B must be positive");
      law.b = std::log(B);
    }
  }
  validate(law);
  return law;
}

json fit_report_to_json(const FitReport& report) {
  const JointLaw* joint = std::get_if<JointLaw>(&report.law);
  json law_json;
  if (joint) {
    law_json = law_to_json(*joint);
  } else {
    const SingleVarLaw& single = std::get<SingleVarLaw>(report.law);
    law_json = json{{"a", single.a},
                    {"beta", single.beta},
                    {"e", single.e},
                    {"A", single.amplitude()},
                    {"E", single.floor()}};
  }
  json residuals = json::array();
  for (const auto& [id, r] : report.residuals) {
    residuals.push_back(json::array({id, r}));
  }
  return json{{"law", std::move(law_json)},
              {"delta_fit", report.delta_fit},
              {"delta_held_out", report.delta_held_out
                                     ? json(*report.delta_held_out)
                                     : json(nullptr)},
              {"objective_value", report.objective_value},
              {"converged", report.converged},
              {"best_init_index", report.best_init_index},
              {"residuals", std::move(residuals)}};
}

FitReport fit_report_from_json(const json& j) {
  FitReport report;
  const json& law = j.at("law");
  if (law.contains("form")) {
    report.law = law_from_json(law);
  } else {
    SingleVarLaw single;
    single.a = law.at("a").get<Real>();
    single.beta = law.at("beta").get<Real>();
    single.e = law.at("e").get<Real>();
    report.law = single;
  }
  report.delta_fit = j.at("delta_fit").get<Real>();
  if (j.contains("delta_held_out") && !j.at("delta_held_out").is_null()) {
    report.delta_held_out = j.at("delta_held_out").get<Real>();
  }
  report.objective_value = j.at("objective_value").get<Real>();
  report.converged = j.at("converged").get<bool>();
  report.best_init_index = j.at("best_init_index").get<int>();
  if (j.contains("residuals")) {
    for (const auto& entry : j.at("residuals")) {
      report.residuals.emplace_back(entry.at(0).get<int>(),
                                    entry.at(1).get<Real>());
    }
  }
  return report;
}

GridSpec grid_spec_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("grid must be a JSON object");
  require_keys(j, {"x_values", "d_f_values", "held_out_x", "held_out_d_f"},
               "grid spec");
  GridSpec grid;
  grid.x_values = real_list(j.at("x_values"), "x_values");
  grid.d_f_values = real_list(j.at("d_f_values"), "d_f_values");
  if (j.contains("held_out_x")) {
    for (const auto& item : j.at("held_out_x")) grid.held_out_x.push_back(item.get<Real>());
  }
  if (j.contains("held_out_d_f")) {
    for (const auto& item : j.at("held_out_d_f")) grid.held_out_d_f.push_back(item.get<Real>());
  }
  return grid;
}

json grid_spec_to_json(const GridSpec& grid) {
  return json{{"x_values", grid.x_values},
              {"d_f_values", grid.d_f_values},
              {"held_out_x", grid.held_out_x},
              {"held_out_d_f", grid.held_out_d_f}};
}

// ---------------------------------------------------------------------------
// Fit command
// ---------------------------------------------------------------------------

namespace {

json stage1_to_json(const Stage1Result& stage1) {
  json per_factor = json::object();
  for (const auto& [kind, params] : stage1.per_factor) {
    json p{{"a", params.a},
           {"A", std::exp(params.a)},
           {"alpha", params.alpha}};
    if (params.b) {
      p["b"] = *params.b;
      p["B"] = std::exp(*params.b);
    }
    per_factor[to_string(kind)] = std::move(p);
  }
  return json{{"beta", stage1.beta},
              {"e", stage1.e},
              {"E", std::exp(stage1.e)},
              {"per_factor", std::move(per_factor)},
              {"objective_value", stage1.objective_value},
              {"converged", stage1.converged},
              {"best_init_index", stage1.best_init_index}};
}

const char* factor_suffix(FactorKind kind) {
  switch (kind) {
    case FactorKind::model_size: return "m";
    case FactorKind::pretraining_tokens: return "p";
    case FactorKind::pet_parameters: return "t";
  }
  throw ArgumentError("unknown factor kind");
}

}  // namespace

json run_fit_command(const RunTable& table, const JobConfig& cfg) {
  if (table.rows.empty()) throw EmptyDatasetError("no runs to fit");

  // task -> method -> factor -> runs, all in deterministic key order.
  std::map<std::string, std::map<Method, std::map<FactorKind, std::vector<Run>>>>
      grouped;
  for (const Run& run : table.rows) {
    grouped[run.task][run.method][run.factor.kind].push_back(run);
  }

  json tasks = json::object();
  json summaries = json::object();
  json comparisons = json::object();
  for (const auto& [task, methods] : grouped) {
    json task_node = json::object();
    std::map<FitKey, FitReport> comparable;
    for (const auto& [method, factors] : methods) {
      json method_node = json::object();
      for (LawForm form : cfg.forms) {
        json form_node;
        std::map<FactorKind, FitReport> reports;
        if (cfg.two_stage) {
          for (FactorKind required :
               {FactorKind::model_size, FactorKind::pretraining_tokens}) {
            if (!factors.count(required)) {
              throw ArgumentError(
                  std::string("task '") + task + "', method " +
                  to_string(method) + ": the two-stage fit requires a " +
                  to_string(required) + " group");
            }
          }
          std::map<FactorKind, std::vector<Run>> stage1_groups(factors.begin(),
                                                               factors.end());
          const Stage1Result stage1 = fit_joint_stage1(
              stage1_groups, form, cfg.grid, cfg.optimizer, cfg.huber);
          form_node["stage1"] = stage1_to_json(stage1);
          for (const auto& [kind, runs] : factors) {
            reports.emplace(kind,
                            fit_joint_stage2(runs, stage1.beta, stage1.e, form,
                                             cfg.grid, cfg.optimizer,
                                             cfg.huber));
          }
        } else {
          form_node["stage1"] = nullptr;
          for (const auto& [kind, runs] : factors) {
            reports.emplace(kind, fit_joint_free(runs, form, cfg.grid,
                                                 cfg.optimizer, cfg.huber));
          }
        }
        json fits = json::object();
        json summary_row = json::object();
        for (const auto& [kind, report] : reports) {
          fits[to_string(kind)] = fit_report_to_json(report);
          const JointLaw& law = std::get<JointLaw>(report.law);
          const std::string suffix = factor_suffix(kind);
          summary_row["A_" + suffix] = law.amplitude();
          summary_row["alpha_" + suffix] = law.alpha;
          if (law.b) summary_row["B_" + suffix] = std::exp(*law.b);
          if (!cfg.two_stage) {
            summary_row["beta_" + suffix] = law.beta;
            summary_row["E_" + suffix] = law.floor();
          }
          if (report.delta_held_out) {
            comparable.emplace(FitKey{kind, method, form}, report);
          }
        }
        if (cfg.two_stage && !reports.empty()) {
          const JointLaw& any = std::get<JointLaw>(reports.begin()->second.law);
          summary_row["beta"] = any.beta;
          summary_row["E"] = any.floor();
        }
        form_node["fits"] = std::move(fits);
        method_node[to_string(form)] = std::move(form_node);
        summaries[to_string(form)][task][to_string(method)] =
            std::move(summary_row);
      }
      task_node[to_string(method)] = std::move(method_node);
    }
    tasks[task] = std::move(task_node);

    if (cfg.forms.size() > 1) {
      // Keep only cells fitted in both forms with held-out data.
      std::map<FitKey, FitReport> cells;
      for (const auto& [key, report] : comparable) {
        const FitKey mult_key{std::get<0>(key), std::get<1>(key),
                              LawForm::multiplicative};
        const FitKey add_key{std::get<0>(key), std::get<1>(key),
                             LawForm::additive};
        if (comparable.count(mult_key) && comparable.count(add_key)) {
          cells.emplace(key, report);
        }
      }
      if (!cells.empty()) {
        const FormComparison comparison = compare_forms(cells);
        json rows = json::array();
        for (const FormComparisonRow& row : comparison.rows) {
          rows.push_back(json{{"factor", to_string(row.factor)},
                              {"method", to_string(row.method)},
                              {"mult_delta_h", row.mult_delta_h},
                              {"add_delta_h", row.add_delta_h}});
        }
        comparisons[task] = json{{"rows", std::move(rows)},
                                 {"mult_average", comparison.mult_average},
                                 {"add_average", comparison.add_average}};
      }
    }
  }

  json out{{"schema", "scalefit-report-v1"},
           {"source", table.provenance.source},
           {"averaged", table.provenance.averaged},
           {"config", job_config_to_json(cfg)},
           {"tasks", std::move(tasks)},
           {"parameter_summary", std::move(summaries)}};
  if (!comparisons.empty()) out["form_comparison"] = std::move(comparisons);
  return out;
}

json run_compare_command(const json& report_bundle) {
  if (!report_bundle.contains("tasks")) {
    throw ArgumentError("not a fit report bundle: missing 'tasks'");
  }
  json comparisons = json::object();
  for (const auto& [task, methods] : report_bundle.at("tasks").items()) {
    std::map<FitKey, FitReport> cells;
    for (const auto& [method_name, method_node] : methods.items()) {
      const Method method = parse_method(method_name);
      for (LawForm form : {LawForm::multiplicative, LawForm::additive}) {
        if (!method_node.contains(to_string(form))) continue;
        const json& fits = method_node.at(to_string(form)).at("fits");
        for (const auto& [factor_name, report_json] : fits.items()) {
          const FitReport report = fit_report_from_json(report_json);
          if (!report.delta_held_out) continue;
          cells.emplace(FitKey{parse_factor_kind(factor_name), method, form},
                        report);
        }
      }
    }
    // Drop cells lacking a counterpart in the other form.
    std::map<FitKey, FitReport> complete;
    for (const auto& [key, report] : cells) {
      const FitKey other{std::get<0>(key), std::get<1>(key),
                         std::get<2>(key) == LawForm::multiplicative
                             ? LawForm::additive
                             : LawForm::multiplicative};
      if (cells.count(other)) complete.emplace(key, report);
    }
    if (complete.empty()) continue;
    const FormComparison comparison = compare_forms(complete);
    json rows = json::array();
    for (const FormComparisonRow& row : comparison.rows) {
      rows.push_back(json{{"factor", to_string(row.factor)},
                          {"method", to_string(row.method)},
                          {"mult_delta_h", row.mult_delta_h},
                          {"add_delta_h", row.add_delta_h}});
    }
    comparisons[task] = json{{"rows", std::move(rows)},
                             {"mult_average", comparison.mult_average},
                             {"add_average", comparison.add_average}};
  }
  if (comparisons.empty()) {
    throw ArgumentError(
        "report bundle holds no (factor, method) cell fitted in both forms "
        "with held-out data");
  }
  return json{{"schema", "scalefit-comparison-v1"},
              {"tasks", std::move(comparisons)}};
}

// ---------------------------------------------------------------------------
// Curves and crossover commands
// ---------------------------------------------------------------------------

void emit_curves(std::span<const LabeledLaw> laws,
                 std::span<const Real> x_values, const CurveRange& range,
                 std::ostream& out) {
  if (laws.empty()) throw ArgumentError("emit_curves needs at least one law");
  if (x_values.empty()) throw ArgumentError("emit_curves needs x values");
  if (!(range.d_f_min > 0) || !(range.d_f_max > range.d_f_min)) {
    throw ArgumentError("curve range must satisfy 0 < d_f_min < d_f_max");
  }
  if (range.samples < 2) throw ArgumentError("curve range needs >= 2 samples");

  std::vector<Real> d_values(static_cast<std::size_t>(range.samples));
  const Real log_lo = std::log(range.d_f_min);
  const Real log_hi = std::log(range.d_f_max);
  for (int i = 0; i < range.samples; ++i) {
    d_values[static_cast<std::size_t>(i)] =
        std::exp(log_lo + (log_hi - log_lo) * i / (range.samples - 1));
  }
  d_values.front() = range.d_f_min;
  d_values.back() = range.d_f_max;

  out << "# scalefit curves\n";
  bool first = true;
  for (const LabeledLaw& entry : laws) {
    validate(entry.law);
    if (!first) out << '\n';
    first = false;
    out << "# law=" << entry.label << " form=" << to_string(entry.law.form)
        << " factor=" << to_string(entry.law.factor.kind)
        << " A=" << format_real(entry.law.amplitude());
    if (entry.law.b) out << " B=" << format_real(std::exp(*entry.law.b));
    out << " alpha=" << format_real(entry.law.alpha)
        << " beta=" << format_real(entry.law.beta)
        << " E=" << format_real(entry.law.floor()) << '\n';
    out << "x\td_f\tloss\n";
    for (Real x : x_values) {
      for (Real d : d_values) {
        out << format_real(x) << '\t' << format_real(d) << '\t'
            << format_real(predict_joint(entry.law, x, d)) << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing curves");
}

void run_critical_command(const json& report_bundle,
                          const CriticalRequest& request, std::ostream& out) {
  if (!report_bundle.contains("tasks")) {
    throw ArgumentError("not a fit report bundle: missing 'tasks'");
  }
  if (request.x_values.empty()) {
    throw ArgumentError("critical analysis needs at least one x value");
  }
  const json& tasks = report_bundle.at("tasks");
  std::string task = request.task;
  if (task.empty()) {
    if (tasks.size() != 1) {
      throw ArgumentError(
          "report bundle holds several tasks; name one explicitly");
    }
    task = tasks.items().begin().key();
  } else if (!tasks.contains(task)) {
    throw ArgumentError("report bundle has no task '" + task + "'");
  }

  std::vector<std::pair<Method, JointLaw>> laws;
  for (Method method : {Method::fmt, Method::prompt, Method::lora}) {
    const json& methods = tasks.at(task);
    if (!methods.contains(to_string(method))) continue;
    const json& method_node = methods.at(to_string(method));
    if (!method_node.contains(to_string(request.form))) continue;
    const json& fits = method_node.at(to_string(request.form)).at("fits");
    if (!fits.contains(to_string(request.factor))) continue;
    laws.emplace_back(method,
                      law_from_json(fits.at(to_string(request.factor)).at("law")));
  }
  if (laws.size() < 2) {
    throw ArgumentError(std::string("critical analysis needs ") +
                        to_string(request.form) + " laws for at least two "
                        "methods over " + to_string(request.factor));
  }

  out << "# scalefit critical\n";
  out << "# task=" << task << " factor=" << to_string(request.factor)
      << " form=" << to_string(request.form)
      << " bracket=[" << format_real(request.bracket.lo) << ","
      << format_real(request.bracket.hi) << "]\n";

  struct Pair {
    std::string name;
    const JointLaw* law1;
    const JointLaw* law2;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < laws.size(); ++i) {
    for (std::size_t j = i + 1; j < laws.size(); ++j) {
      pairs.push_back(Pair{std::string(to_string(laws[i].first)) + "_vs_" +
                               to_string(laws[j].first),
                           &laws[i].second, &laws[j].second});
    }
  }
  for (const Pair& pair : pairs) {
    try {
      const CriticalPowerLaw closed =
          critical_point_closed_form(*pair.law1, *pair.law2);
      out << "# pair=" << pair.name << " H=" << format_real(closed.h)
          << " gamma=" << format_real(closed.gamma) << '\n';
    } catch (const UnsupportedFormError&) {
      out << "# pair=" << pair.name << " closed_form=unsupported\n";
    } catch (const DegenerateError&) {
      out << "# pair=" << pair.name << " closed_form=degenerate\n";
    }
  }
  out << "pair\tx\td_f_c\tstatus\tmultiple\n";
  for (const Pair& pair : pairs) {
    const std::vector<CriticalCurvePoint> curve = critical_curve(
        *pair.law1, *pair.law2, request.x_values, request.bracket);
    for (const CriticalCurvePoint& point : curve) {
      out << pair.name << '\t' << format_real(point.x) << '\t';
      if (point.d_f) out << format_real(*point.d_f);
      const char* status = point.status == CrossoverStatus::found
                               ? "found"
                               : point.status == CrossoverStatus::none
                                     ? "none"
                                     : "degenerate";
      out << '\t' << status << '\t' << (point.multiple_crossings ? 1 : 0)
          << '\n';
    }
  }
  if (!out) throw IoError("failed writing crossover table");
}

json run_corr_command(std::istream& in, const std::string& source_name) {
  std::string line;
  long line_number = 0;
  if (!std::getline(in, line)) {
    throw EmptyDatasetError(source_name + ": empty file");
  }
  ++line_number;
  if (strip_cr(line) != "lhs,rhs") {
    parse_fail(source_name, line_number, "expected header 'lhs,rhs'");
  }
  std::vector<std::pair<Real, Real>> pairs;
  while (std::getline(in, line)) {
    ++line_number;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 2) {
      parse_fail(source_name, line_number,
                 "expected 2 fields, got " + std::to_string(fields.size()));
    }
    const auto lhs = parse_real(fields[0]);
    const auto rhs = parse_real(fields[1]);
    if (!lhs || !rhs || !std::isfinite(*lhs) || !std::isfinite(*rhs)) {
      parse_fail(source_name, line_number, "bad numeric pair");
    }
    pairs.emplace_back(*lhs, *rhs);
  }
  const Real r = pearson_correlation(pairs);
  return json{{"schema", "scalefit-corr-v1"},
              {"n", pairs.size()},
              {"pearson_r", r}};
}

}  // namespace scalefit
