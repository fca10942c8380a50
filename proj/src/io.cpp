#include "depcens/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace depcens {

namespace {

using nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string row_error(std::size_t row, const std::string& column, const std::string& what) {
  std::ostringstream msg;
  msg << "row " << row;
  if (!column.empty()) msg << ", column " << column;
  msg << ": " << what;
  return msg.str();
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(row_error(row, column, "non-numeric value '" + cell + "'"));
  }
  if (!std::isfinite(v)) throw ParseError(row_error(row, column, "non-finite value '" + cell + "'"));
  return v;
}

int parse_indicator(const std::string& cell, std::size_t row, const std::string& column) {
  const double v = parse_number(cell, row, column);
  if (v != 0.0 && v != 1.0) {
    throw ParseError(row_error(row, column, "indicator must be 0 or 1, got '" + cell + "'"));
  }
  return static_cast<int>(v);
}

// Index suffix of "x12" -> 12; 0 when the name is not prefix + positive integer.
std::size_t covariate_index(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return 0;
  std::size_t k = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (ec != std::errc() || ptr != name.data() + name.size() || name[1] == '0') return 0;
  return k;
}

ordered_json number_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json named(const std::vector<std::string>& names, const std::vector<double>& values) {
  ordered_json out = ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = number_or_null(values[i]);
  return out;
}

ordered_json gof_json(const GofResult& g) {
  ordered_json out;
  out["t_cm"] = g.t_cm;
  out["p_value"] = number_or_null(g.p_value);
  out["replicates"] = g.replicates;
  out["requested"] = g.requested;
  out["dropped"] = g.dropped;
  out["unreliable"] = g.unreliable;
  out["clamp_fraction"] = g.clamp_fraction;
  return out;
}

std::string derived_table_path(const RunConfig& cfg) {
  if (!cfg.table_output.empty()) return cfg.table_output;
  const auto dot = cfg.output.find_last_of('.');
  const auto slash = cfg.output.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? cfg.output.substr(0, dot) : cfg.output) + ".csv";
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  return out;
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

ScenarioConfig scenario_config(const RunConfig& cfg) {
  ScenarioConfig sc;
  sc.scenario = cfg.scenario;
  sc.n = cfg.n;
  sc.runs = cfg.runs;
  sc.bootstrap_B = cfg.B;
  sc.seed = cfg.seed;
  sc.threads = cfg.threads;
  sc.gof_case = cfg.gof_case;
  sc.fit = cfg.fit;
  return sc;
}

int run_fit(const RunConfig& cfg, std::ostream& log) {
  const Dataset data = read_csv(cfg.input);
  FitConfig fc = cfg.fit;
  fc.threads = cfg.threads;
  const FitResult f = fit(data, cfg.spec, fc);
  if (!f.converged) {
    log << "fit did not converge after " << f.n_iters << " iterations";
    if (!f.message.empty()) log << ": " << f.message;
    log << '\n';
    write_json(cfg.output, fit_json(f, data, std::nullopt, std::nullopt, cfg.command));
    return 2;
  }

  std::optional<BootstrapResult> se;
  std::optional<GofResult> gof;
  if (cfg.command == Command::Fit && cfg.B > 0) {
    se = bootstrap_se(data, cfg.spec, fc, f, cfg.B, cfg.seed);
    if (se->unreliable) log << "warning: " << se->failed << " of " << cfg.B << " bootstrap refits failed\n";
  }
  if (cfg.command == Command::Gof) {
    gof = bootstrap_gof(f, cfg.spec, data, fc, cfg.B, cfg.seed);
    if (gof->unreliable) log << "warning: " << gof->dropped << " of " << cfg.B << " replicates dropped\n";
    std::ofstream curve = open_output(derived_table_path(cfg));
    write_gof_curve(curve, gof_curve(f, cfg.spec, data));
  }
  write_json(cfg.output, fit_json(f, data, se, gof, cfg.command));
  return 0;
}

int run_simulation(const RunConfig& cfg, std::ostream& log) {
  ScenarioConfig sc = scenario_config(cfg);
  if (cfg.command == Command::Benchmark) {
    sc.scenario = Scenario::S1_H1;
  }
  if (!cfg.data_output.empty()) {
    Rng rng = make_rng(derive_seed(sc.seed, 0));
    write_csv(cfg.data_output, generate_dataset(scenario_truth(sc), sc.n, rng).data);
  }
  if (sc.scenario == Scenario::S4_Case) {
    const GofStudy s = run_gof_study(sc);
    write_json(cfg.output, gof_study_json(s, cfg.command));
    if (s.failed > 0) log << s.failed << " of " << s.runs << " runs failed\n";
    return 0;
  }
  const MonteCarloSummary s = run_monte_carlo(sc);
  write_json(cfg.output, monte_carlo_json(s, cfg.command));
  std::ofstream table = open_output(derived_table_path(cfg));
  write_summary_table(table, s);
  if (s.failed > 0) log << s.failed << " of " << s.runs << " runs did not converge\n";
  return s.failed == s.runs ? 2 : 0;
}

}  // namespace

Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split(line);

  std::map<std::string, std::size_t> column;
  std::size_t p = 0;
  std::size_t q = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (!column.emplace(name, c).second) throw ParseError("duplicate column '" + name + "'");
    if (const auto k = covariate_index(name, 'x')) {
      p = std::max(p, k);
    } else if (const auto k2 = covariate_index(name, 'w')) {
      q = std::max(q, k2);
    } else if (name != "z" && name != "delta" && name != "xi") {
      throw ParseError("unknown column '" + name + "'");
    }
  }
  std::vector<std::string> required = {"z", "delta", "xi"};
  for (std::size_t j = 1; j <= p; ++j) required.push_back("x" + std::to_string(j));
  for (std::size_t j = 1; j <= q; ++j) required.push_back("w" + std::to_string(j));
  for (const auto& name : required) {
    if (!column.count(name)) throw ParseError("missing column '" + name + "'");
  }

  std::vector<Observation> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(row_error(row, "", "expected " + std::to_string(header.size()) +
                                              " cells, found " + std::to_string(cells.size())));
    }
    Observation obs;
    obs.z = parse_number(cells[column["z"]], row, "z");
    obs.delta = parse_indicator(cells[column["delta"]], row, "delta");
    obs.xi = parse_indicator(cells[column["xi"]], row, "xi");
    if (obs.delta + obs.xi > 1) throw ParseError(row_error(row, "", "delta+xi > 1"));
    for (std::size_t j = 1; j <= p; ++j) {
      const std::string name = "x" + std::to_string(j);
      obs.x.push_back(parse_number(cells[column[name]], row, name));
    }
    for (std::size_t j = 1; j <= q; ++j) {
      const std::string name = "w" + std::to_string(j);
      obs.w.push_back(parse_number(cells[column[name]], row, name));
    }
    rows.push_back(std::move(obs));
  }
  return Dataset(std::move(rows), p, q);
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return parse_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  out << "z,delta,xi";
  for (std::size_t j = 1; j <= data.p(); ++j) out << ",x" << j;
  for (std::size_t j = 1; j <= data.q(); ++j) out << ",w" << j;
  out << '\n';
  for (const auto& obs : data) {
    out << format_double(obs.z) << ',' << obs.delta << ',' << obs.xi;
    for (double v : obs.x) out << ',' << format_double(v);
    for (double v : obs.w) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out = open_output(path);
  write_csv(out, data);
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Fit: return "fit";
    case Command::Gof: return "gof";
    case Command::Simulate: return "simulate";
    case Command::Benchmark: return "benchmark";
  }
  return "fit";
}

Command command_from_string(std::string_view name) {
  if (name == "fit") return Command::Fit;
  if (name == "gof") return Command::Gof;
  if (name == "simulate") return Command::Simulate;
  if (name == "benchmark") return Command::Benchmark;
  throw InvalidInput("unknown command '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (output.empty()) throw InvalidInput("an output path is required");
  if (B < 0) throw InvalidInput("bootstrap size must be >= 0");
  if (threads < 0) throw InvalidInput("threads must be >= 0");
  switch (command) {
    case Command::Fit:
    case Command::Gof:
      if (input.empty()) throw InvalidInput("an input CSV is required");
      if (command == Command::Gof && B < 1) throw InvalidInput("gof needs a bootstrap size >= 1");
      spec.validate();
      fit.validate();
      break;
    case Command::Simulate:
    case Command::Benchmark:
      scenario_config(*this).validate();
      break;
  }
}

ordered_json fit_json(const FitResult& fit, const Dataset& data,
                      const std::optional<BootstrapResult>& se,
                      const std::optional<GofResult>& gof, Command command) {
  const std::vector<std::string> names = ModelParams::names(data.p(), data.q());
  const std::vector<double> est = fit.params.to_vector();

  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = to_string(command);
  j["params_hat"] = named(names, est);
  if (se) {
    j["se"] = named(se->names, se->se);
    j["p_values"] = named(se->names, se->p_value);
    j["bootstrap"] = {{"requested", se->requested},
                      {"failed", se->failed},
                      {"unreliable", se->unreliable}};
  } else {
    j["se"] = nullptr;
    j["p_values"] = nullptr;
  }
  j["tau_hat"] = number_or_null(fit.tau_hat);

  ordered_json jumps = ordered_json::array();
  for (const Jump& jump : fit.transform.jumps()) {
    jumps.push_back({{"time", jump.time},
                     {"jump", jump.size},
                     {"cumulative", fit.transform(jump.time)}});
  }
  j["transform_jumps"] = std::move(jumps);
  ordered_json trace = ordered_json::array();
  for (double v : fit.loglik_trace) trace.push_back(number_or_null(v));
  j["loglik_trace"] = std::move(trace);
  j["converged"] = fit.converged;
  j["iterations"] = fit.n_iters;
  j["gof"] = gof ? gof_json(*gof) : ordered_json(nullptr);
  return j;
}

ordered_json monte_carlo_json(const MonteCarloSummary& s, Command command) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = to_string(command);
  j["scenario"] = to_string(s.scenario);
  j["n"] = s.n;
  j["runs"] = s.runs;
  j["failed"] = s.failed;
  j["bootstrap_B"] = s.bootstrap_B;
  ordered_json rows = ordered_json::array();
  for (const SummaryRow& r : s.rows) {
    rows.push_back({{"parameter", r.parameter},
                    {"truth", number_or_null(r.truth)},
                    {"mean", number_or_null(r.mean)},
                    {"bias", number_or_null(r.bias)},
                    {"sd", number_or_null(r.sd)},
                    {"rmse", number_or_null(r.rmse)},
                    {"cp", number_or_null(r.cp)},
                    {"used", r.used}});
  }
  j["summary"] = std::move(rows);
  return j;
}

ordered_json gof_study_json(const GofStudy& s, Command command) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = to_string(command);
  j["scenario"] = to_string(Scenario::S4_Case);
  j["gof_case"] = s.gof_case;
  j["n"] = s.n;
  j["runs"] = s.runs;
  j["failed"] = s.failed;
  j["bootstrap_B"] = s.bootstrap_B;
  j["reject_05"] = s.reject_05;
  j["reject_10"] = s.reject_10;
  j["mean_t_cm"] = number_or_null(s.mean_t_cm);
  j["t_cm"] = s.t_cm;
  j["p_values"] = s.p_values;
  j["mean_replicate"] = s.mean_replicate;
  return j;
}

void write_gof_curve(std::ostream& out, const GofCurve& curve) {
  out << "v,F_KM,F_V\n";
  for (std::size_t i = 0; i < curve.v.size(); ++i) {
    out << format_double(curve.v[i]) << ',' << format_double(curve.f_km[i]) << ','
        << format_double(curve.f_v[i]) << '\n';
  }
}

void write_summary_table(std::ostream& out, const MonteCarloSummary& s) {
  out << "parameter,truth,mean,bias,sd,rmse,cp,used\n";
  for (const SummaryRow& r : s.rows) {
    out << r.parameter << ',' << format_double(r.truth) << ',' << format_double(r.mean) << ','
        << format_double(r.bias) << ',' << format_double(r.sd) << ',' << format_double(r.rmse)
        << ',' << format_double(r.cp) << ',' << r.used << '\n';
  }
}

int run(const RunConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
    switch (cfg.command) {
      case Command::Fit:
      case Command::Gof:
        return run_fit(cfg, log);
      case Command::Simulate:
      case Command::Benchmark:
        return run_simulation(cfg, log);
    }
  } catch (const InvalidInput& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace depcens
