#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "depcens/estimator.hpp"
#include "depcens/gof.hpp"
#include "depcens/simulate.hpp"

namespace depcens {

inline constexpr const char* kSchemaVersion = "1.0";

/// Raised for malformed CSV input; the message names row and column.
class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Header `z,delta,xi,x1..xp,w1..wq` in any column order. Rows are numbered
/// from 1 after the header.
Dataset parse_csv(std::istream& in);
Dataset read_csv(const std::string& path);

/// Shortest round-trip formatting; parse_csv(write_csv(d)) reproduces d.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::string& path, const Dataset& data);

std::string format_double(double v);

enum class Command { Fit, Gof, Simulate, Benchmark };
std::string_view to_string(Command c);
Command command_from_string(std::string_view name);

struct RunConfig {
  Command command = Command::Fit;
  std::string input;
  std::string output;
  /// gof: (v, F_KM, F_V) curve; simulate/benchmark: summary table.
  /// Empty derives `<output stem>.csv`.
  std::string table_output;
  ModelSpec spec;
  FitConfig fit;
  /// fit: bootstrap SE replicates (0 skips); gof: bootstrap size.
  int B = 0;
  std::uint64_t seed = 1;
  int threads = 0;

  Scenario scenario = Scenario::S1_H1;
  std::size_t n = 300;
  int runs = 50;
  int gof_case = 1;
  /// simulate: also write the first generated dataset here.
  std::string data_output;

  void validate() const;
};

nlohmann::ordered_json fit_json(const FitResult& fit, const Dataset& data,
                                const std::optional<BootstrapResult>& se,
                                const std::optional<GofResult>& gof, Command command);
nlohmann::ordered_json monte_carlo_json(const MonteCarloSummary& s, Command command);
nlohmann::ordered_json gof_study_json(const GofStudy& s, Command command);

void write_gof_curve(std::ostream& out, const GofCurve& curve);
void write_summary_table(std::ostream& out, const MonteCarloSummary& s);

/// Exit codes: 0 success, 1 invalid input, 2 non-convergence or failed
/// estimation. Diagnostics go to `log`.
int run(const RunConfig& cfg, std::ostream& log);

}  // namespace depcens
