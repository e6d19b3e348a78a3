// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "algorithms.hpp"
#include "model.hpp"

namespace mgmc {

/// Raised when an experiment description cannot be parsed or validated.
/// Parse failures carry the line/column reported by the JSON reader.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  PowerSweep,      // sum rate vs total power, Rayleigh trials
  UsersPerGroup,   // sum rate vs users-per-group ratio
  UlaPattern,      // radiation pattern + per-user report on a fixed LOS layout
  UlaSeparation,   // sum rate vs co-group angular separation
  Paradigm,        // per-user rates on seeded LOS instances with one wide group
  Single,          // one instance, full report to disk
};

/// Complete description of one experiment. `defaults` yields the stock
/// configuration for each kind; a JSON file starts from those defaults and
/// overrides individual fields. (seed, spec) determines every emitted data
/// byte; timing is reported separately because it is not reproducible.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Single;
  std::string id = "single";  // first column of every emitted row
  int n_t = 4;
  int n_u = 8;
  int g = 4;

  /// Power sweep grid in dBW. Fixed-power kinds hold exactly one entry;
  /// P_tot = 10^(dBW/10) W and each antenna gets P_tot/N_t.
  std::vector<double> grid_dbw = {10.0};
  std::vector<int> rho_grid = {1, 2, 3};         // users_per_group only
  std::vector<double> theta_grid_deg;            // ula_separation only
  std::vector<std::vector<double>> angles_deg;   // per-group user angles, LOS kinds

  int trials = 1;
  int jobs = 1;
  RescaleMode rescale = RescaleMode::RowWise;
  RunConfig run;

  static ExperimentSpec defaults(ExperimentKind kind);
  static ExperimentSpec from_json_text(const std::string& text);
  static ExperimentSpec from_json_file(const std::string& path);

  /// Canonical serialization; from_json_text(to_json()) round-trips exactly.
  std::string to_json() const;

  void validate() const;  // throws ConfigError
};

/// One emitted data point. Wall time lives in timing.csv, everything else in
/// the experiment's main CSV.
struct ResultRow {
  std::string experiment;
  int trial = 0;
  std::uint64_t stream = 0;  // RNG substream base; with the root seed this replays the row
  std::string method;        // maxsr_pac | maxsr_spc_rescaled | maxmin_fair_pac
  double x = 0.0;            // independent variable (dBW, rho, theta, instance)
  double sum_rate = 0.0;
  Eigen::VectorXd group_powers;
  Eigen::VectorXd antenna_powers;
  int iterations = 0;
  double wall_ms = 0.0;
};

/// Failures are counted and logged, never silently dropped: a failed method
/// run loses its row but the remaining rows are still emitted.
struct RunOutcome {
  int failures = 0;
  std::vector<std::string> failure_messages;
};

RunOutcome run_power_sweep(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_users_per_group(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_ula_pattern(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_ula_separation(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_paradigm(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_single(const ExperimentSpec& spec, const std::string& out_dir);
RunOutcome run_single(const std::string& config_path, const std::string& out_dir);

/// Dispatch on spec.kind.
RunOutcome run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

}  // namespace mgmc
