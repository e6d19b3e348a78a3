// SPDX-License-Identifier: Apache-2.0
#include "harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "metrics.hpp"

#ifndef MGMC_GIT_HASH
#define MGMC_GIT_HASH "unknown"
#endif

namespace mgmc {
namespace {

using nlohmann::json;

// Shortest round-trip decimal form; the same bytes on every platform, which
// is what makes the CSV determinism contract testable.
std::string fmt(double v) {
  std::array<char, 32> buf{};
  const std::to_chars_result res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string fmt(int v) {
  std::array<char, 16> buf{};
  const std::to_chars_result res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string fmt(std::uint64_t v) {
  std::array<char, 24> buf{};
  const std::to_chars_result res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// RFC-4180 writer: comma separated, CRLF terminated, quotes only where the
/// payload demands them.
class CsvFile {
 public:
  explicit CsvFile(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw std::runtime_error("cannot open " + path + " for writing");
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) f_ << ',';
      f_ << escape(cells[i]);
    }
    f_ << "\r\n";
  }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
      quoted += c;
      if (c == '"') quoted += '"';
    }
    quoted += '"';
    return quoted;
  }

  std::ofstream f_;
};

double dbw_to_watts(double dbw) { return std::pow(10.0, dbw / 10.0); }

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---- experiment kind and rescale mode names (the JSON vocabulary) ----

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::PowerSweep: return "power_sweep";
    case ExperimentKind::UsersPerGroup: return "users_per_group";
    case ExperimentKind::UlaPattern: return "ula_pattern";
    case ExperimentKind::UlaSeparation: return "ula_separation";
    case ExperimentKind::Paradigm: return "paradigm";
    case ExperimentKind::Single: return "single";
  }
  return "single";
}

ExperimentKind kind_from_name(const std::string& s) {
  if (s == "power_sweep") return ExperimentKind::PowerSweep;
  if (s == "users_per_group") return ExperimentKind::UsersPerGroup;
  if (s == "ula_pattern") return ExperimentKind::UlaPattern;
  if (s == "ula_separation") return ExperimentKind::UlaSeparation;
  if (s == "paradigm") return ExperimentKind::Paradigm;
  if (s == "single") return ExperimentKind::Single;
  throw ConfigError("config: unknown kind '" + s + "'");
}

const char* rescale_name(RescaleMode m) {
  return m == RescaleMode::GlobalAlpha ? "global_alpha" : "row_wise";
}

RescaleMode rescale_from_name(const std::string& s) {
  if (s == "row_wise") return RescaleMode::RowWise;
  if (s == "global_alpha") return RescaleMode::GlobalAlpha;
  throw ConfigError("config: unknown rescale_mode '" + s + "'");
}

json spec_to_json_obj(const ExperimentSpec& spec) {
  json j;
  j["kind"] = kind_name(spec.kind);
  j["id"] = spec.id;
  j["n_t"] = spec.n_t;
  j["n_u"] = spec.n_u;
  j["g"] = spec.g;
  j["grid_dbw"] = spec.grid_dbw;
  j["rho_grid"] = spec.rho_grid;
  j["theta_grid_deg"] = spec.theta_grid_deg;
  j["angles_deg"] = spec.angles_deg;
  j["trials"] = spec.trials;
  j["jobs"] = spec.jobs;
  j["rescale_mode"] = rescale_name(spec.rescale);
  j["run"] = {
      {"n_rand", spec.run.n_rand},       {"delta", spec.run.delta},
      {"l_max", spec.run.l_max},         {"outer_max", spec.run.outer_max},
      {"sr_tol", spec.run.sr_tol},       {"solver_tol", spec.run.solver_tol},
      {"seed", spec.run.seed},           {"power_floor", spec.run.power_floor},
  };
  return j;
}

// ---- worker pool ----

/// Runs body(0..n-1) across `jobs` threads. Bodies must not throw; every
/// task catches into its own slot so results merge deterministically.
void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

/// Per-user output line for the LOS report kinds.
struct UserEntry {
  int instance = 0;
  std::uint64_t stream = 0;
  std::string method;
  int user = 0;
  int group = 0;
  double angle_deg = 0.0;
  double sinr = 0.0;
  double rate = 0.0;
};

struct TaskOut {
  std::vector<ResultRow> rows;
  std::vector<UserEntry> users;
  std::vector<std::string> errors;
};

/// Builds the row and enforces the per-antenna audit; a violating precoder
/// is a failure, not a data point.
ResultRow build_row(const std::string& experiment, int trial, std::uint64_t stream,
                    const std::string& method, double x, const ChannelMatrix& h,
                    const GroupAssignment& groups, const NoiseProfile& noise,
                    const PacVector& pac, const Beamformers& w, int iterations) {
  const double util = pac_utilization(w, pac);
  if (util > 1.0 + 1e-6) {
    throw std::runtime_error(method + ": antenna limit exceeded, utilization " + fmt(util));
  }
  ResultRow r;
  r.experiment = experiment;
  r.trial = trial;
  r.stream = stream;
  r.method = method;
  r.x = x;
  r.sum_rate = sum_rate(h, groups, noise, w);
  r.group_powers = w.colwise().squaredNorm().transpose();
  r.antenna_powers = antenna_powers(w);
  r.iterations = iterations;
  return r;
}

/// Substream layout. Task order is trial-major so merged rows sort by
/// (trial, grid point, method).
constexpr std::uint64_t kStreamsPerTask = 8;
constexpr std::uint64_t kChannelStream = 0;
constexpr std::uint64_t kMaxSrStream = 1;
constexpr std::uint64_t kSpcStream = 2;
constexpr std::uint64_t kFairStream = 3;

const char* kStreamLayout =
    "task = trial*n_points + point; substream = 8*task + {0: channel, 1: maxsr_pac, "
    "2: maxsr_spc_rescaled, 3: maxmin_fair_pac}";

/// Runs one method, appending either its row or a failure message.
template <typename MakeW>
void attempt_method(const ExperimentSpec& spec, TaskOut& slot, int trial, std::uint64_t base,
                    double x, const char* method, std::uint64_t stream, const ChannelMatrix& h,
                    const GroupAssignment& groups, const NoiseProfile& noise, const PacVector& pac,
                    MakeW&& make) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Philox rng(spec.run.seed, stream);
    int iterations = 0;
    const Beamformers w = make(rng, iterations);
    ResultRow row =
        build_row(spec.id, trial, base, method, x, h, groups, noise, pac, w, iterations);
    row.wall_ms = elapsed_ms(t0);
    slot.rows.push_back(std::move(row));
  } catch (const std::exception& e) {
    slot.errors.push_back(spec.id + " trial " + fmt(trial) + " x=" + fmt(x) + " " + method +
                          ": " + e.what());
  }
}

/// All three comparison methods on one channel realization.
void run_methods(const ExperimentSpec& spec, TaskOut& slot, int trial, std::uint64_t base,
                 double x, const ChannelMatrix& h, const GroupAssignment& groups,
                 const NoiseProfile& noise, const PacVector& pac, double p_tot_w) {
  attempt_method(spec, slot, trial, base, x, "maxsr_pac", base + kMaxSrStream, h, groups, noise,
                 pac, [&](Philox& rng, int& iterations) {
                   SumRateSolution sol = max_sr_pac(h, groups, pac, noise, spec.run, rng);
                   iterations = static_cast<int>(sol.trace.iterations.size()) - 1;
                   return sol.w;
                 });
  attempt_method(spec, slot, trial, base, x, "maxsr_spc_rescaled", base + kSpcStream, h, groups,
                 noise, pac, [&](Philox& rng, int& iterations) {
                   SumRateSolution sol = max_sr_spc(h, groups, p_tot_w, noise, spec.run, rng);
                   iterations = static_cast<int>(sol.trace.iterations.size()) - 1;
                   return rescale_to_pac(sol.w, pac, spec.rescale);
                 });
  attempt_method(spec, slot, trial, base, x, "maxmin_fair_pac", base + kFairStream, h, groups,
                 noise, pac, [&](Philox& rng, int& iterations) {
                   return max_min_fair_pac(h, groups, pac, noise, spec.run, rng, &iterations);
                 });
}

void write_meta(const ExperimentSpec& spec, const std::string& out_dir, const RunOutcome& out) {
  json j;
  j["experiment"] = spec_to_json_obj(spec);
  j["failures"] = out.failures;
  j["failure_messages"] = out.failure_messages;
  j["git_hash"] = MGMC_GIT_HASH;
  j["root_seed"] = spec.run.seed;
  j["streams"] = kStreamLayout;
  std::ofstream f(out_dir + "/meta.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + out_dir + "/meta.json for writing");
  f << j.dump(2) << '\n';
}

/// Merges slots in task order, emits the standard tables, and surfaces
/// failures on stderr and in the outcome.
RunOutcome merge_and_write(const ExperimentSpec& spec, const std::string& out_dir,
                           const std::string& x_name, const std::vector<TaskOut>& slots,
                           bool with_users, const char* users_file) {
  std::vector<std::string> header = {"experiment", "trial", "stream", "method", x_name,
                                     "sum_rate"};
  for (int k = 0; k < spec.g; ++k) header.push_back("p_group_" + fmt(k));
  for (int n = 0; n < spec.n_t; ++n) header.push_back("p_ant_" + fmt(n));
  header.push_back("iterations");

  CsvFile results(out_dir + "/results.csv");
  results.row(header);
  CsvFile timing(out_dir + "/timing.csv");
  timing.row({"experiment", "trial", "method", x_name, "wall_ms"});

  std::unique_ptr<CsvFile> users;
  if (with_users) {
    users = std::make_unique<CsvFile>(out_dir + "/" + users_file);
    users->row({"experiment", "instance", "stream", "method", "user", "group", "angle_deg",
                "sinr", "rate"});
  }

  RunOutcome out;
  for (const TaskOut& slot : slots) {
    for (const ResultRow& r : slot.rows) {
      std::vector<std::string> cells = {r.experiment, fmt(r.trial), fmt(r.stream), r.method,
                                        fmt(r.x),      fmt(r.sum_rate)};
      for (int k = 0; k < r.group_powers.size(); ++k) cells.push_back(fmt(r.group_powers(k)));
      for (int n = 0; n < r.antenna_powers.size(); ++n) cells.push_back(fmt(r.antenna_powers(n)));
      cells.push_back(fmt(r.iterations));
      results.row(cells);
      timing.row({r.experiment, fmt(r.trial), r.method, fmt(r.x), fmt(r.wall_ms)});
    }
    if (users) {
      for (const UserEntry& u : slot.users) {
        users->row({spec.id, fmt(u.instance), fmt(u.stream), u.method, fmt(u.user), fmt(u.group),
                    fmt(u.angle_deg), fmt(u.sinr), fmt(u.rate)});
      }
    }
    for (const std::string& msg : slot.errors) {
      std::cerr << "[mgmc] " << msg << '\n';
      out.failure_messages.push_back(msg);
    }
  }
  out.failures = static_cast<int>(out.failure_messages.size());
  write_meta(spec, out_dir, out);
  return out;
}

/// One grid point of a sweep: the independent variable, the instance shape,
/// and either a LOS layout or an empty angle list for Rayleigh draws.
struct SweepPoint {
  double x = 0.0;
  int n_u = 0;
  double p_tot_w = 0.0;
  std::vector<double> angles;
};

RunOutcome run_sweep(const ExperimentSpec& spec, const std::string& out_dir,
                     const std::string& x_name, const std::vector<SweepPoint>& points) {
  std::filesystem::create_directories(out_dir);
  const int n_points = static_cast<int>(points.size());
  const int n_tasks = spec.trials * n_points;
  std::vector<TaskOut> slots(static_cast<std::size_t>(n_tasks));

  parallel_for(n_tasks, spec.jobs, [&](int task) {
    TaskOut& slot = slots[static_cast<std::size_t>(task)];
    const int trial = task / n_points;
    const SweepPoint& pt = points[static_cast<std::size_t>(task % n_points)];
    const std::uint64_t base = kStreamsPerTask * static_cast<std::uint64_t>(task);
    try {
      Philox ch_rng(spec.run.seed, base + kChannelStream);
      const ChannelMatrix h = pt.angles.empty()
                                  ? gen_rayleigh(pt.n_u, spec.n_t, ch_rng)
                                  : gen_ula_channels(pt.angles, spec.n_t);
      const GroupAssignment groups = uniform_groups(pt.n_u, spec.g);
      const NoiseProfile noise = NoiseProfile::uniform(pt.n_u, 1.0);
      const PacVector pac = PacVector::uniform(spec.n_t, pt.p_tot_w / spec.n_t);
      run_methods(spec, slot, trial, base, pt.x, h, groups, noise, pac, pt.p_tot_w);
    } catch (const std::exception& e) {
      slot.errors.push_back(spec.id + " trial " + fmt(trial) + " x=" + fmt(pt.x) +
                            " setup: " + e.what());
    }
  });

  return merge_and_write(spec, out_dir, x_name, slots, false, nullptr);
}

GroupAssignment groups_from_blocks(const std::vector<std::vector<double>>& angle_blocks) {
  std::vector<std::vector<int>> blocks;
  int next = 0;
  for (const std::vector<double>& block : angle_blocks) {
    std::vector<int> members;
    for (std::size_t i = 0; i < block.size(); ++i) members.push_back(next++);
    blocks.push_back(std::move(members));
  }
  return GroupAssignment(std::move(blocks), next);
}

std::vector<double> flatten(const std::vector<std::vector<double>>& blocks) {
  std::vector<double> flat;
  for (const std::vector<double>& block : blocks) {
    flat.insert(flat.end(), block.begin(), block.end());
  }
  return flat;
}

void append_user_entries(TaskOut& slot, int instance, std::uint64_t base,
                         const std::string& method, const std::vector<double>& angles,
                         const GroupAssignment& groups, const EvaluationReport& report) {
  for (int i = 0; i < static_cast<int>(angles.size()); ++i) {
    UserEntry u;
    u.instance = instance;
    u.stream = base;
    u.method = method;
    u.user = i;
    u.group = groups.group_of(i);
    u.angle_deg = angles[static_cast<std::size_t>(i)];
    u.sinr = report.sinrs(i);
    u.rate = report.rates(i);
    slot.users.push_back(std::move(u));
  }
}

}  // namespace

// ---- spec serialization ----

ExperimentSpec ExperimentSpec::defaults(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  switch (kind) {
    case ExperimentKind::PowerSweep:
      s.id = "fig2";
      s.grid_dbw = {-20, -15, -10, -5, 0, 5, 10, 15, 20};
      s.trials = 20;
      break;
    case ExperimentKind::UsersPerGroup:
      s.id = "fig3";
      s.grid_dbw = {10.0};
      s.trials = 50;
      break;
    case ExperimentKind::UlaPattern:
      s.id = "fig4";
      s.n_u = 4;
      s.g = 2;
      s.grid_dbw = {10.0};
      s.angles_deg = {{85.0, 90.0}, {92.5, 137.5}};
      break;
    case ExperimentKind::UlaSeparation:
      s.id = "fig5";
      s.n_u = 4;
      s.g = 2;
      s.grid_dbw = {10.0};
      s.theta_grid_deg = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45};
      break;
    case ExperimentKind::Paradigm:
      s.id = "fig6";
      s.grid_dbw = {10.0};
      s.trials = 50;
      break;
    case ExperimentKind::Single:
      s.id = "single";
      s.grid_dbw = {10.0};
      break;
  }
  return s;
}

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  if (!j.contains("kind")) throw ConfigError("config: missing field 'kind'");

  try {
    ExperimentSpec s = defaults(kind_from_name(j.at("kind").get<std::string>()));
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        continue;
      } else if (key == "id") {
        s.id = value.get<std::string>();
      } else if (key == "n_t") {
        s.n_t = value.get<int>();
      } else if (key == "n_u") {
        s.n_u = value.get<int>();
      } else if (key == "g") {
        s.g = value.get<int>();
      } else if (key == "grid_dbw") {
        s.grid_dbw = value.get<std::vector<double>>();
      } else if (key == "rho_grid") {
        s.rho_grid = value.get<std::vector<int>>();
      } else if (key == "theta_grid_deg") {
        s.theta_grid_deg = value.get<std::vector<double>>();
      } else if (key == "angles_deg") {
        s.angles_deg = value.get<std::vector<std::vector<double>>>();
      } else if (key == "trials") {
        s.trials = value.get<int>();
      } else if (key == "jobs") {
        s.jobs = value.get<int>();
      } else if (key == "rescale_mode") {
        s.rescale = rescale_from_name(value.get<std::string>());
      } else if (key == "run") {
        if (!value.is_object()) throw ConfigError("config: 'run' must be an object");
        for (const auto& [rkey, rvalue] : value.items()) {
          if (rkey == "n_rand") {
            s.run.n_rand = rvalue.get<int>();
          } else if (rkey == "delta") {
            s.run.delta = rvalue.get<double>();
          } else if (rkey == "l_max") {
            s.run.l_max = rvalue.get<int>();
          } else if (rkey == "outer_max") {
            s.run.outer_max = rvalue.get<int>();
          } else if (rkey == "sr_tol") {
            s.run.sr_tol = rvalue.get<double>();
          } else if (rkey == "solver_tol") {
            s.run.solver_tol = rvalue.get<double>();
          } else if (rkey == "seed") {
            s.run.seed = rvalue.get<std::uint64_t>();
          } else if (rkey == "power_floor") {
            s.run.power_floor = rvalue.get<double>();
          } else {
            throw ConfigError("config: unknown field 'run." + rkey + "'");
          }
        }
      } else {
        throw ConfigError("config: unknown field '" + key + "'");
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string ExperimentSpec::to_json() const { return spec_to_json_obj(*this).dump(2) + "\n"; }

void ExperimentSpec::validate() const {
  if (n_t < 1) throw ConfigError("config: n_t must be at least 1");
  if (g < 1) throw ConfigError("config: g must be at least 1");
  if (trials < 1) throw ConfigError("config: trials must be at least 1");
  if (jobs < 1) throw ConfigError("config: jobs must be at least 1");
  if (grid_dbw.empty()) throw ConfigError("config: grid_dbw must be nonempty");
  if (kind != ExperimentKind::PowerSweep && grid_dbw.size() != 1) {
    throw ConfigError("config: this kind takes exactly one grid_dbw operating point");
  }
  try {
    run.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  auto check_angles = [&](bool required) {
    if (angles_deg.empty()) {
      if (required) throw ConfigError("config: angles_deg is required for this kind");
      return;
    }
    if (static_cast<int>(angles_deg.size()) != g) {
      throw ConfigError("config: angles_deg must list one block per group");
    }
    int total = 0;
    for (const std::vector<double>& block : angles_deg) {
      if (block.empty()) throw ConfigError("config: every angles_deg block needs a user");
      for (double a : block) {
        if (!(a >= 0.0 && a <= 180.0)) {
          throw ConfigError("config: angles_deg entries must lie in [0, 180]");
        }
      }
      total += static_cast<int>(block.size());
    }
    if (total != n_u) throw ConfigError("config: angles_deg user count must equal n_u");
  };

  switch (kind) {
    case ExperimentKind::PowerSweep:
      if (n_u < g || n_u % g != 0) {
        throw ConfigError("config: n_u must be a positive multiple of g");
      }
      break;
    case ExperimentKind::UsersPerGroup:
      if (rho_grid.empty()) throw ConfigError("config: rho_grid must be nonempty");
      for (int rho : rho_grid) {
        if (rho < 1) throw ConfigError("config: rho_grid entries must be at least 1");
      }
      break;
    case ExperimentKind::UlaPattern:
      check_angles(true);
      break;
    case ExperimentKind::UlaSeparation:
      if (n_u != 4 || g != 2) {
        throw ConfigError("config: ula_separation uses two groups of two users");
      }
      if (theta_grid_deg.empty()) throw ConfigError("config: theta_grid_deg must be nonempty");
      for (double t : theta_grid_deg) {
        if (!(t >= 0.0 && t <= 90.0)) {
          throw ConfigError("config: theta_grid_deg entries must lie in [0, 90]");
        }
      }
      break;
    case ExperimentKind::Paradigm:
      if (g < 2) throw ConfigError("config: paradigm needs at least two groups");
      if (n_u < 2 * g || n_u % g != 0) {
        throw ConfigError("config: paradigm needs n_u a multiple of g with 2+ users per group");
      }
      break;
    case ExperimentKind::Single:
      if (angles_deg.empty()) {
        if (n_u < g || n_u % g != 0) {
          throw ConfigError("config: n_u must be a positive multiple of g");
        }
      } else {
        check_angles(false);
      }
      break;
  }
}

// ---- experiment runners ----

RunOutcome run_power_sweep(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::vector<SweepPoint> points;
  for (double dbw : spec.grid_dbw) {
    points.push_back({dbw, spec.n_u, dbw_to_watts(dbw), {}});
  }
  return run_sweep(spec, out_dir, "p_tot_dbw", points);
}

RunOutcome run_users_per_group(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  const double p_tot = dbw_to_watts(spec.grid_dbw.front());
  std::vector<SweepPoint> points;
  for (int rho : spec.rho_grid) {
    points.push_back({static_cast<double>(rho), rho * spec.g, p_tot, {}});
  }
  return run_sweep(spec, out_dir, "rho", points);
}

RunOutcome run_ula_separation(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  const double p_tot = dbw_to_watts(spec.grid_dbw.front());
  std::vector<SweepPoint> points;
  for (double theta : spec.theta_grid_deg) {
    // Group 1 separates upward from broadside, group 2 from 45 deg toward it;
    // at theta = 45 the inter-group users collide.
    points.push_back({theta, 4, p_tot, {90.0, 90.0 - theta, 45.0, 45.0 + theta}});
  }
  return run_sweep(spec, out_dir, "theta_deg", points);
}

RunOutcome run_ula_pattern(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);

  const std::vector<double> angles = flatten(spec.angles_deg);
  const ChannelMatrix h = gen_ula_channels(angles, spec.n_t);
  const GroupAssignment groups = groups_from_blocks(spec.angles_deg);
  const NoiseProfile noise = NoiseProfile::uniform(spec.n_u, 1.0);
  const double p_tot = dbw_to_watts(spec.grid_dbw.front());
  const PacVector pac = PacVector::uniform(spec.n_t, p_tot / spec.n_t);
  const double x = spec.grid_dbw.front();

  std::vector<TaskOut> slots(1);
  TaskOut& slot = slots[0];
  std::vector<std::pair<std::string, Beamformers>> solutions;

  attempt_method(spec, slot, 0, 0, x, "maxsr_pac", kMaxSrStream, h, groups, noise, pac,
                 [&](Philox& rng, int& iterations) {
                   SumRateSolution sol = max_sr_pac(h, groups, pac, noise, spec.run, rng);
                   iterations = static_cast<int>(sol.trace.iterations.size()) - 1;
                   solutions.emplace_back("maxsr_pac", sol.w);
                   return sol.w;
                 });
  attempt_method(spec, slot, 0, 0, x, "maxmin_fair_pac", kFairStream, h, groups, noise, pac,
                 [&](Philox& rng, int& iterations) {
                   Beamformers w = max_min_fair_pac(h, groups, pac, noise, spec.run, rng,
                                                    &iterations);
                   solutions.emplace_back("maxmin_fair_pac", w);
                   return w;
                 });

  for (const auto& [method, w] : solutions) {
    append_user_entries(slot, 0, 0, method, angles, groups,
                        evaluate(h, groups, noise, pac, w));
  }

  // Radiation pattern on a half-degree grid, linear scale, one column per beam.
  std::vector<double> grid;
  grid.reserve(361);
  for (int i = 0; i <= 360; ++i) grid.push_back(0.5 * i);
  CsvFile pat(out_dir + "/pattern.csv");
  std::vector<std::string> header = {"experiment", "method", "theta_deg"};
  for (int k = 0; k < spec.g; ++k) header.push_back("p_g" + fmt(k));
  pat.row(header);
  for (const auto& [method, w] : solutions) {
    const Eigen::MatrixXd p = pattern(w, grid);
    for (int t = 0; t < p.rows(); ++t) {
      std::vector<std::string> cells = {spec.id, method, fmt(grid[static_cast<std::size_t>(t)])};
      for (int k = 0; k < p.cols(); ++k) cells.push_back(fmt(p(t, k)));
      pat.row(cells);
    }
  }

  return merge_and_write(spec, out_dir, "p_tot_dbw", slots, true, "users.csv");
}

RunOutcome run_paradigm(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  const double p_tot = dbw_to_watts(spec.grid_dbw.front());
  const int rho = spec.n_u / spec.g;
  std::vector<TaskOut> slots(static_cast<std::size_t>(spec.trials));

  parallel_for(spec.trials, spec.jobs, [&](int task) {
    TaskOut& slot = slots[static_cast<std::size_t>(task)];
    const std::uint64_t base = kStreamsPerTask * static_cast<std::uint64_t>(task);
    try {
      Philox ch_rng(spec.run.seed, base + kChannelStream);

      // Group 0 is the compromised one: members spread 70 deg apart. The rest
      // sit near-collocated around their centers. Centers are redrawn until
      // pairwise 10 deg apart so instances stay distinct.
      std::vector<double> centers(static_cast<std::size_t>(spec.g));
      for (int k = 0; k < spec.g; ++k) {
        double c = 0.0;
        for (int draw = 0; draw < 100; ++draw) {
          c = 30.0 + 120.0 * ch_rng.next_double();
          bool clear = true;
          for (int j = 0; j < k; ++j) {
            clear = clear && std::abs(c - centers[static_cast<std::size_t>(j)]) >= 10.0;
          }
          if (clear) break;
        }
        centers[static_cast<std::size_t>(k)] = c;
      }
      std::vector<double> angles;
      for (int k = 0; k < spec.g; ++k) {
        const double half = k == 0 ? 35.0 : 1.5;
        const double c = centers[static_cast<std::size_t>(k)];
        for (int r = 0; r < rho; ++r) {
          const double a =
              rho == 1 ? c : c - half + 2.0 * half * static_cast<double>(r) / (rho - 1);
          angles.push_back(std::clamp(a, 2.0, 178.0));
        }
      }

      const ChannelMatrix h = gen_ula_channels(angles, spec.n_t);
      const GroupAssignment groups = uniform_groups(spec.n_u, spec.g);
      const NoiseProfile noise = NoiseProfile::uniform(spec.n_u, 1.0);
      const PacVector pac = PacVector::uniform(spec.n_t, p_tot / spec.n_t);

      std::vector<std::pair<std::string, Beamformers>> solutions;
      attempt_method(spec, slot, task, base, static_cast<double>(task), "maxsr_pac",
                     base + kMaxSrStream, h, groups, noise, pac,
                     [&](Philox& rng, int& iterations) {
                       SumRateSolution sol = max_sr_pac(h, groups, pac, noise, spec.run, rng);
                       iterations = static_cast<int>(sol.trace.iterations.size()) - 1;
                       solutions.emplace_back("maxsr_pac", sol.w);
                       return sol.w;
                     });
      attempt_method(spec, slot, task, base, static_cast<double>(task), "maxmin_fair_pac",
                     base + kFairStream, h, groups, noise, pac,
                     [&](Philox& rng, int& iterations) {
                       Beamformers w = max_min_fair_pac(h, groups, pac, noise, spec.run, rng,
                                                        &iterations);
                       solutions.emplace_back("maxmin_fair_pac", w);
                       return w;
                     });
      for (const auto& [method, w] : solutions) {
        append_user_entries(slot, task, base, method, angles, groups,
                            evaluate(h, groups, noise, pac, w));
      }
    } catch (const std::exception& e) {
      slot.errors.push_back(spec.id + " instance " + fmt(task) + " setup: " + e.what());
    }
  });

  return merge_and_write(spec, out_dir, "instance", slots, true, "rates.csv");
}

RunOutcome run_single(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  RunOutcome out;

  const bool los = !spec.angles_deg.empty();
  Philox ch_rng(spec.run.seed, kChannelStream);
  const ChannelMatrix h = los ? gen_ula_channels(flatten(spec.angles_deg), spec.n_t)
                              : gen_rayleigh(spec.n_u, spec.n_t, ch_rng);
  const GroupAssignment groups =
      los ? groups_from_blocks(spec.angles_deg) : uniform_groups(spec.n_u, spec.g);
  const NoiseProfile noise = NoiseProfile::uniform(spec.n_u, 1.0);
  const double p_tot = dbw_to_watts(spec.grid_dbw.front());
  const PacVector pac = PacVector::uniform(spec.n_t, p_tot / spec.n_t);

  const auto t0 = std::chrono::steady_clock::now();
  SumRateSolution sol;
  try {
    Philox rng(spec.run.seed, kMaxSrStream);
    sol = max_sr_pac(h, groups, pac, noise, spec.run, rng);
  } catch (const std::exception& e) {
    out.failures = 1;
    out.failure_messages.push_back(spec.id + " maxsr_pac: " + e.what());
    std::cerr << "[mgmc] " << out.failure_messages.back() << '\n';
    write_meta(spec, out_dir, out);
    return out;
  }
  const double wall = elapsed_ms(t0);

  const EvaluationReport report = evaluate(h, groups, noise, pac, sol.w);
  if (report.pac_util > 1.0 + 1e-6) {
    out.failures = 1;
    out.failure_messages.push_back(spec.id + " maxsr_pac: antenna limit exceeded, utilization " +
                                   fmt(report.pac_util));
    std::cerr << "[mgmc] " << out.failure_messages.back() << '\n';
    write_meta(spec, out_dir, out);
    return out;
  }

  auto to_vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  json rj;
  rj["sinrs"] = to_vec(report.sinrs);
  rj["rates"] = to_vec(report.rates);
  rj["group_minima"] = to_vec(report.group_minima);
  rj["sum_rate_bits"] = report.sum_rate_bits;
  rj["antenna_power"] = to_vec(report.antenna_power);
  rj["total_power_watts"] = report.total_power_watts;
  rj["pac_util"] = report.pac_util;
  {
    std::ofstream f(out_dir + "/report.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out_dir + "/report.json for writing");
    f << rj.dump(2) << '\n';
  }

  {
    CsvFile trace(out_dir + "/trace.csv");
    std::vector<std::string> header = {"experiment", "iteration", "r_star", "sum_rate"};
    const int g = spec.g;
    for (int k = 0; k < g; ++k) header.push_back("p_group_" + fmt(k));
    for (int k = 0; k < g; ++k) header.push_back("target_g" + fmt(k));
    for (int k = 0; k < g; ++k) header.push_back("off_g" + fmt(k));
    header.push_back("is_best");
    trace.row(header);
    for (std::size_t i = 0; i < sol.trace.iterations.size(); ++i) {
      const IterationRecord& rec = sol.trace.iterations[i];
      std::vector<std::string> cells = {spec.id, fmt(static_cast<int>(i)), fmt(rec.r_star),
                                        fmt(rec.sum_rate)};
      for (int k = 0; k < rec.group_powers.size(); ++k) cells.push_back(fmt(rec.group_powers(k)));
      for (int k = 0; k < rec.targets.size(); ++k) cells.push_back(fmt(rec.targets(k)));
      for (int k = 0; k < g; ++k) {
        cells.push_back(rec.groups_off[static_cast<std::size_t>(k)] ? "1" : "0");
      }
      cells.push_back(static_cast<int>(i) == sol.trace.best_index ? "1" : "0");
      trace.row(cells);
    }
  }

  {
    CsvFile pre(out_dir + "/precoder.csv");
    std::vector<std::string> header = {"antenna"};
    for (int k = 0; k < spec.g; ++k) {
      header.push_back("re_g" + fmt(k));
      header.push_back("im_g" + fmt(k));
    }
    pre.row(header);
    for (int n = 0; n < sol.w.rows(); ++n) {
      std::vector<std::string> cells = {fmt(n)};
      for (int k = 0; k < sol.w.cols(); ++k) {
        cells.push_back(fmt(sol.w(n, k).real()));
        cells.push_back(fmt(sol.w(n, k).imag()));
      }
      pre.row(cells);
    }
  }

  {
    CsvFile timing(out_dir + "/timing.csv");
    timing.row({"experiment", "trial", "method", "p_tot_dbw", "wall_ms"});
    timing.row({spec.id, "0", "maxsr_pac", fmt(spec.grid_dbw.front()), fmt(wall)});
  }

  write_meta(spec, out_dir, out);
  return out;
}

RunOutcome run_single(const std::string& config_path, const std::string& out_dir) {
  const ExperimentSpec spec = ExperimentSpec::from_json_file(config_path);
  if (spec.kind != ExperimentKind::Single) {
    throw ConfigError("config: run_single requires kind 'single'");
  }
  return run_single(spec, out_dir);
}

RunOutcome run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  switch (spec.kind) {
    case ExperimentKind::PowerSweep: return run_power_sweep(spec, out_dir);
    case ExperimentKind::UsersPerGroup: return run_users_per_group(spec, out_dir);
    case ExperimentKind::UlaPattern: return run_ula_pattern(spec, out_dir);
    case ExperimentKind::UlaSeparation: return run_ula_separation(spec, out_dir);
    case ExperimentKind::Paradigm: return run_paradigm(spec, out_dir);
    case ExperimentKind::Single: return run_single(spec, out_dir);
  }
  throw ConfigError("config: unknown experiment kind");
}

}  // namespace mgmc
