// oisac -- command-line front end for the capacity-distortion library.
//
//   oisac cost   [flags]            sensing cost c(x) over the input grid
//   oisac region [flags]            C-D region sweep over the distortion dual
//   oisac cdf --mode LIST [flags]   CDFs of selected operating modes
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oisac/cd_optimizer.hpp"
#include "oisac/channel_model.hpp"
#include "oisac/config.hpp"
#include "oisac/csv.hpp"
#include "oisac/error.hpp"
#include "oisac/sensing_cost.hpp"

namespace fs = std::filesystem;
using namespace oisac;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SharedFlags {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::uint32_t> n_s;
  std::optional<std::string> estimator;
  std::optional<std::string> solver;
  std::optional<std::string> t;
  std::optional<std::uint32_t> n_r;
  std::optional<std::uint32_t> n_y;
  bool overwrite = false;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--out", f.out, "output directory (created if missing)");
  cmd->add_option("--seed", f.seed, "Monte Carlo master seed");
  cmd->add_option("--lambda", f.lambda, "exponential range-prior rate (1/m)");
  cmd->add_option("--ns", f.n_s, "number of sensing antennas");
  cmd->add_option("--estimator", f.estimator, "map | mle | mp | bcrb");
  cmd->add_option("--solver", f.solver, "baa | cfa");
  cmd->add_option("--t", f.t, "distortion duals: list a,b,c and/or ranges lo:hi:n, or 'default'");
  cmd->add_option("--nr", f.n_r, "prior draws per grid point");
  cmd->add_option("--ny", f.n_y, "observation draws per prior draw");
  cmd->add_flag("--overwrite", f.overwrite, "replace existing output files");
}

RunConfig resolve_config(const SharedFlags& f) {
  RunConfig cfg;
  if (f.config) load_config_file(cfg, *f.config);
  if (f.out) cfg.out_dir = *f.out;
  if (f.seed) cfg.mc.seed = *f.seed;
  if (f.lambda) cfg.params.lambda = *f.lambda;
  if (f.n_s) cfg.params.n_s = *f.n_s;
  if (f.estimator) cfg.estimator = parse_estimator(*f.estimator);
  if (f.solver) cfg.solver = parse_solver(*f.solver);
  if (f.t) cfg.t_spec = *f.t;
  if (f.n_r) cfg.mc.n_r = *f.n_r;
  if (f.n_y) cfg.mc.n_y = *f.n_y;
  if (f.overwrite) cfg.overwrite = true;
  cfg.validate();
  return cfg;
}

/// Creates the output directory and checks that files can be created in it.
fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".oisac_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

/// Refuses to clobber existing outputs unless --overwrite was given.
void check_targets(const RunConfig& cfg, const std::vector<fs::path>& targets) {
  if (cfg.overwrite) return;
  for (const auto& p : targets) {
    if (fs::exists(p)) throw ConfigError(p.string() + " exists; pass --overwrite to replace it");
  }
}

std::string fmt(double v) { return csv::format(v); }

// ---------------------------------------------------------------------------
// Cost vectors
// ---------------------------------------------------------------------------

/// c(x) over the grid. Failing grid points are collected so they can all be
/// reported before giving up.
CostVector compute_cost(const RunConfig& cfg, EstimatorKind kind) {
  CostVector out;
  out.x_grid = input_grid(cfg.params);
  out.kind = kind;
  out.mc = cfg.mc;
  out.samples.resize(out.x_grid.size());
  std::vector<std::string> failures;
  for (std::size_t k = 0; k < out.x_grid.size(); ++k) {
    try {
      out.samples[k] = mc_cost(out.x_grid[k], kind, cfg.params, cfg.mc, cfg.quad, k);
    } catch (const NumericalError& e) {
      failures.push_back("x=" + fmt(out.x_grid[k]) + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    for (const auto& f : failures) std::cerr << "cost failed at " << f << '\n';
    throw NumericalError(std::to_string(failures.size()) + " grid point(s) failed");
  }
  return out;
}

std::string cost_table(const CostVector& cv) {
  csv::Table t({"x", "cost", "variance", "bias_sq", "estimator", "n_r", "n_y", "seed"});
  for (const auto& s : cv.samples) {
    t.add_row({fmt(s.x), fmt(s.mse), fmt(s.variance), fmt(s.bias_sq), std::string(to_string(s.kind)),
               csv::format(std::uint64_t{s.n_r}), csv::format(std::uint64_t{s.n_y}),
               csv::format(std::uint64_t{s.seed})});
  }
  return t.str();
}

std::string cost_file_name(const RunConfig& cfg, EstimatorKind kind) {
  return "cost_" + std::string(to_string(kind)) + "_" + fmt(cfg.params.lambda) + ".csv";
}

/// Reads a file written by `oisac cost`; the grid must match the current
/// parameters.
CostVector read_cost_file(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read cost file " + path);
  std::string line;
  if (!std::getline(in, line) || csv::split_line(line).size() != 8 || csv::split_line(line)[1] != "cost") {
    throw ConfigError(path + ": not a cost file (bad header)");
  }
  std::vector<double> xs, cs;
  EstimatorKind kind = EstimatorKind::bcrb;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 8) throw ConfigError(path + ": malformed row '" + line + "'");
    xs.push_back(parse_double(f[0], "x"));
    cs.push_back(parse_double(f[1], "cost"));
    kind = parse_estimator(f[4]);
  }
  const auto grid = input_grid(cfg.params);
  if (xs.size() != grid.size()) throw ConfigError(path + ": grid size does not match the parameters");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(xs[k] - grid[k]) > 1e-9 * std::max(1.0, grid[k])) {
      throw ConfigError(path + ": grid point " + std::to_string(k) + " does not match the parameters");
    }
  }
  return make_cost_vector(std::move(xs), cs, kind);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_cost(const RunConfig& cfg) {
  const fs::path dir = prepare_out_dir(cfg);
  const fs::path target = dir / cost_file_name(cfg, cfg.estimator);
  check_targets(cfg, {target});
  const CostVector cv = compute_cost(cfg, cfg.estimator);
  csv::write_atomic(target, cost_table(cv));
  std::cout << "wrote " << target.string() << " (" << cv.size() << " rows)\n";
  return 0;
}

std::string mode_label(EstimatorKind est, double t) {
  return "isac-" + std::string(to_string(est)) + "-t" + fmt(t);
}

std::string dist_table(const InputDistribution& d, const std::string& label) {
  csv::Table t({"x", "p", "mode_label"});
  for (std::size_t k = 0; k < d.p.size(); ++k) t.add_row({fmt(d.x[k]), fmt(d.p[k]), label});
  return t.str();
}

void print_endpoints(const RunConfig& cfg, const QuantizedChannel& ch, const CostVector& cv) {
  const auto bounds = capacity_bounds(cfg.params.power_budget, cfg.params.h_c, cfg.params.sigma_c2);
  const RegionPoint com = dual_power_search(0.0, cfg.solver, ch, cv, cfg.params.power_budget, cfg.dual);
  const SensingEndpoint sens = sens_opt_endpoint(cv, cfg.params.power_budget);
  std::cout << "com-opt " << to_string(cfg.solver) << " rate_bits=" << fmt(com.rate_bits)
            << " mean_power=" << fmt(com.mean_power) << '\n';
  std::cout << "com-opt bounds lower=" << fmt(bounds.lower) << " upper=" << fmt(bounds.upper) << '\n';
  std::cout << "sens-opt " << to_string(cv.kind) << " x_star=" << fmt(sens.x_star)
            << " d_min=" << fmt(sens.d_min) << '\n';
}

int cmd_region(const RunConfig& cfg, const std::optional<std::string>& cost_path, bool endpoints_only) {
  const fs::path dir = prepare_out_dir(cfg);
  const auto t_set = parse_t_spec(cfg.t_spec);
  const std::string solver_name(to_string(cfg.solver));

  std::optional<CostVector> loaded;
  if (cost_path) loaded = read_cost_file(*cost_path, cfg);
  const EstimatorKind est = loaded ? loaded->kind : cfg.estimator;
  const std::string est_name(to_string(est));

  const fs::path region_path = dir / ("region_" + solver_name + "_" + est_name + ".csv");
  if (!endpoints_only) {
    std::vector<fs::path> targets{region_path};
    for (double t : t_set) targets.push_back(dir / ("dist_t" + fmt(t) + ".csv"));
    check_targets(cfg, targets);
  }

  const QuantizedChannel ch = build_quantized_channel(cfg.params);
  const CostVector cv = loaded ? std::move(*loaded) : compute_cost(cfg, est);
  if (endpoints_only) {
    print_endpoints(cfg, ch, cv);
    return 0;
  }

  const auto points = cd_region(t_set, cfg.solver, ch, cv, cfg.params.power_budget, cfg.dual,
                                worker_count(), /*strict=*/false);

  csv::Table table({"t", "s_star", "distortion", "rate_bits", "mean_power", "solver", "estimator", "status"});
  std::size_t failed = 0;
  for (const auto& p : points) {
    std::string status = "ok";
    if (!p.ok) {
      ++failed;
      status = "failed";
      std::cerr << "region failed at t=" << fmt(p.t) << ": " << p.message << '\n';
    }
    table.add_row({fmt(p.t), fmt(p.s_star), fmt(p.distortion), fmt(p.rate_bits), fmt(p.mean_power),
                   solver_name, est_name, status});
  }
  csv::write_atomic(region_path, table.str());
  for (const auto& p : points) {
    if (!p.ok) continue;
    csv::write_atomic(dir / ("dist_t" + fmt(p.t) + ".csv"), dist_table(p.distribution, mode_label(cv.kind, p.t)));
  }
  std::cout << "wrote " << region_path.string() << " (" << points.size() << " rows)\n";

  for (const auto& p : points) {
    if (p.ok && p.t == t_set.front()) {
      std::cout << "com-opt " << solver_name << " rate_bits=" << fmt(p.rate_bits) << " (t=" << fmt(p.t)
                << ")\n";
    }
  }
  const SensingEndpoint sens = sens_opt_endpoint(cv, cfg.params.power_budget);
  std::cout << "sens-opt " << est_name << " x_star=" << fmt(sens.x_star) << " d_min=" << fmt(sens.d_min)
            << '\n';
  return failed > 0 ? kExitNumerical : 0;
}

struct CdfMode {
  enum class Kind { com_opt_cf, sens_opt, isac } kind;
  EstimatorKind estimator = EstimatorKind::bcrb;
  double t = 0.0;
  std::string label;
};

CdfMode parse_mode(const std::string& label) {
  CdfMode m{CdfMode::Kind::com_opt_cf, EstimatorKind::bcrb, 0.0, label};
  if (label == "com-opt-cf") return m;
  if (label.rfind("sens-opt-", 0) == 0) {
    m.kind = CdfMode::Kind::sens_opt;
    m.estimator = parse_estimator(label.substr(9));
    return m;
  }
  if (label.rfind("isac-", 0) == 0) {
    const auto dash = label.find("-t", 5);
    if (dash == std::string::npos) throw ConfigError("cdf mode '" + label + "': expected isac-<est>-t<value>");
    m.kind = CdfMode::Kind::isac;
    m.estimator = parse_estimator(label.substr(5, dash - 5));
    m.t = parse_double(label.substr(dash + 2), "cdf mode t");
    if (m.t < 0.0) throw ConfigError("cdf mode '" + label + "': t must be nonnegative");
    return m;
  }
  throw ConfigError("unknown cdf mode '" + label + "' (expected com-opt-cf, sens-opt-<est>, isac-<est>-t<value>)");
}

int cmd_cdf(const RunConfig& cfg, const std::vector<std::string>& labels) {
  std::vector<CdfMode> modes;
  for (const auto& l : labels) modes.push_back(parse_mode(l));
  if (modes.empty()) throw ConfigError("cdf: at least one --mode is required");
  const fs::path dir = prepare_out_dir(cfg);
  std::vector<fs::path> targets;
  for (const auto& m : modes) targets.push_back(dir / ("cdf_" + m.label + ".csv"));
  check_targets(cfg, targets);

  const QuantizedChannel ch = build_quantized_channel(cfg.params);
  std::map<EstimatorKind, CostVector> costs;
  auto cost_for = [&](EstimatorKind k) -> const CostVector& {
    auto it = costs.find(k);
    if (it == costs.end()) it = costs.emplace(k, compute_cost(cfg, k)).first;
    return it->second;
  };

  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& m = modes[i];
    InputDistribution dist;
    switch (m.kind) {
      case CdfMode::Kind::com_opt_cf: {
        const std::vector<double> zeros(ch.rows(), 0.0);
        const CostVector flat = make_cost_vector(input_grid(cfg.params), zeros);
        dist = dual_power_search(0.0, SolverKind::cfa, ch, flat, cfg.params.power_budget, cfg.dual).distribution;
        break;
      }
      case CdfMode::Kind::sens_opt:
        dist = sens_opt_endpoint(cost_for(m.estimator), cfg.params.power_budget).distribution;
        break;
      case CdfMode::Kind::isac:
        dist = dual_power_search(m.t, cfg.solver, ch, cost_for(m.estimator), cfg.params.power_budget, cfg.dual)
                   .distribution;
        break;
    }
    const auto cdf = cdf_of(dist);
    csv::Table t({"x", "cdf"});
    for (std::size_t k = 0; k < cdf.size(); ++k) t.add_row({fmt(dist.x[k]), fmt(cdf[k])});
    csv::write_atomic(targets[i], t.str());
    std::cout << "wrote " << targets[i].string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity-distortion tools for optical integrated sensing and communication"};
  app.require_subcommand(1);

  SharedFlags flags;
  auto* cost = app.add_subcommand("cost", "Sensing cost c(x) over the input grid");
  add_shared_flags(cost, flags);

  auto* region = app.add_subcommand("region", "Capacity-distortion region over the distortion dual");
  add_shared_flags(region, flags);
  std::optional<std::string> cost_path;
  bool endpoints_only = false;
  region->add_option("--cost", cost_path, "cost CSV written by 'oisac cost' (computed if omitted)");
  region->add_flag("--endpoints", endpoints_only, "print the communication and sensing endpoints only");

  auto* cdf = app.add_subcommand("cdf", "CDFs of operating modes");
  add_shared_flags(cdf, flags);
  std::vector<std::string> modes;
  cdf->add_option("--mode", modes, "com-opt-cf, sens-opt-<est>, isac-<est>-t<value>")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const RunConfig cfg = resolve_config(flags);
    if (*cost) return cmd_cost(cfg);
    if (*region) return cmd_region(cfg, cost_path, endpoints_only);
    return cmd_cdf(cfg, modes);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
