// ============================================================================
// config.hpp -- run configuration for the oisac command-line tool
//
// Files are flat `key = value` lines; `#` starts a comment. Keys are the field
// names of SystemParams, MonteCarloConfig and QuadratureConfig plus a few run
// options (solver, estimator, t, delta_ba, delta_b, eta0, gamma, out,
// overwrite). Numbers are parsed with from_chars, so the format does not
// depend on the process locale.
// ============================================================================
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "oisac/cd_optimizer.hpp"
#include "oisac/error.hpp"
#include "oisac/estimators.hpp"
#include "oisac/params.hpp"
#include "oisac/sensing_cost.hpp"

namespace oisac {

struct RunConfig {
  SystemParams params;
  MonteCarloConfig mc;
  QuadratureConfig quad;
  DualSearchOptions dual;
  SolverKind solver = SolverKind::baa;
  EstimatorKind estimator = EstimatorKind::bcrb;
  std::string t_spec = "default";
  std::string out_dir = ".";
  bool overwrite = false;

  void validate() const {
    params.validate();
    mc.validate();
    (void)quad.resolved(params.lambda);
    detail::require(dual.delta_b > 0.0, "delta_b must be positive");
    detail::require(dual.baa.delta_ba > 0.0, "delta_ba must be positive");
    detail::require(dual.eta0 > 0.0, "eta0 must be positive");
    detail::require(dual.gamma >= 0.0, "gamma must be nonnegative");
  }
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace config_detail

inline double parse_double(std::string_view text, std::string_view what) {
  text = config_detail::trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  text = config_detail::trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(what) + ": not an unsigned integer: '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint32_t parse_u32(std::string_view text, std::string_view what) {
  const std::uint64_t v = parse_u64(text, what);
  if (v > UINT32_MAX) throw ConfigError(std::string(what) + ": value too large");
  return static_cast<std::uint32_t>(v);
}

inline bool parse_bool(std::string_view text, std::string_view what) {
  text = config_detail::trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(what) + ": expected true/false, got '" + std::string(text) + "'");
}

/// Applies one key to the configuration. Unknown keys are errors.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k(key);
  auto& p = cfg.params;
  if (k == "h_c") p.h_c = parse_double(value, k);
  else if (k == "sigma_c2") p.sigma_c2 = parse_double(value, k);
  else if (k == "sigma_s2") p.sigma_s2 = parse_double(value, k);
  else if (k == "rho") p.rho = parse_double(value, k);
  else if (k == "lambda") p.lambda = parse_double(value, k);
  else if (k == "n_s") p.n_s = parse_u32(value, k);
  else if (k == "power_budget") p.power_budget = parse_double(value, k);
  else if (k == "q") p.q = parse_double(value, k);
  else if (k == "x_max") p.x_max = parse_double(value, k);
  else if (k == "noise_span") p.noise_span = parse_double(value, k);
  else if (k == "n_r") cfg.mc.n_r = parse_u32(value, k);
  else if (k == "n_y") cfg.mc.n_y = parse_u32(value, k);
  else if (k == "seed") cfg.mc.seed = parse_u64(value, k);
  else if (k == "clamp_eps") cfg.mc.clamp_eps = parse_double(value, k);
  else if (k == "r_min") cfg.quad.r_min = parse_double(value, k);
  else if (k == "r_max") cfg.quad.r_max = parse_double(value, k);
  else if (k == "n_nodes") cfg.quad.n_nodes = parse_u32(value, k);
  else if (k == "delta_ba") cfg.dual.baa.delta_ba = parse_double(value, k);
  else if (k == "delta_b") cfg.dual.delta_b = parse_double(value, k);
  else if (k == "eta0") cfg.dual.eta0 = parse_double(value, k);
  else if (k == "gamma") cfg.dual.gamma = parse_double(value, k);
  else if (k == "solver") cfg.solver = parse_solver(config_detail::trim(value));
  else if (k == "estimator") cfg.estimator = parse_estimator(config_detail::trim(value));
  else if (k == "t") cfg.t_spec = std::string(config_detail::trim(value));
  else if (k == "out") cfg.out_dir = std::string(config_detail::trim(value));
  else if (k == "overwrite") cfg.overwrite = parse_bool(value, k);
  else throw ConfigError("unknown configuration key '" + k + "'");
}

/// Parses `key = value` text into `cfg`. `origin` names the source in errors.
inline void load_config_text(RunConfig& cfg, std::string_view text, std::string_view origin = "config") {
  std::istringstream in{std::string(text)};
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = config_detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = config_detail::trim(view.substr(0, eq));
    const auto value = config_detail::trim(view.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  load_config_text(cfg, buf.str(), path);
}

/// Expands a t specification. Items are comma separated; each is a number,
/// `default` (0 plus 40 log-spaced values over [1e-2, 1e6]) or a range
/// `a:b:n` of n values, log-spaced when 0 < a < b and linear otherwise.
/// The result is sorted and deduplicated.
inline std::vector<double> parse_t_spec(std::string_view spec) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const auto item = config_detail::trim(spec.substr(start, comma - start));
    if (item.empty()) throw ConfigError("t: empty item in '" + std::string(spec) + "'");
    if (item == "default") {
      const auto d = default_t_set();
      out.insert(out.end(), d.begin(), d.end());
    } else if (item.find(':') != std::string_view::npos) {
      const auto c1 = item.find(':');
      const auto c2 = item.find(':', c1 + 1);
      if (c2 == std::string_view::npos) throw ConfigError("t: range must be a:b:n, got '" + std::string(item) + "'");
      const double a = parse_double(item.substr(0, c1), "t");
      const double b = parse_double(item.substr(c1 + 1, c2 - c1 - 1), "t");
      const std::uint32_t n = parse_u32(item.substr(c2 + 1), "t");
      if (n < 2 || !(b > a)) throw ConfigError("t: range needs b > a and n >= 2");
      const bool log_spaced = a > 0.0;
      for (std::uint32_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / (n - 1);
        out.push_back(log_spaced ? std::pow(10.0, std::log10(a) + f * (std::log10(b) - std::log10(a)))
                                 : a + f * (b - a));
      }
      out.back() = b;
    } else {
      out.push_back(parse_double(item, "t"));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (double t : out)
    if (!(t >= 0.0)) throw ConfigError("t: values must be nonnegative");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace oisac
