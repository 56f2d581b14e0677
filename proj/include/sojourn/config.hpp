#pragma once

// Flat sectioned key=value experiment configs: parse, validate, serialize.
// Serialization is canonical so parse -> serialize -> parse is the
// identity on the parsed form.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sojourn/model.hpp"

namespace sojourn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  double dt = 0.001953125;  // 2^-9
  double horizon = 0.0;     // 0 = derive from the model and largest u
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  std::optional<double> theta;  // drift tilt; unset = plain sampling
  bool theta_auto = false;      // "auto" picks the default tilt
  unsigned threads = 0;
  std::size_t chunk_size = 8192;
  double pilot_fraction = 0.1;
  bool operator==(const SimConfig&) const = default;
};

struct ConstantsConfig {
  std::optional<double> berman;     // injected values take precedence
  std::optional<double> piterbarg;
  bool estimate = false;  // estimate whatever the branch needs and is not injected
  double span = 64.0;
  double dt = 0.00390625;  // 2^-8
  std::size_t n_paths = 20000;
  double z_lo = std::numeric_limits<double>::quiet_NaN();
  double z_hi = std::numeric_limits<double>::quiet_NaN();
  double x_lo = std::numeric_limits<double>::quiet_NaN();
  double x_hi = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 2;
  bool operator==(const ConstantsConfig& o) const {
    auto nan_eq = [](double a, double b) {
      return (std::isnan(a) && std::isnan(b)) || a == b;
    };
    return berman == o.berman && piterbarg == o.piterbarg && estimate == o.estimate &&
           span == o.span && dt == o.dt && n_paths == o.n_paths &&
           nan_eq(z_lo, o.z_lo) && nan_eq(z_hi, o.z_hi) && nan_eq(x_lo, o.x_lo) &&
           nan_eq(x_hi, o.x_hi) && seed == o.seed;
  }
};

struct ExperimentConfig {
  ModelParams model{2.0, 1.0, 1.0, 2.0, 0.5};
  SojournThreshold sojourn{ThresholdMode::constant, 0.0};
  std::vector<double> u_grid{1.0};
  std::string outputs;
  double cbar = 1.0;
  SimConfig sim;
  ConstantsConfig constants;
  bool operator==(const ExperimentConfig& o) const {
    return model.c1 == o.model.c1 && model.c2 == o.model.c2 && model.q1 == o.model.q1 &&
           model.q2 == o.model.q2 && model.hurst == o.model.hurst &&
           sojourn.mode == o.sojourn.mode && sojourn.value == o.sojourn.value &&
           u_grid == o.u_grid && outputs == o.outputs && cbar == o.cbar &&
           sim == o.sim && constants == o.constants;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& key) {
  if (v == "nan" || v == "auto") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  }
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.u_grid.clear();
  std::string section;
  std::istringstream in(text);
  std::string raw;
  bool saw_u_grid = false;
  while (std::getline(in, raw)) {
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: malformed section: " + raw);
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key=value: " + raw);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto unknown = [&]() -> ConfigError {
      return ConfigError("config: unknown key [" + section + "] " + key);
    };
    if (section == "model") {
      if (key == "c1") cfg.model.c1 = detail::parse_double(value, key);
      else if (key == "c2") cfg.model.c2 = detail::parse_double(value, key);
      else if (key == "q1") cfg.model.q1 = detail::parse_double(value, key);
      else if (key == "q2") cfg.model.q2 = detail::parse_double(value, key);
      else if (key == "hurst") cfg.model.hurst = detail::parse_double(value, key);
      else throw unknown();
    } else if (section == "sojourn") {
      if (key == "mode") {
        if (value == "constant") cfg.sojourn.mode = ThresholdMode::constant;
        else if (value == "scaled") cfg.sojourn.mode = ThresholdMode::scaled;
        else throw ConfigError("config: sojourn mode must be constant|scaled");
      } else if (key == "value") {
        cfg.sojourn.value = detail::parse_double(value, key);
      } else {
        throw unknown();
      }
    } else if (section == "experiment") {
      if (key == "u_grid") {
        saw_u_grid = true;
        std::istringstream us(value);
        std::string tok;
        while (std::getline(us, tok, ',')) {
          tok = detail::trim(tok);
          if (!tok.empty()) cfg.u_grid.push_back(detail::parse_double(tok, key));
        }
      } else if (key == "outputs") {
        cfg.outputs = value;
      } else if (key == "cbar") {
        cfg.cbar = detail::parse_double(value, key);
      } else {
        throw unknown();
      }
    } else if (section == "sim") {
      if (key == "dt") cfg.sim.dt = detail::parse_double(value, key);
      else if (key == "horizon") cfg.sim.horizon = detail::parse_double(value, key);
      else if (key == "n_paths") cfg.sim.n_paths = detail::parse_u64(value, key);
      else if (key == "seed") cfg.sim.seed = detail::parse_u64(value, key);
      else if (key == "theta") {
        if (value == "auto") {
          cfg.sim.theta_auto = true;
          cfg.sim.theta.reset();
        } else if (value == "none") {
          cfg.sim.theta_auto = false;
          cfg.sim.theta.reset();
        } else {
          cfg.sim.theta = detail::parse_double(value, key);
        }
      } else if (key == "threads") {
        cfg.sim.threads = static_cast<unsigned>(detail::parse_u64(value, key));
      } else if (key == "chunk_size") {
        cfg.sim.chunk_size = detail::parse_u64(value, key);
      } else if (key == "pilot_fraction") {
        cfg.sim.pilot_fraction = detail::parse_double(value, key);
      } else {
        throw unknown();
      }
    } else if (section == "constants") {
      if (key == "berman") cfg.constants.berman = detail::parse_double(value, key);
      else if (key == "piterbarg") cfg.constants.piterbarg = detail::parse_double(value, key);
      else if (key == "estimate") cfg.constants.estimate = (value == "true" || value == "1");
      else if (key == "span") cfg.constants.span = detail::parse_double(value, key);
      else if (key == "dt") cfg.constants.dt = detail::parse_double(value, key);
      else if (key == "n_paths") cfg.constants.n_paths = detail::parse_u64(value, key);
      else if (key == "z_lo") cfg.constants.z_lo = detail::parse_double(value, key);
      else if (key == "z_hi") cfg.constants.z_hi = detail::parse_double(value, key);
      else if (key == "x_lo") cfg.constants.x_lo = detail::parse_double(value, key);
      else if (key == "x_hi") cfg.constants.x_hi = detail::parse_double(value, key);
      else if (key == "seed") cfg.constants.seed = detail::parse_u64(value, key);
      else throw unknown();
    } else {
      throw ConfigError("config: unknown section [" + section + "]");
    }
  }
  if (!saw_u_grid) cfg.u_grid.push_back(1.0);
  if (cfg.u_grid.empty()) throw ConfigError("config: u_grid must be nonempty");
  for (std::size_t i = 1; i < cfg.u_grid.size(); ++i) {
    if (!(cfg.u_grid[i] > cfg.u_grid[i - 1])) {
      throw ConfigError("config: u_grid must be strictly increasing");
    }
  }
  validate_params(cfg.model.c1, cfg.model.c2, cfg.model.q1, cfg.model.q2,
                  cfg.model.hurst);
  make_threshold(cfg.sojourn.mode, cfg.sojourn.value);
  return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto d = detail::format_double;
  os << "[model]\n";
  os << "c1 = " << d(cfg.model.c1) << "\n";
  os << "c2 = " << d(cfg.model.c2) << "\n";
  os << "q1 = " << d(cfg.model.q1) << "\n";
  os << "q2 = " << d(cfg.model.q2) << "\n";
  os << "hurst = " << d(cfg.model.hurst) << "\n";
  os << "\n[sojourn]\n";
  os << "mode = " << (cfg.sojourn.mode == ThresholdMode::constant ? "constant" : "scaled")
     << "\n";
  os << "value = " << d(cfg.sojourn.value) << "\n";
  os << "\n[experiment]\n";
  os << "u_grid = ";
  for (std::size_t i = 0; i < cfg.u_grid.size(); ++i) {
    if (i) os << ", ";
    os << d(cfg.u_grid[i]);
  }
  os << "\n";
  os << "outputs = " << cfg.outputs << "\n";
  os << "cbar = " << d(cfg.cbar) << "\n";
  os << "\n[sim]\n";
  os << "dt = " << d(cfg.sim.dt) << "\n";
  os << "horizon = " << d(cfg.sim.horizon) << "\n";
  os << "n_paths = " << cfg.sim.n_paths << "\n";
  os << "seed = " << cfg.sim.seed << "\n";
  if (cfg.sim.theta_auto) {
    os << "theta = auto\n";
  } else if (cfg.sim.theta) {
    os << "theta = " << d(*cfg.sim.theta) << "\n";
  } else {
    os << "theta = none\n";
  }
  os << "threads = " << cfg.sim.threads << "\n";
  os << "chunk_size = " << cfg.sim.chunk_size << "\n";
  os << "pilot_fraction = " << d(cfg.sim.pilot_fraction) << "\n";
  os << "\n[constants]\n";
  if (cfg.constants.berman) os << "berman = " << d(*cfg.constants.berman) << "\n";
  if (cfg.constants.piterbarg) {
    os << "piterbarg = " << d(*cfg.constants.piterbarg) << "\n";
  }
  os << "estimate = " << (cfg.constants.estimate ? "true" : "false") << "\n";
  os << "span = " << d(cfg.constants.span) << "\n";
  os << "dt = " << d(cfg.constants.dt) << "\n";
  os << "n_paths = " << cfg.constants.n_paths << "\n";
  os << "z_lo = " << (std::isnan(cfg.constants.z_lo) ? "auto" : d(cfg.constants.z_lo)) << "\n";
  os << "z_hi = " << (std::isnan(cfg.constants.z_hi) ? "auto" : d(cfg.constants.z_hi)) << "\n";
  os << "x_lo = " << (std::isnan(cfg.constants.x_lo) ? "auto" : d(cfg.constants.x_lo)) << "\n";
  os << "x_hi = " << (std::isnan(cfg.constants.x_hi) ? "auto" : d(cfg.constants.x_hi)) << "\n";
  os << "seed = " << cfg.constants.seed << "\n";
  return os.str();
}

}  // namespace sojourn
