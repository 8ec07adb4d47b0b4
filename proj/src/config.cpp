#include "wtm/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "wtm/errors.hpp"
#include "wtm/io.hpp"

namespace wtm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  // Accept 1e7-style literals as long as they are integral.
  const double d = parse_double(key, v);
  if (d != std::floor(d) || d < static_cast<double>(std::numeric_limits<Int>::min()) ||
      d > static_cast<double>(std::numeric_limits<Int>::max()))
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return static_cast<Int>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
Field numeric(const char* key, T PipelineConfig::*member) {
  return {key,
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return io::format_number(c.*member);
            else return std::to_string(c.*member);
          },
          [member, key](PipelineConfig& c, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) c.*member = parse_double(key, v);
            else c.*member = parse_int<T>(key, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      numeric("beta", &PipelineConfig::beta),
      numeric("tau", &PipelineConfig::tau),
      numeric("dt", &PipelineConfig::dt),
      numeric("seed", &PipelineConfig::seed),
      numeric("domain_lo", &PipelineConfig::domain_lo),
      numeric("domain_hi", &PipelineConfig::domain_hi),
      numeric("grid", &PipelineConfig::grid),
      numeric("steps", &PipelineConfig::steps),
      numeric("burn_in", &PipelineConfig::burn_in),
      numeric("n_starts", &PipelineConfig::n_starts),
      numeric("M", &PipelineConfig::M),
      numeric("n_anchors", &PipelineConfig::n_anchors),
      numeric("bandwidth", &PipelineConfig::bandwidth),
      numeric("rho_floor", &PipelineConfig::rho_floor),
      {"rho_source", [](const PipelineConfig& c) { return std::string(c.rho_source == RhoSource::Kde ? "kde" : "boltzmann"); },
       [](PipelineConfig& c, const std::string& v) {
         if (v == "boltzmann") c.rho_source = RhoSource::Boltzmann;
         else if (v == "kde") c.rho_source = RhoSource::Kde;
         else throw ConfigError("rho_source", "expected boltzmann or kde, got '" + v + "'");
       }},
      numeric("density_lattice", &PipelineConfig::density_lattice),
      numeric("rc_lattice", &PipelineConfig::rc_lattice),
      {"rc_mode", [](const PipelineConfig& c) { return std::string(c.rc_mode == RcMode::Scattered ? "scattered" : "lattice"); },
       [](PipelineConfig& c, const std::string& v) {
         if (v == "lattice") c.rc_mode = RcMode::Lattice;
         else if (v == "scattered") c.rc_mode = RcMode::Scattered;
         else throw ConfigError("rc_mode", "expected lattice or scattered, got '" + v + "'");
       }},
      numeric("n_bins", &PipelineConfig::n_bins),
      numeric("d", &PipelineConfig::d),
      numeric("n_eigen", &PipelineConfig::n_eigen),
      numeric("n_equilibrium", &PipelineConfig::n_equilibrium),
      numeric("oracle_trials", &PipelineConfig::oracle_trials),
      numeric("oracle_max_states", &PipelineConfig::oracle_max_states),
      numeric("trajectory_stride", &PipelineConfig::trajectory_stride),
      {"output_dir", [](const PipelineConfig& c) { return c.output_dir.string(); },
       [](PipelineConfig& c, const std::string& v) {
         if (v.empty()) throw ConfigError("output_dir", "must not be empty");
         c.output_dir = v;
       }},
      {"cache", [](const PipelineConfig& c) { return std::string(c.cache ? "true" : "false"); },
       [](PipelineConfig& c, const std::string& v) { c.cache = parse_bool("cache", v); }},
  };
  return f;
}

}  // namespace

SimulationConfig PipelineConfig::simulation() const {
  SimulationConfig s;
  s.beta = beta;
  s.dt = dt;
  s.tau = tau;
  s.seed = seed;
  s.domain = domain();
  return s;
}

void PipelineConfig::validate() const {
  simulation().validate();
  if (!(domain_lo < -1.0 && domain_hi > 1.0))
    throw ConfigError("domain_lo", "the domain must contain both wells, i.e. lo < -1 and hi > 1");
  auto at_least = [](const char* key, double v, double lo) {
    if (!(v >= lo)) throw ConfigError(key, "must be >= " + io::format_number(lo));
  };
  at_least("grid", grid, 2);
  at_least("steps", static_cast<double>(steps), 2);
  at_least("burn_in", static_cast<double>(burn_in), 0);
  if (steps <= simulation().lag_steps()) throw ConfigError("steps", "must exceed the lag tau/dt");
  at_least("n_starts", static_cast<double>(n_starts), 1);
  at_least("M", static_cast<double>(M), 1);
  at_least("n_anchors", n_anchors, 2);
  if (!(bandwidth > 0)) throw ConfigError("bandwidth", "must be positive");
  if (!(rho_floor > 0 && rho_floor < 1)) throw ConfigError("rho_floor", "must lie in (0, 1)");
  at_least("density_lattice", density_lattice, 2);
  at_least("rc_lattice", rc_lattice, 2);
  at_least("n_bins", n_bins, 2);
  at_least("d", d, 1);
  if (n_eigen < d + 2) throw ConfigError("n_eigen", "must be >= d + 2");
  at_least("n_equilibrium", static_cast<double>(n_equilibrium), 1);
  at_least("oracle_trials", static_cast<double>(oracle_trials), 0);
  at_least("oracle_max_states", oracle_max_states, 2);
  if (oracle_max_states > 12) throw ConfigError("oracle_max_states", "must be <= 12");
  at_least("trajectory_stride", static_cast<double>(trajectory_stride), 1);
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  throw ConfigError(key, "unknown configuration key");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : entries()) {
    // Numbers stay numbers in the echo; everything else is a string.
    std::int64_t i = 0;
    double x = 0;
    const char* end = v.data() + v.size();
    if (k == "output_dir") j[k] = v;
    else if (auto r = std::from_chars(v.data(), end, i); r.ec == std::errc() && r.ptr == end) j[k] = i;
    else if (auto r2 = std::from_chars(v.data(), end, x); r2.ec == std::errc() && r2.ptr == end) j[k] = x;
    else if (v == "true" || v == "false") j[k] = v == "true";
    else j[k] = v;
  }
  return j;
}

std::uint64_t PipelineConfig::trajectory_key() const {
  std::ostringstream os;
  os << "trajectory-v1";
  for (const char* k : {"beta", "dt", "seed", "steps", "burn_in"}) {
    for (const auto& f : fields())
      if (f.key == k) os << ';' << k << '=' << f.get(*this);
  }
  return io::fnv1a(os.str());
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      base.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError::at_line(number, e);
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("", e.what());
  }
  return parse_config(text, std::move(base));
}

}  // namespace wtm
