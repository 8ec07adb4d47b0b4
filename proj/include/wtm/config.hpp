#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wtm/dynamics.hpp"

namespace wtm {

enum class RhoSource { Boltzmann, Kde };
enum class RcMode { Lattice, Scattered };

/// Every tunable of the benchmark pipeline. Defaults reproduce the
/// reference experiment (beta = 1, tau = 0.5, 8000 uniform starts,
/// 100 anchors on the minimum energy path).
struct PipelineConfig {
  double beta = 1.0;
  double tau = 0.5;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  double domain_lo = -2.0;
  double domain_hi = 2.0;
  /// Ulam cells per axis.
  int grid = 50;
  /// States kept from the long trajectory, and steps discarded before them.
  long steps = 10'000'000;
  long burn_in = 10'000;
  long n_starts = 8000;
  /// Endpoints per transition-density cloud.
  long M = 1000;
  int n_anchors = 100;
  double bandwidth = 0.1;
  /// Floor of the 1/rho weight, relative to max rho.
  double rho_floor = 1e-4;
  RhoSource rho_source = RhoSource::Boltzmann;
  /// KDE lattice cells per axis.
  int density_lattice = 50;
  int rc_lattice = 40;
  RcMode rc_mode = RcMode::Lattice;
  int n_bins = 50;
  int d = 1;
  int n_eigen = 6;
  long n_equilibrium = 500;
  long oracle_trials = 10'000;
  int oracle_max_states = 8;
  /// Every k-th state goes to trajectory.csv.
  long trajectory_stride = 100;
  std::filesystem::path output_dir = "out";
  bool cache = true;

  SimulationConfig simulation() const;
  Box domain() const { return Box::square(domain_lo, domain_hi, 2); }

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  /// Set one key from its textual value; throws ConfigError for unknown keys
  /// and unparsable or out-of-range values.
  void set(const std::string& key, const std::string& value);

  /// (key, value) pairs in declaration order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  nlohmann::ordered_json to_json() const;

  /// Key of the trajectory cache: hash of everything the trajectory depends on.
  std::uint64_t trajectory_key() const;

  static const std::vector<std::string>& keys();
};

/// Parse `key = value` lines ('#' starts a comment) on top of `base`.
/// Errors are reported as ConfigError with "line N" in the message.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

}  // namespace wtm
