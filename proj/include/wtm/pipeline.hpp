#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wtm/chain_oracle.hpp"
#include "wtm/config.hpp"
#include "wtm/density.hpp"
#include "wtm/manifold.hpp"
#include "wtm/potential.hpp"
#include "wtm/reaction_coordinate.hpp"
#include "wtm/ulam.hpp"

namespace wtm {

using json = nlohmann::ordered_json;

struct SpectrumResult {
  UlamOperator op;
  std::vector<EigenPair> pairs;
  std::vector<std::optional<double>> rates;
};

/// m2 = c0 + c1 m1 + c2 m1^2 fitted to the anchor means.
struct QuadraticFit {
  Eigen::Vector3d coefficients = Eigen::Vector3d::Zero();
  /// RMS of the vertical residuals over the fitted points.
  double rms = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;

  static QuadraticFit fit(const Eigen::MatrixXd& points);
  double operator()(double t) const { return coefficients[0] + t * (coefficients[1] + t * coefficients[2]); }
  /// Euclidean distance from p to the curve over [t_min - 1, t_max + 1].
  double distance(const Eigen::Vector2d& p) const;
};

/// Per-start projections of one batch of starts.
struct Scan {
  Eigen::MatrixXd starts;
  Eigen::MatrixXd means;
  std::vector<ProjectionResult> embedded;
  /// Empty when the density projection was not requested.
  std::vector<ProjectionResult> density;
};

struct EmbeddingSummary {
  QuadraticFit fit;
  double median_anchor_spacing = 0.0;
  /// Distance of each uniform-start embedding to the fitted curve.
  std::vector<double> uniform_distance;
  long outliers = 0;
  long outliers_below_mep = 0;
  std::vector<double> equilibrium_distance;
  double equilibrium_within_fraction = 0.0;
  /// Share of equilibrium starts where both metrics choose the same anchor,
  /// parameters within 0.25, and the same sign of the parameter.
  double agreement_exact = 0.0;
  double agreement_close = 0.0;
  double agreement_side = 0.0;
};

struct XStarProbe {
  Eigen::Vector2d start;
  ProjectionResult embedded;
  ProjectionResult density;
  /// Level set (under the density metric) of the anchor chosen for the probe.
  std::optional<LevelSetScore> level_set;
  /// Monte Carlo estimate of the unnormalized level-set integral
  /// |X| / N * sum_{x' in level set} rho(x') residual(x').
  double level_set_mass_integral = 0.0;
};

struct ReducibilitySummary {
  ReducibilityReport embedded;
  ReducibilityReport density;
  std::vector<XStarProbe> probes;
};

struct RCSummary {
  RCField xi1;
  RCField xi2;
  RCBinning bins1;
  RCBinning bins2;
  UlamOperator eff1;
  UlamOperator eff2;
  std::vector<EigenPair> spec1;
  std::vector<EigenPair> spec2;
  SpectrumComparison cmp1;
  SpectrumComparison cmp2;
  LevelSetWeights weights1;
  LevelSetWeights weights2;
  LevelSetDeviation dev1;
  LevelSetDeviation dev2;
  double proj_err1 = 0.0;
  double proj_err2 = 0.0;
  EigenvalueBound bound_strong;
  EigenvalueBound bound_weak;
  /// Strong and weak bounds evaluated at the reference epsilon 0.06.
  EigenvalueBound bound_strong_ref;
  EigenvalueBound bound_weak_ref;
  double rank_correlation = 0.0;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Lazily evaluated benchmark. Every stage is computed once and reused;
/// the long trajectory is cached on disk under output_dir/cache, keyed by a
/// hash of the settings it depends on.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::function<void(const std::string&)> log = {});

  const PipelineConfig& config() const { return config_; }
  const BananaPotential<double>& potential() const { return potential_; }
  const GridPartition& grid() const { return grid_; }
  const GridPartition& density_lattice() const { return lattice_; }

  const Trajectory& trajectory();
  bool trajectory_from_cache() const { return trajectory_cached_; }
  const SpectrumResult& spectrum();
  /// MEP atlas with KDEs of every anchor cloud attached.
  const ManifoldAtlas& atlas();
  /// Stationary density used both as the 1/rho weight and for level-set weights.
  const DensityField& rho();
  double rho_floor_absolute();
  const Scan& uniform_scan();
  const Scan& equilibrium_scan();
  const EmbeddingSummary& embedding();
  const ReducibilitySummary& reducibility();
  const RCSummary& rc();
  const oracle::SweepSummary& oracle_sweep();

  json spectrum_json();
  json embedding_json();
  json reducibility_json();
  json rc_json();
  json oracle_json();

  /// Write the CSV/JSON outputs of one command into output_dir.
  void write_simulate();
  void write_spectrum();
  void write_embed();
  void write_reducibility();
  void write_rc_compare();
  void write_oracle();

  /// Criteria 1-8 plus the level-set rank correlation. `determinism` is the
  /// outcome of a separate repeated run (see determinism_check).
  std::vector<CriterionResult> acceptance(std::optional<CriterionResult> determinism = std::nullopt);
  json acceptance_json(const std::vector<CriterionResult>& criteria);

 private:
  Scan scan(const Eigen::MatrixXd& starts, StreamTag tag, bool with_density);
  std::vector<EigenPair> spectrum_of(const UlamOperator& op) const;
  void log(const std::string& msg) const;
  json with_config(json body) const;

  PipelineConfig config_;
  SimulationConfig sim_;
  BananaPotential<double> potential_;
  GridPartition grid_;
  GridPartition lattice_;
  std::function<void(const std::string&)> log_;

  std::optional<Trajectory> trajectory_;
  bool trajectory_cached_ = false;
  std::optional<SpectrumResult> spectrum_;
  std::optional<ManifoldAtlas> atlas_;
  std::optional<DensityField> rho_;
  std::optional<Scan> uniform_;
  std::optional<Scan> equilibrium_;
  std::optional<EmbeddingSummary> embedding_;
  std::optional<ReducibilitySummary> reducibility_;
  std::optional<RCSummary> rc_;
  std::optional<oracle::SweepSummary> oracle_;
  double oracle_seconds_ = 0.0;
};

/// Uniform starts on the domain from stream (seed, Sampling, 0, 0).
Eigen::MatrixXd uniform_starts(const Box& domain, long n, std::uint64_t seed);

/// Same physics at a size that runs in seconds: short trajectory, few starts,
/// small clouds. Used for repeated-run checks.
PipelineConfig reduced_config(PipelineConfig config);

/// Runs the report-producing stages twice on `config` with caching off and
/// compares the serialized reports byte for byte.
CriterionResult determinism_check(PipelineConfig config);

/// Pi properties on `n_functions` random functions: idempotence,
/// self-adjointness and non-expansiveness. Returns the worst residuals.
struct PiProperties {
  double idempotence = 0.0;
  double self_adjoint = 0.0;
  /// max(||Pi f|| - ||f||), <= 0 when non-expansive.
  double expansion = 0.0;
};
PiProperties check_pi_properties(const LevelSetWeights& w, int n_functions, std::uint64_t seed);

}  // namespace wtm
