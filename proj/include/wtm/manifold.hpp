#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wtm/density.hpp"
#include "wtm/dynamics.hpp"

namespace wtm {

/// One sampled point of a candidate transition manifold: the density
/// p^tau(state, .) together with its parameter value y = E(p^tau(state, .)).
struct Anchor {
  Eigen::VectorXd state;
  Eigen::VectorXd parameter;
  EndpointCloud cloud;
  Eigen::VectorXd mean;
  std::optional<DensityField> density;
};

/// Sampled candidate manifold {p^tau(q_k, .)} with parametrization values.
struct ManifoldAtlas {
  std::vector<Anchor> anchors;
  int r = 1;
  double tau = 0.0;
  long samples_per_anchor = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(anchors.size()); }
  /// Parameter values are distinct, strictly increasing for r = 1, and every
  /// anchor shares M and tau. Throws std::invalid_argument otherwise.
  void validate() const;
  /// KDE of every anchor cloud on `lattice`.
  void attach_densities(const GridPartition& lattice, double bandwidth);
  /// Embedded means as columns.
  Eigen::MatrixXd means() const;
};

/// Sample a cloud at each anchor state; anchor k uses stream coordinate k of
/// StreamTag::AnchorCloud.
template <Potential P>
ManifoldAtlas sample_atlas(const P& potential, const SimulationConfig& config, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& parameters, long M) {
  if (states.cols() != parameters.cols()) throw std::invalid_argument("sample_atlas: one parameter per anchor");
  ManifoldAtlas atlas;
  atlas.r = static_cast<int>(parameters.rows());
  atlas.tau = config.effective_tau();
  atlas.samples_per_anchor = M;
  auto clouds = sample_clouds(potential, config, states, M, StreamTag::AnchorCloud);
  atlas.anchors.reserve(clouds.size());
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::VectorXd mean = mean_embedding(clouds[k]).mean;
    atlas.anchors.push_back({states.col(kk), parameters.col(kk), std::move(clouds[k]), std::move(mean), std::nullopt});
  }
  atlas.validate();
  return atlas;
}

/// x1 range of the parabola x2 = 1 - x1^2 inside `domain`: [-edge, edge].
double mep_edge(const Box& domain);

/// Anchors q_k = (x1_k, 1 - x1_k^2), x1_k equispaced on [-edge, edge];
/// parameter y_k = x1_k.
template <Potential P>
ManifoldAtlas mep_manifold(const P& potential, const SimulationConfig& config, int n_anchors, long M) {
  static_assert(P::Dimension == 2, "the MEP manifold lives in two dimensions");
  if (n_anchors < 2) throw std::invalid_argument("mep_manifold: n_anchors must be >= 2");
  const double edge = mep_edge(config.domain);
  const Eigen::RowVectorXd x1 = Eigen::RowVectorXd::LinSpaced(n_anchors, -edge, edge);
  Eigen::MatrixXd states(2, n_anchors);
  states.row(0) = x1;
  states.row(1) = 1.0 - x1.array().square();
  return sample_atlas(potential, config, states, x1, M);
}

enum class Metric { Embedded, Density };
std::string to_string(Metric metric);

/// Closest anchor to one start under one metric.
struct ProjectionResult {
  Eigen::VectorXd start;
  Eigen::Index anchor = 0;
  double residual = 0.0;
  Eigen::VectorXd parameter;
  Metric metric = Metric::Embedded;
};

/// Nearest anchor mean in the Euclidean norm; ties go to the smaller index.
ProjectionResult project_embedded(const ManifoldAtlas& atlas, const EmbeddedPoint& point);

/// Nearest anchor density in the 1/rho-weighted L2 distance; ties go to the
/// smaller index. Anchors must carry densities on the field's lattice.
ProjectionResult project_density(const ManifoldAtlas& atlas, const Eigen::VectorXd& start, const DensityField& field,
                                 const DensityField& rho, double floor);
ProjectionResult project_density(const ManifoldAtlas& atlas, const EndpointCloud& cloud, const DensityField& rho,
                                 const GridPartition& lattice, double bandwidth, double floor);

struct StrongScore {
  double score = 0.0;
  std::size_t argmax = 0;
  Eigen::VectorXd start;
};

/// max residual over all results and the start attaining it (first on ties).
StrongScore strong_score(std::span<const ProjectionResult> results);

struct LevelSetScore {
  Eigen::Index anchor = 0;
  Eigen::VectorXd parameter;
  long count = 0;
  double weight = 0.0;
  /// Weighted mean residual over the level set.
  double weak = 0.0;
  /// Largest residual in the level set.
  double max_residual = 0.0;
};

struct ReducibilityReport {
  Metric metric = Metric::Embedded;
  std::vector<ProjectionResult> results;
  std::vector<double> start_weights;
  std::vector<LevelSetScore> per_anchor;
  /// Anchors that were chosen by some start but carry zero total weight.
  std::vector<Eigen::Index> excluded_anchors;
  StrongScore strong;
  double weak_score = 0.0;
  Eigen::Index weak_argmax = 0;
  double rho_floor = 0.0;
  double bandwidth = 0.0;

  /// Level-set entry of the anchor chosen for results[i]; nullptr if excluded.
  const LevelSetScore* level_set_of(std::size_t i) const;
};

/// Level sets are the groups of starts sharing a chosen anchor. For each,
/// weak_k = sum w(x') residual(x') / sum w(x') with w = `weights`
/// (one per result, typically rho at the start). weak score = max_k weak_k.
ReducibilityReport weak_score(std::vector<ProjectionResult> results, std::vector<double> weights);
/// Same with w(x') = rho.at(start).
ReducibilityReport weak_score(std::vector<ProjectionResult> results, const DensityField& rho);

}  // namespace wtm
