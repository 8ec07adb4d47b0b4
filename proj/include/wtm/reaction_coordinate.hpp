#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wtm/dynamics.hpp"
#include "wtm/grid.hpp"
#include "wtm/manifold.hpp"
#include "wtm/ulam.hpp"

namespace wtm {

/// Scalar reaction coordinate given by values on a regular node lattice over
/// a box, interpolated multilinearly (bilinear in 2-D). Nodes sit at
/// lower + i * (upper - lower) / (n - 1), first axis slowest.
class RCField {
 public:
  RCField() = default;
  RCField(Box box, Eigen::VectorXi nodes_per_axis, Eigen::VectorXd values);

  const Box& box() const { return box_; }
  const Eigen::VectorXi& nodes_per_axis() const { return nodes_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index dimension() const { return nodes_.size(); }
  Eigen::Index size() const { return values_.size(); }

  Eigen::VectorXd node(Eigen::Index index) const;
  /// Interpolated value; points outside the box are clamped onto it.
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }

 private:
  Box box_;
  Eigen::VectorXi nodes_;
  Eigen::VectorXd spacing_;
  Eigen::VectorXd values_;
};

/// Node positions (as columns) of an n-per-axis lattice over `box`.
Eigen::MatrixXd node_lattice(const Box& box, int nodes_per_axis);

/// xi(node) = parameter of the anchor chosen for the start at that node.
/// `results` must hold one projection per node of the lattice, in node order.
RCField build_rc_ideal(const Box& box, int nodes_per_axis, std::span<const ProjectionResult> results);

/// Scattered-start variant: each node takes the parameter of the projection
/// whose start is nearest to it (first on ties).
RCField build_rc_scattered(const Box& box, int nodes_per_axis, std::span<const ProjectionResult> results);

/// xi(x) = x_axis, exact under multilinear interpolation.
RCField build_rc_coordinate(const Box& box, int nodes_per_axis, Eigen::Index axis = 0);

/// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
struct RCBinning {
  double lo = 0.0;
  double hi = 1.0;
  int n_bins = 1;

  static RCBinning over(const RCField& rc, int n_bins);
  Eigen::Index bin_of(double y) const;
  double center(Eigen::Index bin) const { return lo + (static_cast<double>(bin) + 0.5) * (hi - lo) / n_bins; }
};

/// Ulam operator of the projected trajectory y_t = xi(X_t), binned by
/// `binning`. States outside the RC box are excluded from counting.
UlamOperator effective_operator(const Trajectory& trajectory, const RCField& rc, const RCBinning& binning,
                                long lag_steps);

/// Level sets of xi restricted to the occupied cells of an Ulam operator.
struct LevelSetWeights {
  RCBinning binning;
  /// Bin of each operator row.
  std::vector<Eigen::Index> row_bin;
  /// mu-hat of each row.
  Eigen::VectorXd row_weight;
  /// Gamma-hat(bin) = sum of member weights.
  Eigen::VectorXd bin_weight;

  Eigen::Index size() const { return row_weight.size(); }
};

/// Assign each occupied cell of `op` (a partition of `grid`) to the bin of
/// xi at its center.
LevelSetWeights level_set_weights(const RCField& rc, const UlamOperator& op, const GridPartition& grid,
                                  const RCBinning& binning);

/// Per-bin weighted average of f.
Eigen::VectorXd bin_averages(const LevelSetWeights& w, const Eigen::VectorXd& f);

/// Replaces f on every cell by the weighted average of f over its bin.
Eigen::VectorXd apply_pi(const LevelSetWeights& w, const Eigen::VectorXd& f);

/// <f, g> in the row-weight inner product.
double weighted_inner(const LevelSetWeights& w, const Eigen::VectorXd& f, const Eigen::VectorXd& g);
double weighted_norm(const LevelSetWeights& w, const Eigen::VectorXd& f);

struct LevelSetDeviation {
  /// Per bin; NaN for empty bins.
  Eigen::VectorXd avg;
  Eigen::VectorXd sup;
  std::vector<Eigen::Index> empty_bins;
  double max_avg = 0.0;
  double max_sup = 0.0;
};

LevelSetDeviation levelset_deviation(const LevelSetWeights& w, const Eigen::VectorXd& f);

/// ||f - Pi f|| in the row-weight 2-norm.
double projection_error(const LevelSetWeights& w, const Eigen::VectorXd& f);

struct EigenvalueBound {
  double value = std::numeric_limits<double>::infinity();
  bool vacuous = true;
};

/// eps / sqrt(1 - eps^2); vacuous for eps >= 1.
EigenvalueBound eigenvalue_bound_strong(double eps);
/// Strong bound applied to e = 2 eps / |lambda|; vacuous for lambda == 0 or e >= 1.
EigenvalueBound eigenvalue_bound_weak(double eps, double lambda);

struct SpectrumComparison {
  int d = 1;
  double tau = 0.0;
  std::vector<double> lambda_full;
  std::vector<double> lambda_eff;
  std::vector<double> gaps;
  std::vector<std::optional<double>> sigma_full;
  std::vector<std::optional<double>> sigma_eff;
};

/// Pairs i = 0..d of two spectra. Throws if either has fewer than d+1 pairs.
SpectrumComparison compare_spectra(std::span<const EigenPair> full, std::span<const EigenPair> effective, double tau,
                                   int d);

/// Spearman rank correlation (average ranks on ties).
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace wtm
