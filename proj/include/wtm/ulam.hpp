#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wtm/dynamics.hpp"
#include "wtm/grid.hpp"

namespace wtm {

/// Transfer operator discretized on the occupied states of a partition.
///
/// `matrix(i, j)` estimates the probability to move from state i to state j
/// within one lag. Counts are symmetrized before normalization, so the chain
/// is reversible with respect to `weights` by construction.
struct UlamOperator {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd weights;
  long lag_steps = 0;
  double lag = 0.0;
  /// Partition label of each row (empty labels are dropped).
  std::vector<Eigen::Index> labels;
  /// Number of labels the source partition had, occupied or not.
  Eigen::Index partition_size = 0;
  /// max |C_ij - C_ji| / sum C of the raw counts; a data-quality diagnostic.
  double raw_asymmetry = 0.0;
  double transitions = 0.0;

  Eigen::Index size() const { return matrix.rows(); }
  /// Row of partition label `label`, if occupied.
  std::optional<Eigen::Index> row_of(Eigen::Index label) const;
  /// max_ij |w_i K_ij - w_j K_ji|.
  double detailed_balance_residual() const;
  /// max_i |sum_j K_ij - 1|.
  double row_sum_residual() const;
};

/// Count transitions label[t] -> label[t + lag] over all offsets t, dropping
/// pairs with a negative (outside) label, then symmetrize, remove empty
/// labels and row-normalize.
UlamOperator ulam_from_labels(std::span<const Eigen::Index> labels, Eigen::Index n_labels, long lag_steps, double dt);

/// Ulam discretization of a trajectory on `grid`; states outside the box are
/// excluded from counting.
UlamOperator build_ulam(const Trajectory& trajectory, long lag_steps, const GridPartition& grid);

/// Cell index of every trajectory state (GridPartition::kOutside if outside).
std::vector<Eigen::Index> label_trajectory(const Trajectory& trajectory, const GridPartition& grid);

struct EigenPair {
  double value = 0.0;
  /// Per-row values, unit norm in the weights-weighted 2-norm.
  Eigen::VectorXd function;
};

enum class EigenMethod { Auto, Dense, Subspace };

/// k dominant eigenpairs of a reversible operator, by descending eigenvalue.
///
/// Solves the symmetric form D^{1/2} K D^{-1/2}, D = diag(weights), and maps
/// eigenvectors back with D^{-1/2}. Auto uses a dense solve up to 600 rows
/// and block subspace iteration with Rayleigh-Ritz beyond that. Sign
/// convention: the entry of largest magnitude is positive.
std::vector<EigenPair> spectrum(const UlamOperator& op, Eigen::Index k, EigenMethod method = EigenMethod::Auto);

/// Same, for an explicit reversible pair (K, w).
std::vector<EigenPair> reversible_spectrum(const Eigen::MatrixXd& K, const Eigen::VectorXd& weights, Eigen::Index k,
                                           EigenMethod method = EigenMethod::Auto);

/// sigma = -log(lambda) / tau; empty for lambda <= 0.
std::optional<double> relaxation_rate(double lambda, double tau);
std::vector<std::optional<double>> relaxation_rates(std::span<const EigenPair> pairs, double tau);

}  // namespace wtm
