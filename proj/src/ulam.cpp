#include "wtm/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "wtm/errors.hpp"
#include "wtm/random.hpp"

namespace wtm {

std::optional<Eigen::Index> UlamOperator::row_of(Eigen::Index label) const {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) return std::nullopt;
  return static_cast<Eigen::Index>(it - labels.begin());
}

double UlamOperator::detailed_balance_residual() const {
  const Eigen::MatrixXd flux = weights.asDiagonal() * matrix;
  return (flux - flux.transpose()).cwiseAbs().maxCoeff();
}

double UlamOperator::row_sum_residual() const {
  return (matrix.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

std::vector<Eigen::Index> label_trajectory(const Trajectory& trajectory, const GridPartition& grid) {
  if (trajectory.dimension() != grid.dimension()) throw std::invalid_argument("label_trajectory: dimension mismatch");
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(trajectory.size()));
  for (Eigen::Index t = 0; t < trajectory.size(); ++t)
    labels[static_cast<std::size_t>(t)] = grid.cell_of(trajectory.states.col(t));
  return labels;
}

UlamOperator ulam_from_labels(std::span<const Eigen::Index> labels, Eigen::Index n_labels, long lag_steps, double dt) {
  if (lag_steps < 1) throw std::invalid_argument("build_ulam: lag_steps must be >= 1");
  if (static_cast<long>(labels.size()) <= lag_steps)
    throw std::invalid_argument("build_ulam: lag exceeds trajectory length");

  // Compact the labels that take part in at least one counted transition.
  std::vector<Eigen::Index> compact(static_cast<std::size_t>(n_labels), -1);
  const std::size_t n_pairs = labels.size() - static_cast<std::size_t>(lag_steps);
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const Eigen::Index a = labels[t];
    const Eigen::Index b = labels[t + static_cast<std::size_t>(lag_steps)];
    if (a < 0 || b < 0) continue;
    if (a >= n_labels || b >= n_labels) throw std::invalid_argument("build_ulam: label out of range");
    compact[static_cast<std::size_t>(a)] = 0;
    compact[static_cast<std::size_t>(b)] = 0;
  }
  std::vector<Eigen::Index> occupied;
  for (Eigen::Index i = 0; i < n_labels; ++i)
    if (compact[static_cast<std::size_t>(i)] == 0) {
      compact[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(occupied.size());
      occupied.push_back(i);
    }
  const auto m = static_cast<Eigen::Index>(occupied.size());
  if (m < 2) throw std::invalid_argument("build_ulam: fewer than 2 occupied cells");

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const Eigen::Index a = labels[t];
    const Eigen::Index b = labels[t + static_cast<std::size_t>(lag_steps)];
    if (a < 0 || b < 0) continue;
    counts(compact[static_cast<std::size_t>(a)], compact[static_cast<std::size_t>(b)]) += 1.0;
  }

  UlamOperator op;
  op.transitions = counts.sum();
  op.raw_asymmetry = (counts - counts.transpose()).cwiseAbs().maxCoeff() / op.transitions;
  counts = 0.5 * (counts + counts.transpose()).eval();
  const Eigen::VectorXd row_sums = counts.rowwise().sum();
  op.matrix = row_sums.cwiseInverse().asDiagonal() * counts;
  op.weights = row_sums / row_sums.sum();
  op.lag_steps = lag_steps;
  op.lag = static_cast<double>(lag_steps) * dt;
  op.labels = std::move(occupied);
  op.partition_size = n_labels;
  return op;
}

UlamOperator build_ulam(const Trajectory& trajectory, long lag_steps, const GridPartition& grid) {
  const auto labels = label_trajectory(trajectory, grid);
  return ulam_from_labels(labels, grid.size(), lag_steps, trajectory.dt);
}

namespace {

void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

struct SymmetricPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

SymmetricPairs dense_top_k(const Eigen::MatrixXd& S, Eigen::Index k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
  if (solver.info() != Eigen::Success) throw NumericalError("spectrum: dense eigensolver failed");
  // Ascending order from Eigen; take the k largest.
  const Eigen::Index n = S.rows();
  SymmetricPairs out{Eigen::VectorXd(k), Eigen::MatrixXd(n, k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    out.values[i] = solver.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Block subspace iteration with Rayleigh-Ritz on a symmetric matrix.
SymmetricPairs subspace_top_k(const Eigen::MatrixXd& S, Eigen::Index k, const Eigen::VectorXd& leading_guess) {
  const Eigen::Index n = S.rows();
  const Eigen::Index p = std::min(n, k + std::max<Eigen::Index>(10, k));
  const double scale = S.cwiseAbs().rowwise().sum().maxCoeff();
  const double tol = 1e-11 * std::max(scale, 1.0);

  // Deterministic start block: the known leading vector plus fixed pseudo-random columns.
  Eigen::MatrixXd Q(n, p);
  CounterStream stream(0x5eed, StreamTag::Sampling);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) Q(i, j) = stream.next_uniform() - 0.5;
  Q.col(0) = leading_guess;

  Eigen::VectorXd residuals = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
  SymmetricPairs out{Eigen::VectorXd(k), Eigen::MatrixXd(n, k)};
  for (int iter = 0; iter < 5000; ++iter) {
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() * Eigen::MatrixXd::Identity(n, p);
    const Eigen::MatrixXd SQ = S * Q;
    const Eigen::MatrixXd H = Q.transpose() * SQ;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (H + H.transpose()));
    // Ritz pairs in descending algebraic order.
    const Eigen::MatrixXd W = small.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd theta = small.eigenvalues().reverse();
    const Eigen::MatrixXd V = Q * W.leftCols(k);
    const Eigen::MatrixXd R = SQ * W.leftCols(k) - V * theta.head(k).asDiagonal();
    residuals = R.colwise().norm().transpose();
    if (residuals.maxCoeff() <= tol) {
      out.values = theta.head(k);
      out.vectors = V;
      return out;
    }
    Q = SQ * W;
  }
  std::ostringstream os;
  os << "spectrum: subspace iteration did not converge; residual norms:";
  for (Eigen::Index i = 0; i < k; ++i) os << ' ' << residuals[i];
  throw NumericalError(os.str());
}

}  // namespace

std::vector<EigenPair> reversible_spectrum(const Eigen::MatrixXd& K, const Eigen::VectorXd& weights, Eigen::Index k,
                                           EigenMethod method) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || weights.size() != n) throw std::invalid_argument("spectrum: shape mismatch");
  if (k < 1 || k > n) throw std::invalid_argument("spectrum: need 1 <= k <= number of states");
  if ((weights.array() <= 0).any()) throw std::invalid_argument("spectrum: weights must be positive");

  const Eigen::VectorXd sq = weights.cwiseSqrt();
  Eigen::MatrixXd S = sq.asDiagonal() * K * sq.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();

  if (method == EigenMethod::Auto) method = n <= 600 ? EigenMethod::Dense : EigenMethod::Subspace;
  const SymmetricPairs sym = method == EigenMethod::Dense ? dense_top_k(S, k) : subspace_top_k(S, k, sq);

  std::vector<EigenPair> pairs;
  pairs.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd phi = sym.vectors.col(i).cwiseQuotient(sq);
    phi /= std::sqrt(weights.dot(phi.cwiseAbs2()));
    fix_sign(phi);
    pairs.push_back({sym.values[i], std::move(phi)});
  }
  return pairs;
}

std::vector<EigenPair> spectrum(const UlamOperator& op, Eigen::Index k, EigenMethod method) {
  return reversible_spectrum(op.matrix, op.weights, k, method);
}

std::optional<double> relaxation_rate(double lambda, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("relaxation_rate: tau must be positive");
  if (!(lambda > 0) || lambda > 1.0 + 1e-10) return std::nullopt;
  // Rounding can push the stationary eigenvalue just above 1.
  return lambda >= 1.0 ? 0.0 : -std::log(lambda) / tau;
}

std::vector<std::optional<double>> relaxation_rates(std::span<const EigenPair> pairs, double tau) {
  std::vector<std::optional<double>> rates;
  rates.reserve(pairs.size());
  for (const auto& p : pairs) rates.push_back(relaxation_rate(p.value, tau));
  return rates;
}

}  // namespace wtm
