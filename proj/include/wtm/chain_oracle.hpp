#pragma once

// Exact finite reversible chains: every quantity here is a dense solve, so
// the level-set projection and the eigenvalue bounds can be checked without
// sampling noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "wtm/errors.hpp"
#include "wtm/random.hpp"

namespace wtm::oracle {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct ReversibleChain {
  Mat<Scalar> K;
  Vec<Scalar> pi;

  Eigen::Index size() const { return K.rows(); }

  /// Chain of a symmetric non-negative weight matrix: pi ~ row sums, K = D^-1 W.
  static ReversibleChain from_weights(const Mat<Scalar>& W) {
    if (W.rows() != W.cols() || W.rows() < 1) throw std::invalid_argument("chain: weights must be square");
    if ((W - W.transpose()).cwiseAbs().maxCoeff() != Scalar(0)) throw std::invalid_argument("chain: weights must be symmetric");
    const Vec<Scalar> d = W.rowwise().sum();
    if ((d.array() <= Scalar(0)).any()) throw std::invalid_argument("chain: every state needs positive weight");
    return {d.cwiseInverse().asDiagonal() * W, d / d.sum()};
  }

  Scalar stationarity_residual() const { return (pi.transpose() * K - pi.transpose()).cwiseAbs().maxCoeff(); }
  Scalar detailed_balance_residual() const {
    const Mat<Scalar> flux = pi.asDiagonal() * K;
    return (flux - flux.transpose()).cwiseAbs().maxCoeff();
  }
  Scalar row_sum_residual() const { return (K.rowwise().sum().array() - Scalar(1)).abs().maxCoeff(); }
};

/// Surjective map from states 0..n-1 onto blocks 0..m-1.
struct Lumping {
  std::vector<int> block;
  int m = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(block.size()); }
  void validate() const {
    if (m < 1) throw std::invalid_argument("lumping: needs at least one block");
    std::vector<bool> hit(static_cast<std::size_t>(m), false);
    for (int b : block) {
      if (b < 0 || b >= m) throw std::invalid_argument("lumping: block index out of range");
      hit[static_cast<std::size_t>(b)] = true;
    }
    if (std::find(hit.begin(), hit.end(), false) != hit.end()) throw std::invalid_argument("lumping: not surjective");
  }
  static Lumping identity(Eigen::Index n) {
    Lumping l{std::vector<int>(static_cast<std::size_t>(n)), static_cast<int>(n)};
    std::iota(l.block.begin(), l.block.end(), 0);
    return l;
  }
};

/// Uniform integer in [0, bound).
inline int uniform_index(CounterStream& stream, int bound) {
  return std::min(bound - 1, static_cast<int>(stream.next_uniform() * bound));
}

/// W_ij = (U_ij + U_ji) / 2 with U uniform on (0, 1).
template <typename Scalar = double>
ReversibleChain<Scalar> random_reversible_chain(Eigen::Index n, CounterStream& stream) {
  if (n < 2) throw std::invalid_argument("random_reversible_chain: n must be >= 2");
  Mat<Scalar> U(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) U(i, j) = static_cast<Scalar>(stream.next_uniform());
  return ReversibleChain<Scalar>::from_weights((U + U.transpose()) / Scalar(2));
}

template <typename Scalar = double>
ReversibleChain<Scalar> random_reversible_chain(Eigen::Index n, std::uint64_t seed) {
  CounterStream stream(seed, StreamTag::Oracle);
  return random_reversible_chain<Scalar>(n, stream);
}

/// Blocks 0..m-1 each get one state, the remaining states a uniform block;
/// the assignment is then shuffled.
inline Lumping random_lumping(Eigen::Index n, int m, CounterStream& stream) {
  if (m < 1 || m > n) throw std::invalid_argument("random_lumping: need 1 <= m <= n");
  Lumping l{std::vector<int>(static_cast<std::size_t>(n)), m};
  for (Eigen::Index i = 0; i < n; ++i) l.block[static_cast<std::size_t>(i)] = i < m ? static_cast<int>(i) : uniform_index(stream, m);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(l.block[static_cast<std::size_t>(i)], l.block[static_cast<std::size_t>(uniform_index(stream, static_cast<int>(i) + 1))]);
  return l;
}

/// Exactly lumpable chain: W_ij = u_i u_j B(block_i, block_j) with B
/// symmetric and diagonally dominant, so every block-level eigenvalue is
/// positive and the remaining n - m eigenvalues are 0.
template <typename Scalar = double>
ReversibleChain<Scalar> random_lumpable_chain(const Lumping& lumping, CounterStream& stream) {
  lumping.validate();
  const Eigen::Index n = lumping.size();
  Mat<Scalar> B(lumping.m, lumping.m);
  for (int a = 0; a < lumping.m; ++a)
    for (int b = 0; b <= a; ++b)
      B(a, b) = B(b, a) = static_cast<Scalar>(stream.next_uniform()) + (a == b ? Scalar(lumping.m) : Scalar(0));
  Vec<Scalar> u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = Scalar(0.5) + static_cast<Scalar>(stream.next_uniform());
  Mat<Scalar> W(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      W(i, j) = u[i] * u[j] * B(lumping.block[static_cast<std::size_t>(i)], lumping.block[static_cast<std::size_t>(j)]);
  W = ((W + W.transpose()) / Scalar(2)).eval();
  return ReversibleChain<Scalar>::from_weights(W);
}

template <typename Scalar>
Vec<Scalar> block_mass(const ReversibleChain<Scalar>& chain, const Lumping& lumping) {
  Vec<Scalar> mass = Vec<Scalar>::Zero(lumping.m);
  for (Eigen::Index i = 0; i < chain.size(); ++i) mass[lumping.block[static_cast<std::size_t>(i)]] += chain.pi[i];
  return mass;
}

/// pi-weighted block average of f, lifted back to the states.
template <typename Scalar>
Vec<Scalar> exact_pi_projection(const ReversibleChain<Scalar>& chain, const Lumping& lumping, const Vec<Scalar>& f) {
  if (f.size() != chain.size() || lumping.size() != chain.size())
    throw std::invalid_argument("exact_pi_projection: size mismatch");
  const Vec<Scalar> mass = block_mass(chain, lumping);
  Vec<Scalar> sum = Vec<Scalar>::Zero(lumping.m);
  for (Eigen::Index i = 0; i < f.size(); ++i) sum[lumping.block[static_cast<std::size_t>(i)]] += chain.pi[i] * f[i];
  Vec<Scalar> out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const int b = lumping.block[static_cast<std::size_t>(i)];
    out[i] = sum[b] / mass[b];
  }
  return out;
}

/// m x m chain K_xi(a, b) = sum_{i in a, j in b} pi_i K_ij / pi(a), with the
/// block masses of pi as stationary distribution. On block-constant functions
/// it acts as Pi K Pi.
template <typename Scalar>
ReversibleChain<Scalar> exact_effective_operator(const ReversibleChain<Scalar>& chain, const Lumping& lumping) {
  lumping.validate();
  if (lumping.size() != chain.size()) throw std::invalid_argument("exact_effective_operator: size mismatch");
  Mat<Scalar> flux = Mat<Scalar>::Zero(lumping.m, lumping.m);
  for (Eigen::Index i = 0; i < chain.size(); ++i)
    for (Eigen::Index j = 0; j < chain.size(); ++j)
      flux(lumping.block[static_cast<std::size_t>(i)], lumping.block[static_cast<std::size_t>(j)]) += chain.pi[i] * chain.K(i, j);
  const Vec<Scalar> mass = block_mass(chain, lumping);
  return {mass.cwiseInverse().asDiagonal() * flux, mass};
}

template <typename Scalar>
struct ChainSpectrum {
  /// Descending.
  Vec<Scalar> values;
  /// Columns normalized in the pi inner product.
  Mat<Scalar> functions;
};

/// Full spectrum via the symmetric form diag(sqrt pi) K diag(1/sqrt pi).
template <typename Scalar>
ChainSpectrum<Scalar> chain_spectrum(const ReversibleChain<Scalar>& chain) {
  const Vec<Scalar> sq = chain.pi.cwiseSqrt();
  Mat<Scalar> S = sq.asDiagonal() * chain.K * sq.cwiseInverse().asDiagonal();
  S = ((S + S.transpose()) / Scalar(2)).eval();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(S);
  if (solver.info() != Eigen::Success) throw NumericalError("chain_spectrum: eigensolver failed");
  const Eigen::Index n = chain.size();
  ChainSpectrum<Scalar> out{Vec<Scalar>(n), Mat<Scalar>(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = solver.eigenvalues()[n - 1 - i];
    out.functions.col(i) = solver.eigenvectors().col(n - 1 - i).cwiseQuotient(sq);
  }
  return out;
}

template <typename Scalar = double>
struct TheoremCheck {
  Scalar eps_avg = 0;
  Scalar eps_proj = 0;
  Scalar gap = 0;
  Scalar bound = std::numeric_limits<Scalar>::infinity();
  bool vacuous = false;
  /// gap - bound (<= 0 when the eigenvalue bound holds; 0 if vacuous).
  Scalar slack_eigenvalue = 0;
  /// eps_proj - 2 eps_avg (<= 0 when the projection bound holds).
  Scalar slack_projection = 0;
  bool holds = true;
};

/// Checks, for eigenpair i of the chain,
///   ||Pi phi_i - phi_i||_pi <= 2 max_blocks E_block |phi_i - block avg|
///   min_j |lambda_i - lambda_xi_j| <= eps_proj / sqrt(1 - eps_proj^2)
/// with a relative rounding tolerance `tol`. The second is vacuous when
/// eps_proj >= 1.
template <typename Scalar>
TheoremCheck<Scalar> verify_theorem_bounds(const ReversibleChain<Scalar>& chain, const Lumping& lumping, Eigen::Index i,
                                           Scalar tol = Scalar(1e-12)) {
  if (i < 1 || i >= chain.size()) throw std::invalid_argument("verify_theorem_bounds: need 1 <= i < n");
  const ChainSpectrum<Scalar> full = chain_spectrum(chain);
  const Vec<Scalar> phi = full.functions.col(i);
  const Vec<Scalar> projected = exact_pi_projection(chain, lumping, phi);
  const Vec<Scalar> mass = block_mass(chain, lumping);

  TheoremCheck<Scalar> c;
  Vec<Scalar> dev = Vec<Scalar>::Zero(lumping.m);
  for (Eigen::Index k = 0; k < chain.size(); ++k)
    dev[lumping.block[static_cast<std::size_t>(k)]] += chain.pi[k] * std::abs(phi[k] - projected[k]);
  c.eps_avg = dev.cwiseQuotient(mass).maxCoeff();
  c.eps_proj = std::sqrt((chain.pi.array() * (phi - projected).array().square()).sum());

  const ChainSpectrum<Scalar> lumped = chain_spectrum(exact_effective_operator(chain, lumping));
  c.gap = (lumped.values.array() - full.values[i]).abs().minCoeff();

  c.slack_projection = c.eps_proj - Scalar(2) * c.eps_avg;
  const bool projection_ok = c.slack_projection <= tol;
  c.vacuous = c.eps_proj >= Scalar(1);
  bool eigenvalue_ok = true;
  if (!c.vacuous) {
    c.bound = c.eps_proj / std::sqrt(Scalar(1) - c.eps_proj * c.eps_proj);
    c.slack_eigenvalue = c.gap - c.bound;
    eigenvalue_ok = c.slack_eigenvalue <= tol;
  }
  c.holds = projection_ok && eigenvalue_ok;
  return c;
}

struct SweepSummary {
  long trials = 0;
  long vacuous = 0;
  long violations_eigenvalue = 0;
  long violations_projection = 0;
  double max_slack_eigenvalue = -std::numeric_limits<double>::infinity();
  double max_slack_projection = -std::numeric_limits<double>::infinity();
  /// Largest gap over the exactly lumpable control chains.
  double max_lumpable_gap = 0.0;
  long lumpable_trials = 0;

  long violations() const { return violations_eigenvalue + violations_projection; }
};

/// Trial t draws n in [2, max_states], m in [1, n-1] (m = 1 for n = 2), a
/// random chain and a random lumping from stream (seed, Oracle, t, 0), and
/// checks eigenpair 1. Trials are independent, so the result does not depend
/// on thread scheduling.
template <typename Scalar = double>
SweepSummary theorem_sweep(long trials, std::uint64_t seed, int max_states = 8, long lumpable_trials = 100) {
  if (max_states < 2) throw std::invalid_argument("theorem_sweep: max_states must be >= 2");
  std::vector<TheoremCheck<Scalar>> checks(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic, 64)
  for (long t = 0; t < trials; ++t) {
    CounterStream stream(seed, StreamTag::Oracle, static_cast<std::uint32_t>(t), 0);
    const int n = 2 + uniform_index(stream, max_states - 1);
    const int m = n > 2 ? 1 + uniform_index(stream, n - 1) : 1;
    const auto chain = random_reversible_chain<Scalar>(n, stream);
    const Lumping lumping = random_lumping(n, m, stream);
    checks[static_cast<std::size_t>(t)] = verify_theorem_bounds(chain, lumping, 1);
  }

  SweepSummary s;
  s.trials = trials;
  for (const auto& c : checks) {
    if (c.vacuous) ++s.vacuous;
    if (c.slack_projection > Scalar(1e-12)) ++s.violations_projection;
    if (!c.vacuous && c.slack_eigenvalue > Scalar(1e-12)) ++s.violations_eigenvalue;
    s.max_slack_projection = std::max(s.max_slack_projection, static_cast<double>(c.slack_projection));
    if (!c.vacuous) s.max_slack_eigenvalue = std::max(s.max_slack_eigenvalue, static_cast<double>(c.slack_eigenvalue));
  }

  // Controls: exactly lumpable chains must preserve their block eigenvalues.
  s.lumpable_trials = lumpable_trials;
  for (long t = 0; t < lumpable_trials; ++t) {
    CounterStream stream(seed, StreamTag::Oracle, static_cast<std::uint32_t>(t), 1);
    const int n = 3 + uniform_index(stream, std::max(1, max_states - 2));
    const int m = 2 + uniform_index(stream, n - 2);
    const Lumping lumping = random_lumping(n, m, stream);
    const auto chain = random_lumpable_chain<Scalar>(lumping, stream);
    const auto full = chain_spectrum(chain).values;
    const auto lumped = chain_spectrum(exact_effective_operator(chain, lumping)).values;
    s.max_lumpable_gap = std::max(s.max_lumpable_gap, static_cast<double>((full.head(m) - lumped).cwiseAbs().maxCoeff()));
  }
  return s;
}

}  // namespace wtm::oracle
