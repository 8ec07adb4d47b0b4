#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "wtm/errors.hpp"
#include "wtm/grid.hpp"
#include "wtm/potential.hpp"
#include "wtm/random.hpp"

namespace wtm {

/// Parameters of dX = -grad V(X) dt + sqrt(2/beta) dW and its discretization.
///
/// dt, M, trajectory length and burn-in are not fixed by the benchmark's
/// source; the defaults here are our choices (dt = 1e-3 keeps the stiff
/// 10 (x1^2 + x2 - 1)^2 term stable).
struct SimulationConfig {
  double beta = 1.0;
  double dt = 1e-3;
  double tau = 0.5;
  std::uint64_t seed = 1;
  Box domain = Box::square(-2.0, 2.0);

  /// tau / dt rounded to the nearest integer (at least 1).
  long lag_steps() const {
    const long n = std::lround(tau / dt);
    return n < 1 ? 1 : n;
  }
  /// The lag actually simulated: lag_steps() * dt.
  double effective_tau() const { return static_cast<double>(lag_steps()) * dt; }
  bool tau_was_rounded() const { return std::abs(effective_tau() - tau) > 1e-12 * std::max(1.0, tau); }

  void validate() const {
    if (!(beta > 0) || !std::isfinite(beta)) throw ConfigError("beta", "must be positive and finite");
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive and finite");
    if (!(tau >= dt) || !std::isfinite(tau)) throw ConfigError("tau", "must be finite and >= dt");
    try {
      domain.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("domain", e.what());
    }
  }
};

/// States sampled every dt; column t is X at time t*dt.
struct Trajectory {
  Eigen::MatrixXd states;
  double dt = 0.0;

  Eigen::Index dimension() const { return states.rows(); }
  Eigen::Index size() const { return states.cols(); }
};

/// M samples of p^tau(start, .), one endpoint per column.
struct EndpointCloud {
  Eigen::VectorXd start;
  Eigen::MatrixXd endpoints;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t start_index = 0;

  Eigen::Index size() const { return endpoints.cols(); }
};

namespace detail {

template <typename State>
[[noreturn]] void report_blow_up(const State& from, double dt) {
  std::ostringstream os;
  os << "Euler-Maruyama blow-up (dt = " << dt << ") from state (";
  for (Eigen::Index d = 0; d < from.size(); ++d) os << (d ? ", " : "") << from[d];
  os << ")";
  throw NumericalError(os.str());
}

template <typename State>
void draw_noise(NormalSequence& normals, State& noise) {
  for (Eigen::Index d = 0; d < noise.size(); ++d) noise[d] = normals();
}

}  // namespace detail

/// One Euler-Maruyama step: x - grad V(x) dt + sqrt(2 dt / beta) noise.
/// Throws NumericalError naming the offending state if the result is not finite.
template <Potential P>
typename P::State euler_maruyama_step(const typename P::State& x, const P& potential, const SimulationConfig& config,
                                      const typename P::State& noise) {
  const double scale = std::sqrt(2.0 * config.dt / config.beta);
  typename P::State next = x - potential.gradient(x) * config.dt + scale * noise;
  if (!next.allFinite()) detail::report_blow_up(x, config.dt);
  return next;
}

/// Simulate n_steps states x_0 = start, x_1, ..., discarding the first burn_in.
/// Noise is the (seed, Trajectory) normal sequence consumed in step order, so
/// the result depends on nothing but the arguments.
template <Potential P>
Trajectory long_trajectory(const P& potential, const SimulationConfig& config, const typename P::State& start,
                           long n_steps, long burn_in) {
  config.validate();
  if (burn_in < 0 || n_steps <= burn_in) throw std::invalid_argument("long_trajectory: need n_steps > burn_in >= 0");
  if (!start.allFinite()) throw std::invalid_argument("long_trajectory: start must be finite");

  NormalSequence normals(config.seed, StreamTag::Trajectory);
  const double scale = std::sqrt(2.0 * config.dt / config.beta);
  Trajectory out{Eigen::MatrixXd(P::Dimension, n_steps - burn_in), config.dt};
  typename P::State x = start;
  typename P::State noise;
  for (long k = 0; k < n_steps; ++k) {
    if (k >= burn_in) out.states.col(k - burn_in) = x;
    detail::draw_noise(normals, noise);
    typename P::State next = x - potential.gradient(x) * config.dt + scale * noise;
    if (!next.allFinite()) detail::report_blow_up(x, config.dt);
    x = next;
  }
  return out;
}

/// Endpoint l of a cloud: lag_steps() steps from `start`, driven by the
/// normal sequence (seed, tag, start_index, l).
template <Potential P>
typename P::State sample_endpoint(const P& potential, const SimulationConfig& config, const typename P::State& start,
                                  std::uint32_t start_index, std::uint32_t l, StreamTag tag) {
  NormalSequence normals(config.seed, tag, start_index, l);
  const double scale = std::sqrt(2.0 * config.dt / config.beta);
  const long steps = config.lag_steps();
  typename P::State x = start;
  typename P::State noise;
  for (long k = 0; k < steps; ++k) {
    detail::draw_noise(normals, noise);
    typename P::State next = x - potential.gradient(x) * config.dt + scale * noise;
    if (!next.allFinite()) detail::report_blow_up(x, config.dt);
    x = next;
  }
  return x;
}

template <Potential P>
EndpointCloud sample_endpoint_cloud(const P& potential, const SimulationConfig& config,
                                    const typename P::State& start, long M, std::uint32_t start_index = 0,
                                    StreamTag tag = StreamTag::ScanCloud) {
  config.validate();
  if (M < 1) throw std::invalid_argument("sample_endpoint_cloud: M must be >= 1");
  EndpointCloud cloud{start, Eigen::MatrixXd(P::Dimension, M), config.effective_tau(), config.seed, start_index};
  for (long l = 0; l < M; ++l)
    cloud.endpoints.col(l) = sample_endpoint(potential, config, start, start_index, static_cast<std::uint32_t>(l), tag);
  return cloud;
}

/// One cloud per column of `starts`; column i uses stream coordinate
/// first_index + i, so a scan split into chunks draws the same numbers.
/// Clouds are independent, so the loop is parallel when OpenMP is available.
template <Potential P>
std::vector<EndpointCloud> sample_clouds(const P& potential, const SimulationConfig& config,
                                         const Eigen::MatrixXd& starts, long M, StreamTag tag,
                                         std::uint32_t first_index = 0) {
  config.validate();
  if (M < 1) throw std::invalid_argument("sample_clouds: M must be >= 1");
  if (starts.rows() != P::Dimension) throw std::invalid_argument("sample_clouds: start dimension mismatch");
  std::vector<EndpointCloud> clouds(static_cast<std::size_t>(starts.cols()));
  const auto n = static_cast<long>(starts.cols());
  // Exceptions may not escape an OpenMP region; collect the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      const typename P::State start = starts.col(i);
      clouds[static_cast<std::size_t>(i)] =
          sample_endpoint_cloud(potential, config, start, M, first_index + static_cast<std::uint32_t>(i), tag);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return clouds;
}

}  // namespace wtm
