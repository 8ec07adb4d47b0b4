#pragma once

#include <concepts>

#include <Eigen/Core>

namespace wtm {

/// Anything with a fixed state dimension, an energy and its gradient.
template <typename P>
concept Potential = requires(const P& p, const typename P::State& x) {
  typename P::Scalar;
  typename P::State;
  { P::Dimension } -> std::convertible_to<int>;
  { p.energy(x) } -> std::convertible_to<typename P::Scalar>;
  { p.gradient(x) } -> std::convertible_to<typename P::State>;
};

/// V(x) = (x1^2 - 1)^2 + 10 (x1^2 + x2 - 1)^2.
///
/// Two minima A = (-1, 0), B = (1, 0), saddle at (0, 1); the minimum energy
/// path between them is the parabola x2 = 1 - x1^2.
template <typename Scalar_ = double>
struct BananaPotential {
  using Scalar = Scalar_;
  static constexpr int Dimension = 2;
  using State = Eigen::Matrix<Scalar, 2, 1>;

  Scalar energy(const State& x) const {
    const Scalar a = x[0] * x[0] - Scalar(1);
    const Scalar b = x[0] * x[0] + x[1] - Scalar(1);
    return a * a + Scalar(10) * b * b;
  }

  State gradient(const State& x) const {
    const Scalar a = x[0] * x[0] - Scalar(1);
    const Scalar b = x[0] * x[0] + x[1] - Scalar(1);
    return State(Scalar(4) * x[0] * a + Scalar(40) * x[0] * b, Scalar(20) * b);
  }
};

/// V = 0 in any dimension (pure diffusion).
template <typename Scalar_ = double, int Dim = 2>
struct FlatPotential {
  using Scalar = Scalar_;
  static constexpr int Dimension = Dim;
  using State = Eigen::Matrix<Scalar, Dim, 1>;

  Scalar energy(const State&) const { return Scalar(0); }
  State gradient(const State&) const { return State::Zero(); }
};

/// V(x) = k/2 |x - c|^2; the Ornstein-Uhlenbeck process.
template <typename Scalar_ = double, int Dim = 2>
struct QuadraticPotential {
  using Scalar = Scalar_;
  static constexpr int Dimension = Dim;
  using State = Eigen::Matrix<Scalar, Dim, 1>;

  Scalar stiffness = Scalar(1);
  State center = State::Zero();

  Scalar energy(const State& x) const { return Scalar(0.5) * stiffness * (x - center).squaredNorm(); }
  State gradient(const State& x) const { return stiffness * (x - center); }
};

static_assert(Potential<BananaPotential<double>>);
static_assert(Potential<FlatPotential<double, 1>>);
static_assert(Potential<QuadraticPotential<double, 2>>);

}  // namespace wtm
