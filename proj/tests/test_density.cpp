#include <doctest.h>

#include <cmath>

#include "wtm/density.hpp"

using namespace wtm;

namespace {
const GridPartition kLattice = GridPartition::uniform(Box::square(-2, 2), 50);

Eigen::MatrixXd gaussian_points(long n, double sd, std::uint64_t seed) {
  NormalSequence z(seed, StreamTag::Test);
  Eigen::MatrixXd p(2, n);
  for (long i = 0; i < n; ++i) p.col(i) = Eigen::Vector2d(sd * z(), sd * z());
  return p;
}
}  // namespace

TEST_CASE("kde is normalized and non-negative") {
  const auto f = kde(gaussian_points(2000, 0.3, 1), kLattice, 0.1);
  CHECK(f.integral() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.values.minCoeff() >= 0.0);
  // Peak near the analytic density of N(0, 0.3^2 + 0.1^2).
  const double s2 = 0.09 + 0.01;
  CHECK(f.at(Eigen::Vector2d::Zero()) == doctest::Approx(1.0 / (2 * M_PI * s2)).epsilon(0.1));
}

TEST_CASE("interpolation is exact at cell centers and zero outside") {
  const auto f = kde(gaussian_points(500, 0.5, 2), kLattice, 0.1);
  for (Eigen::Index i : {0L, 17L, 1234L, 2499L}) CHECK(f.at(kLattice.cell_center(i)) == doctest::Approx(f.values[i]));
  CHECK(f.at(Eigen::Vector2d(3, 0)) == 0.0);
  // Between the outer center and the face the value is clamped.
  CHECK(f.at(Eigen::Vector2d(-1.99, -1.99)) == doctest::Approx(f.values[0]));
}

TEST_CASE("weighted L2 distance is a metric and reduces to L2 for constant weights") {
  const auto f = kde(gaussian_points(800, 0.4, 3), kLattice, 0.1);
  const auto g = kde(gaussian_points(800, 0.4, 4), kLattice, 0.1);
  const auto h = kde(gaussian_points(800, 0.6, 5), kLattice, 0.1);
  DensityField uniform{kLattice, Eigen::VectorXd::Constant(kLattice.size(), 1.0 / 16), 0.0};
  const double floor = 1e-4 * uniform.values.maxCoeff();
  CHECK(weighted_l2_distance(f, f, uniform, floor) == 0.0);
  CHECK(weighted_l2_distance(f, g, uniform, floor) == doctest::Approx(weighted_l2_distance(g, f, uniform, floor)));
  CHECK(weighted_l2_distance(f, h, uniform, floor) <=
        weighted_l2_distance(f, g, uniform, floor) + weighted_l2_distance(g, h, uniform, floor) + 1e-12);
  const double l2 = std::sqrt((f.values - g.values).squaredNorm() * kLattice.cell_volume());
  CHECK(weighted_l2_distance(f, g, uniform, floor) == doctest::Approx(l2 * 4.0));
  CHECK(l1_distance(f, f) == 0.0);
}

TEST_CASE("floor caps the inverse weight") {
  const auto f = kde(gaussian_points(300, 0.3, 6), kLattice, 0.1);
  DensityField zero{kLattice, Eigen::VectorXd::Zero(kLattice.size()), 0.0};
  DensityField empty{kLattice, Eigen::VectorXd::Zero(kLattice.size()), 0.0};
  const double d = weighted_l2_distance(f, empty, zero, 0.5);
  CHECK(d == doctest::Approx(std::sqrt(f.values.squaredNorm() * kLattice.cell_volume() / 0.5)));
  CHECK_THROWS_AS(weighted_l2_distance(f, empty, zero, 0.0), std::invalid_argument);
}

TEST_CASE("lattice and bandwidth errors") {
  const auto p = gaussian_points(10, 0.3, 7);
  CHECK_THROWS_AS(kde(p, kLattice, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(kde(p, kLattice, -1.0), std::invalid_argument);
  Eigen::MatrixXd far = Eigen::MatrixXd::Constant(2, 3, 100.0);
  CHECK_THROWS_AS(kde(far, kLattice, 0.1), NumericalError);
  const auto f = kde(p, kLattice, 0.1);
  const auto other = kde(p, GridPartition::uniform(Box::square(-2, 2), 40), 0.1);
  CHECK_THROWS_AS(l1_distance(f, other), std::invalid_argument);
}

TEST_CASE("boltzmann density: normalized, minima ratio, agrees with a narrow kde of a long run") {
  const BananaPotential<double> v;
  const auto rho = boltzmann_density(v, 1.0, kLattice);
  CHECK(rho.integral() == doctest::Approx(1.0));
  // Symmetric in x1 -> -x1.
  const auto left = kLattice.cell_of(Eigen::Vector2d(-1.01, 0.01));
  const auto right = kLattice.cell_of(Eigen::Vector2d(1.01, 0.01));
  CHECK(rho.values[left] == doctest::Approx(rho.values[right]));
  // exp(-beta (V(saddle) - V(min))) = e^-1 between nearby centers.
  const Eigen::Vector2d saddle(0.04, 0.96), well(1.04, 0.04);
  const double ratio = rho.at(saddle) / rho.at(well);
  CHECK(ratio == doctest::Approx(std::exp(-(v.energy(saddle) - v.energy(well)))).epsilon(0.05));

  // Histogram of exact Boltzmann samples at small bandwidth reproduces it.
  SimulationConfig c;
  c.seed = 9;
  const auto traj = long_trajectory(v, c, BananaPotential<double>::State(-1, 0), 2'000'000, 10'000);
  const auto coarse = GridPartition::uniform(Box::square(-2, 2), 20);
  const auto est = estimate_stationary_density(traj, coarse, 0.02, 10);
  const auto exact = boltzmann_density(v, 1.0, coarse);
  CHECK(l1_distance(est, exact) < 0.15);
}

TEST_CASE("mean embedding of a cloud") {
  EndpointCloud cloud;
  cloud.start = Eigen::Vector2d(0, 0);
  cloud.endpoints = Eigen::MatrixXd(2, 3);
  cloud.endpoints << 1, 2, 3, 0, 0, 3;
  const auto e = mean_embedding(cloud);
  CHECK(e.mean.isApprox(Eigen::Vector2d(2, 1)));
  CHECK(e.samples == 3);
}

TEST_CASE("mean embedding: identical points, linearity, driftless bias") {
  EndpointCloud same{Eigen::Vector2d(0, 0), Eigen::Vector2d(0.3, -1.1).replicate(1, 7), 0.5, 1, 0};
  CHECK(mean_embedding(same).mean.isApprox(Eigen::Vector2d(0.3, -1.1)));

  const Eigen::MatrixXd a = gaussian_points(30, 1.0, 10), b = gaussian_points(70, 1.0, 11);
  Eigen::MatrixXd pooled(2, 100);
  pooled << a, b;
  const auto mean_of = [](const Eigen::MatrixXd& p) {
    return mean_embedding(EndpointCloud{Eigen::Vector2d::Zero(), p, 0.5, 1, 0}).mean;
  };
  CHECK(mean_of(pooled).isApprox((30 * mean_of(a) + 70 * mean_of(b)) / 100));

  FlatPotential<double, 2> flat;
  SimulationConfig c;
  c.tau = 0.1;
  c.dt = 0.01;
  const long M = 4000;
  const auto cloud = sample_endpoint_cloud(flat, c, Eigen::Vector2d(0.4, -0.3), M);
  const Eigen::Vector2d bias = mean_embedding(cloud).mean - Eigen::Vector2d(0.4, -0.3);
  CHECK(bias.cwiseAbs().maxCoeff() < 3 * std::sqrt(2 * c.tau / (c.beta * M)));

  const auto well = sample_endpoint_cloud(BananaPotential<double>{}, SimulationConfig{}, Eigen::Vector2d(-1, 0), 1000);
  CHECK((mean_embedding(well).mean - Eigen::Vector2d(-1, 0)).norm() < 0.2);
}

TEST_CASE("kde of one point peaks at the nearest center; constant trajectory is point-like") {
  Eigen::MatrixXd one(2, 1);
  one << 0.53, -0.61;
  const auto f = kde(one, kLattice, 0.1);
  Eigen::Index arg;
  f.values.maxCoeff(&arg);
  CHECK(arg == kLattice.cell_of(one.col(0)));

  Trajectory still{Eigen::Vector2d(0.53, -0.61).replicate(1, 100), 0.01};
  const auto g = estimate_stationary_density(still, kLattice, 0.05);
  g.values.maxCoeff(&arg);
  CHECK(arg == kLattice.cell_of(one.col(0)));
  CHECK(g.values[arg] * kLattice.cell_volume() > 0.1);
}

TEST_CASE("kde of 1e5 normal draws is close to the analytic density") {
  // Lattice wide enough to hold the whole distribution, so normalization is not a truncation.
  const auto wide = GridPartition::uniform(Box::square(-5, 5), 100);
  const auto f = kde(gaussian_points(100'000, 1.0, 12), wide, 0.1);
  DensityField exact{wide, Eigen::VectorXd(wide.size()), 0.0};
  for (Eigen::Index i = 0; i < wide.size(); ++i)
    exact.values[i] = std::exp(-0.5 * wide.cell_center(i).squaredNorm()) / (2 * M_PI);
  CHECK(l1_distance(f, exact) < 0.05);
}

TEST_CASE("kde converges in M on average") {
  FlatPotential<double, 2> flat;
  SimulationConfig c;
  c.tau = 0.1;
  c.dt = 0.01;
  const auto ref = kde(sample_endpoint_cloud(flat, c, Eigen::Vector2d::Zero(), 100'000, 999), kLattice, 0.1);
  double d3 = 0, d4 = 0;
  for (std::uint32_t s = 0; s < 4; ++s) {
    d3 += l1_distance(kde(sample_endpoint_cloud(flat, c, Eigen::Vector2d::Zero(), 1000, s), kLattice, 0.1), ref);
    d4 += l1_distance(kde(sample_endpoint_cloud(flat, c, Eigen::Vector2d::Zero(), 10'000, 100 + s), kLattice, 0.1), ref);
  }
  CHECK(d4 < d3);
}

TEST_CASE("operations are deterministic") {
  const auto p = gaussian_points(500, 0.5, 13);
  CHECK(kde(p, kLattice, 0.1).values == kde(p, kLattice, 0.1).values);
}
