#include <doctest.h>

#include <cmath>
#include <cstring>

#include "wtm/dynamics.hpp"

using namespace wtm;
using Banana = BananaPotential<double>;

TEST_CASE("banana gradient matches central differences") {
  const Banana v;
  CounterStream s(3, StreamTag::Test);
  for (int k = 0; k < 50; ++k) {
    const Banana::State x(4 * s.next_uniform() - 2, 4 * s.next_uniform() - 2);
    const double h = 1e-6;
    for (int d = 0; d < 2; ++d) {
      Banana::State e = Banana::State::Zero();
      e[d] = h;
      const double fd = (v.energy(x + e) - v.energy(x - e)) / (2 * h);
      REQUIRE(v.gradient(x)[d] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("banana critical points and the parabolic path") {
  const Banana v;
  CHECK(v.energy({-1, 0}) == 0.0);
  CHECK(v.energy({1, 0}) == 0.0);
  CHECK(v.energy({0, 1}) == 1.0);
  CHECK(v.gradient({-1, 0}).norm() == 0.0);
  CHECK(v.gradient({1, 0}).norm() == 0.0);
  CHECK(v.gradient({0, 1}).norm() == 0.0);
  // Along x2 = 1 - x1^2 the stiff term vanishes.
  for (double t = -1.5; t <= 1.5; t += 0.25) {
    const double a = t * t - 1;
    CHECK(v.energy({t, 1 - t * t}) == doctest::Approx(a * a));
  }
}

TEST_CASE("lag rounding") {
  SimulationConfig c;
  CHECK(c.lag_steps() == 500);
  CHECK_FALSE(c.tau_was_rounded());
  c.dt = 3e-3;
  CHECK(c.lag_steps() == 167);
  CHECK(c.tau_was_rounded());
  CHECK(c.effective_tau() == doctest::Approx(0.501));
}

TEST_CASE("configuration errors name the key") {
  const auto key_of = [](SimulationConfig c) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string{};
  };
  SimulationConfig c;
  c.dt = 0;
  CHECK(key_of(c) == "dt");
  c = {};
  c.beta = -1;
  CHECK(key_of(c) == "beta");
  c = {};
  c.tau = 1e-4;
  CHECK(key_of(c) == "tau");
  c = {};
  c.domain = Box::square(1, -1);
  CHECK(key_of(c) == "domain");
}

TEST_CASE("ornstein-uhlenbeck stationary variance is 1 / (beta k)") {
  QuadraticPotential<double, 2> q;
  q.stiffness = 2.0;
  SimulationConfig c;
  c.beta = 1.0;
  c.dt = 1e-2;
  c.seed = 11;
  const auto traj = long_trajectory(q, c, Eigen::Vector2d::Zero(), 400'000, 1000);
  // Exact for the discretized chain: (2 dt / beta) / (1 - (1 - k dt)^2) = 1 / (beta k (1 - k dt / 2)).
  const double expected = 1.0 / (c.beta * q.stiffness * (1 - q.stiffness * c.dt / 2));
  for (int d = 0; d < 2; ++d) {
    const Eigen::ArrayXd row = traj.states.row(d).transpose().array();
    const double var = (row - row.mean()).square().mean();
    CHECK(var == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("trajectory is reproducible and respects burn-in") {
  const Banana v;
  SimulationConfig c;
  const Banana::State start(-1, 0);
  const auto a = long_trajectory(v, c, start, 2000, 0);
  const auto b = long_trajectory(v, c, start, 2000, 500);
  CHECK(a.size() == 2000);
  CHECK(b.size() == 1500);
  CHECK(a.states.col(0) == Eigen::Vector2d(-1, 0));
  CHECK(a.states.rightCols(1500) == b.states);
  CHECK_THROWS_AS(long_trajectory(v, c, start, 10, 10), std::invalid_argument);
}

TEST_CASE("blow-up is reported as a numerical error") {
  const Banana v;
  SimulationConfig c;
  c.dt = 0.5;
  c.tau = 50;
  CHECK_THROWS_AS(sample_endpoint_cloud(v, c, Banana::State(1.5, 1.5), 1), NumericalError);
}

TEST_CASE("cloud sampling is invariant to chunking") {
  const Banana v;
  SimulationConfig c;
  c.tau = 0.05;
  Eigen::MatrixXd starts(2, 5);
  starts << -1, -0.5, 0, 0.5, 1, 0, 0.5, 1, 0.5, 0;
  const auto whole = sample_clouds(v, c, starts, 4, StreamTag::ScanCloud);
  const auto tail = sample_clouds(v, c, starts.rightCols(2), 4, StreamTag::ScanCloud, 3);
  CHECK(whole[3].endpoints == tail[0].endpoints);
  CHECK(whole[4].endpoints == tail[1].endpoints);
  CHECK(whole[0].endpoints != whole[1].endpoints);
  const auto other = sample_clouds(v, c, starts, 4, StreamTag::AnchorCloud);
  CHECK(other[0].endpoints != whole[0].endpoints);
}

TEST_CASE("flat potential clouds spread as pure diffusion") {
  FlatPotential<double, 2> flat;
  SimulationConfig c;
  c.tau = 0.1;
  c.dt = 0.01;
  const auto cloud = sample_endpoint_cloud(flat, c, Eigen::Vector2d::Zero(), 20'000);
  // Var = 2 tau / beta per axis.
  const Eigen::ArrayXd x = cloud.endpoints.row(0).transpose().array();
  CHECK(x.mean() == doctest::Approx(0).scale(1.0).epsilon(0.01));
  CHECK(x.square().mean() == doctest::Approx(0.2).epsilon(0.03));
}

TEST_CASE("single Euler-Maruyama steps") {
  const Banana v;
  SimulationConfig c;
  CHECK(euler_maruyama_step(Banana::State(1, 0), v, c, Banana::State::Zero()) == Banana::State(1, 0));
  FlatPotential<double, 2> flat;
  c.dt = 0.01;
  const auto x = euler_maruyama_step(Eigen::Vector2d(0.3, -0.2), flat, c, Eigen::Vector2d(1, 0));
  CHECK(x[0] == doctest::Approx(0.3 + std::sqrt(0.02)));
  CHECK(x[1] == doctest::Approx(-0.2));
}

TEST_CASE("zero-drift increments have variance 2 dt / beta") {
  FlatPotential<double, 2> flat;
  SimulationConfig c;
  c.dt = 0.01;
  c.beta = 2.0;
  c.tau = 0.01;
  const auto traj = long_trajectory(flat, c, Eigen::Vector2d::Zero(), 100'001, 0);
  const Eigen::MatrixXd inc = traj.states.rightCols(100'000) - traj.states.leftCols(100'000);
  for (int d = 0; d < 2; ++d)
    CHECK(inc.row(d).squaredNorm() / 100'000 == doctest::Approx(2 * c.dt / c.beta).epsilon(0.03));
}

TEST_CASE("minimal trajectory and bitwise determinism") {
  const Banana v;
  SimulationConfig c;
  c.seed = 77;
  CHECK(long_trajectory(v, c, Banana::State(0, 1), 12, 10).size() == 2);
  const auto a = long_trajectory(v, c, Banana::State(0, 1), 5000, 100);
  const auto b = long_trajectory(v, c, Banana::State(0, 1), 5000, 100);
  CHECK(std::memcmp(a.states.data(), b.states.data(), sizeof(double) * static_cast<std::size_t>(a.states.size())) == 0);
}

TEST_CASE("one-step pure diffusion clouds are start plus scaled stream normals") {
  FlatPotential<double, 2> flat;
  SimulationConfig c;
  c.dt = 0.01;
  c.tau = 0.01;
  c.seed = 5;
  const Eigen::Vector2d start(0.5, -0.5);
  const auto cloud = sample_endpoint_cloud(flat, c, start, 8, 3);
  for (std::uint32_t l = 0; l < 8; ++l) {
    NormalSequence z(5, StreamTag::ScanCloud, 3, l);
    const double a = z(), b = z();
    CHECK(cloud.endpoints(0, l) == doctest::Approx(0.5 + std::sqrt(0.02) * a));
    CHECK(cloud.endpoints(1, l) == doctest::Approx(-0.5 + std::sqrt(0.02) * b));
  }
  CHECK(sample_endpoint_cloud(flat, c, start, 1).size() == 1);
  CHECK_THROWS_AS(sample_endpoint_cloud(flat, c, start, 0), std::invalid_argument);
}

TEST_CASE("metastability: clouds from well A stay left") {
  const Banana v;
  SimulationConfig c;
  const auto cloud = sample_endpoint_cloud(v, c, Banana::State(-1, 0), 10'000);
  const double left = (cloud.endpoints.row(0).array() < 0).cast<double>().mean();
  CHECK(left >= 0.9);
}

TEST_CASE("without noise the energy never increases") {
  const Banana v;
  SimulationConfig c;
  CounterStream s(6, StreamTag::Test);
  for (int k = 0; k < 20; ++k) {
    Banana::State x(4 * s.next_uniform() - 2, 4 * s.next_uniform() - 2);
    for (int step = 0; step < 2000; ++step) {
      const Banana::State next = euler_maruyama_step(x, v, c, Banana::State::Zero());
      REQUIRE(v.energy(next) <= v.energy(x) + 1e-15);
      x = next;
    }
  }
}
