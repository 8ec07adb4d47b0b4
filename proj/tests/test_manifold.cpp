#include <doctest.h>

#include <cmath>
#include <vector>

#include "wtm/manifold.hpp"

using namespace wtm;

namespace {

const GridPartition kLattice = GridPartition::uniform(Box::square(-2, 2), 30);

// Atlas whose anchors have prescribed means; clouds are the mean repeated.
ManifoldAtlas synthetic_atlas(const std::vector<Eigen::Vector2d>& means, long M = 3) {
  ManifoldAtlas atlas;
  atlas.r = 1;
  atlas.tau = 0.5;
  atlas.samples_per_anchor = M;
  for (std::size_t k = 0; k < means.size(); ++k) {
    EndpointCloud cloud{means[k], means[k].replicate(1, M), 0.5, 1, static_cast<std::uint32_t>(k)};
    atlas.anchors.push_back({means[k], Eigen::VectorXd::Constant(1, static_cast<double>(k)), cloud, means[k], {}});
  }
  return atlas;
}

EmbeddedPoint point(double x, double y) { return {Eigen::Vector2d(x, y), Eigen::Vector2d(x, y), 1}; }

ProjectionResult result(Eigen::Index anchor, double residual, double x = 0) {
  return {Eigen::Vector2d(x, 0), anchor, residual, Eigen::VectorXd::Constant(1, static_cast<double>(anchor)),
          Metric::Density};
}

}  // namespace

TEST_CASE("mep edge is sqrt(3) on the benchmark domain") {
  CHECK(mep_edge(Box::square(-2, 2)) == doctest::Approx(std::sqrt(3.0)));
  CHECK(mep_edge(Box::square(-1, 2)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mep_edge(Box::square(-2, 0.5)), std::invalid_argument);
}

TEST_CASE("mep manifold: anchors on the parabola, strictly increasing parameters") {
  const BananaPotential<double> v;
  SimulationConfig c;
  c.tau = 0.01;
  const auto atlas = mep_manifold(v, c, 2, 5);
  REQUIRE(atlas.size() == 2);
  CHECK(atlas.anchors[0].state[0] == doctest::Approx(-std::sqrt(3.0)));
  CHECK(atlas.anchors[0].state[1] == doctest::Approx(-2.0));
  CHECK(atlas.anchors[1].parameter[0] == doctest::Approx(std::sqrt(3.0)));
  CHECK(atlas.samples_per_anchor == 5);
  CHECK_THROWS_AS(mep_manifold(v, c, 1, 5), std::invalid_argument);
}

TEST_CASE("atlas validation") {
  auto atlas = synthetic_atlas({{0, 0}, {1, 0}});
  CHECK_NOTHROW(atlas.validate());
  std::swap(atlas.anchors[0].parameter, atlas.anchors[1].parameter);
  CHECK_THROWS_AS(atlas.validate(), std::invalid_argument);
  atlas = synthetic_atlas({{0, 0}, {1, 0}});
  atlas.anchors[1].cloud.endpoints.conservativeResize(2, 2);
  CHECK_THROWS_AS(atlas.validate(), std::invalid_argument);
  atlas = synthetic_atlas({{0, 0}, {1, 0}});
  atlas.anchors[1].cloud.tau = 0.4;
  CHECK_THROWS_AS(atlas.validate(), std::invalid_argument);
}

TEST_CASE("embedded projection: self-projection is exact, ties go to the lower index") {
  const auto atlas = synthetic_atlas({{-1, 0}, {0, 1}, {1, 0}});
  for (Eigen::Index k = 0; k < 3; ++k) {
    const auto& m = atlas.anchors[static_cast<std::size_t>(k)].mean;
    const auto r = project_embedded(atlas, point(m[0], m[1]));
    CHECK(r.anchor == k);
    CHECK(r.residual == 0.0);
  }
  // (0, 0) is at distance 1 from anchors 0 and 2 and from anchor 1.
  const auto tie = project_embedded(atlas, point(0, 0));
  CHECK(tie.anchor == 0);
  CHECK(tie.residual == doctest::Approx(1.0));
  CHECK(tie.metric == Metric::Embedded);
}

TEST_CASE("density projection: self-projection is zero, nearest density wins") {
  auto atlas = synthetic_atlas({{-1, 0}, {0, 1}, {1, 0}}, 20);
  // Spread clouds so the KDEs overlap.
  NormalSequence z(5, StreamTag::Test);
  for (auto& a : atlas.anchors)
    for (long l = 0; l < 20; ++l) a.cloud.endpoints.col(l) = a.mean + 0.2 * Eigen::Vector2d(z(), z());
  atlas.attach_densities(kLattice, 0.2);
  const DensityField rho{kLattice, Eigen::VectorXd::Constant(kLattice.size(), 1.0 / 16), 0.0};
  for (Eigen::Index k = 0; k < 3; ++k) {
    const auto& a = atlas.anchors[static_cast<std::size_t>(k)];
    const auto r = project_density(atlas, a.state, *a.density, rho, 1e-6);
    CHECK(r.anchor == k);
    CHECK(r.residual == 0.0);
  }
  EndpointCloud near_right{Eigen::Vector2d(0.9, 0.1), atlas.anchors[2].cloud.endpoints.array() - 0.05, 0.5, 1, 0};
  const auto r = project_density(atlas, near_right, rho, kLattice, 0.2, 1e-6);
  CHECK(r.anchor == 2);
  CHECK(r.residual > 0.0);
  CHECK(r.metric == Metric::Density);
  CHECK(r.parameter[0] == 2.0);
}

TEST_CASE("strong score picks the first maximal residual") {
  const std::vector<ProjectionResult> rs{result(0, 0.1), result(1, 0.7, 3), result(1, 0.7, 4), result(2, 0.2)};
  const auto s = strong_score(rs);
  CHECK(s.score == 0.7);
  CHECK(s.argmax == 1);
  CHECK(s.start[0] == 3);
}

TEST_CASE("weak score: level-set means, never above the strong score") {
  CounterStream s(21, StreamTag::Test);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ProjectionResult> rs;
    std::vector<double> w;
    for (int i = 0; i < 40; ++i) {
      rs.push_back(result(static_cast<Eigen::Index>(s.next_uniform() * 5), s.next_uniform() * 3));
      w.push_back(s.next_uniform() < 0.1 ? 0.0 : s.next_uniform());
    }
    const auto rep = weak_score(rs, w);
    REQUIRE(rep.weak_score <= rep.strong.score);
    long total = 0;
    for (const auto& ls : rep.per_anchor) {
      REQUIRE(ls.weak <= ls.max_residual);
      total += ls.count;
    }
    // Every start belongs to exactly one level set (possibly an excluded one).
    long excluded = 0;
    for (std::size_t i = 0; i < rs.size(); ++i)
      if (!rep.level_set_of(i)) ++excluded;
    REQUIRE(total + excluded == 40);
  }
}

TEST_CASE("weak score: constant residual and dominated weights") {
  std::vector<ProjectionResult> rs{result(0, 0.3), result(0, 0.3), result(1, 0.3)};
  auto rep = weak_score(rs, std::vector<double>{1, 2, 3});
  CHECK(rep.weak_score == doctest::Approx(0.3));
  CHECK(rep.strong.score == doctest::Approx(0.3));

  // A huge residual on a start of negligible weight barely moves its level set,
  // while the strong score sees it fully.
  rs = {result(0, 0.1), result(0, 0.1), result(0, 50.0), result(1, 0.2)};
  rep = weak_score(rs, std::vector<double>{1, 1, 1e-9, 1});
  CHECK(rep.strong.score == 50.0);
  CHECK(rep.weak_score == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(rep.weak_argmax == 1);

  // Zero-weight level sets are excluded.
  rep = weak_score({result(0, 1.0), result(3, 9.0)}, std::vector<double>{1, 0});
  CHECK(rep.excluded_anchors == std::vector<Eigen::Index>{3});
  CHECK(rep.weak_score == 1.0);
  CHECK(rep.level_set_of(1) == nullptr);
  CHECK(rep.level_set_of(0)->anchor == 0);

  CHECK_THROWS_AS(weak_score({result(0, 1.0)}, std::vector<double>{-1}), std::invalid_argument);
  CHECK_THROWS_AS(weak_score({result(0, 1.0)}, std::vector<double>{1, 1}), std::invalid_argument);
}

TEST_CASE("adding anchors never increases a start's residual") {
  const auto small = synthetic_atlas({{-1, 0}, {1, 0}});
  const auto large = synthetic_atlas({{-1, 0}, {0, 1}, {1, 0}, {1.5, -1}});
  CounterStream s(8, StreamTag::Test);
  for (int i = 0; i < 500; ++i) {
    const auto p = point(4 * s.next_uniform() - 2, 4 * s.next_uniform() - 2);
    REQUIRE(project_embedded(large, p).residual <= project_embedded(small, p).residual);
  }
}

TEST_CASE("start on the saddle projects to a central anchor") {
  const BananaPotential<double> v;
  SimulationConfig c;
  const auto atlas = mep_manifold(v, c, 41, 1000);
  const auto cloud = sample_endpoint_cloud(v, c, BananaPotential<double>::State(0, 1), 1000, 0, StreamTag::Test);
  const auto r = project_embedded(atlas, mean_embedding(cloud));
  CHECK(std::abs(r.parameter[0]) <= 0.2);
}

TEST_CASE("single result and zero residuals") {
  CHECK(strong_score(std::vector<ProjectionResult>{result(2, 0.42)}).score == 0.42);
  const auto rep = weak_score({result(0, 0.0), result(1, 0.0)}, std::vector<double>{1, 1});
  CHECK(rep.strong.score == 0.0);
  CHECK(rep.weak_score == 0.0);
}
