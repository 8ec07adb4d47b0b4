#include <doctest.h>

#include <filesystem>

#include "wtm/io.hpp"
#include "wtm/pipeline.hpp"

using namespace wtm;
namespace fs = std::filesystem;

namespace {

PipelineConfig small(const std::string& name) {
  PipelineConfig c = reduced_config({});
  c.output_dir = fs::temp_directory_path() / ("wtm_pipeline_" + name);
  fs::remove_all(c.output_dir);
  return c;
}

}  // namespace

TEST_CASE("reduced pipeline: spectrum, atlas and scans are consistent") {
  Pipeline p(small("stages"));
  const auto& spec = p.spectrum();
  CHECK(spec.pairs[0].value == doctest::Approx(1.0).epsilon(1e-10));
  for (std::size_t i = 1; i < spec.pairs.size(); ++i) CHECK(spec.pairs[i].value <= spec.pairs[i - 1].value);
  CHECK(spec.op.row_sum_residual() < 1e-12);
  CHECK(spec.op.detailed_balance_residual() < 1e-12);

  const auto& atlas = p.atlas();
  CHECK(atlas.size() == p.config().n_anchors);
  for (const auto& a : atlas.anchors) CHECK(a.density.has_value());

  const auto& scan = p.uniform_scan();
  CHECK(scan.starts.cols() == p.config().n_starts);
  CHECK(scan.embedded.size() == scan.density.size());
  for (const auto& r : scan.density) CHECK(r.residual >= 0.0);

  const auto& red = p.reducibility();
  CHECK(red.density.weak_score <= red.density.strong.score);
  CHECK(red.embedded.weak_score <= red.embedded.strong.score);
  CHECK(red.probes.size() == 2);

  const auto& rc = p.rc();
  CHECK(rc.spec1[0].value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rc.dev1.max_avg <= rc.dev1.max_sup + 1e-14);
  const auto props = check_pi_properties(rc.weights1, 5, 1);
  CHECK(props.idempotence < 1e-12);
  CHECK(props.self_adjoint < 1e-12);
  CHECK(props.expansion <= 1e-12);

  const auto criteria = p.acceptance();
  CHECK(criteria.size() == 9);
  fs::remove_all(p.config().output_dir);
}

TEST_CASE("reduced pipeline is deterministic") {
  const auto det = determinism_check(small("det"));
  CHECK(det.pass);
  fs::remove_all(small("det").output_dir);
}

TEST_CASE("trajectory cache is reused and matches a fresh run") {
  const auto cfg = small("cache");
  Eigen::MatrixXd first;
  {
    Pipeline p(cfg);
    first = p.trajectory().states;
    CHECK_FALSE(p.trajectory_from_cache());
  }
  Pipeline again(cfg);
  CHECK(again.trajectory().states == first);
  CHECK(again.trajectory_from_cache());
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("commands write their outputs") {
  const auto cfg = small("outputs");
  Pipeline p(cfg);
  p.write_simulate();
  p.write_spectrum();
  p.write_embed();
  p.write_reducibility();
  p.write_rc_compare();
  p.write_oracle();
  for (const char* f : {"trajectory.csv", "spectrum.csv", "eigenfunctions.csv", "spectrum.json", "embedding.csv",
                        "anchors.csv", "clouds.csv", "embedding.json", "residuals_embedded.csv", "residuals_density.csv",
                        "reducibility.json", "density.csv", "rc_xi1.csv", "rc_xi2.csv", "rc_compare.json", "oracle.json"})
    CHECK_MESSAGE(fs::exists(cfg.output_dir / f), f);
  const auto spectrum = json::parse(io::read_file(cfg.output_dir / "spectrum.json"));
  CHECK(spectrum.contains("config"));
  const auto oracle = json::parse(io::read_file(cfg.output_dir / "oracle.json"));
  CHECK(oracle.contains("violations_eigenvalue_bound"));
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("uniform starts cover the domain deterministically") {
  const auto a = uniform_starts(Box::square(-2, 2), 1000, 5);
  const auto b = uniform_starts(Box::square(-2, 2), 1000, 5);
  CHECK(a == b);
  CHECK(a.minCoeff() >= -2.0);
  CHECK(a.maxCoeff() <= 2.0);
  CHECK(a.row(0).mean() == doctest::Approx(0.0).scale(1.0).epsilon(0.1));
}
