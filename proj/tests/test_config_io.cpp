#include <doctest.h>

#include <filesystem>
#include <string>

#include "wtm/config.hpp"
#include "wtm/errors.hpp"
#include "wtm/io.hpp"

using namespace wtm;
namespace fs = std::filesystem;

namespace {

std::string error_key(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("wtm_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse config text with comments and overrides") {
  const auto c = parse_config("# benchmark\nbeta = 2   # colder\n\n  seed=7\nrho_source = kde\noutput_dir = runs/a\n");
  CHECK(c.beta == 2.0);
  CHECK(c.seed == 7);
  CHECK(c.rho_source == RhoSource::Kde);
  CHECK(c.output_dir == fs::path("runs/a"));
  CHECK(c.tau == 0.5);  // untouched default
  const auto d = parse_config("seed = 9", c);
  CHECK(d.beta == 2.0);
  CHECK(d.seed == 9);
}

TEST_CASE("config errors carry the key and the line") {
  CHECK(error_key([] { parse_config("beta = 1\nbogus = 3"); }) == "bogus");
  try {
    parse_config("# comment\nseed = 4\ngrid = fifty");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "grid");
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(error_key([] { parse_config("just words"); }).empty());
  CHECK(error_key([] { parse_config("rho_source = magic"); }) == "rho_source");
  CHECK_THROWS_AS(load_config("/nonexistent/wtm.cfg"), ConfigError);
}

TEST_CASE("validation names the offending key") {
  const auto invalid = [](const std::string& key, const std::string& value) {
    return error_key([&] {
      PipelineConfig c;
      c.set(key, value);
      c.validate();
    });
  };
  CHECK(invalid("dt", "0") == "dt");
  CHECK(invalid("beta", "-1") == "beta");
  CHECK(invalid("tau", "0.0001") == "tau");
  CHECK(invalid("bandwidth", "0") == "bandwidth");
  CHECK(invalid("n_anchors", "1") == "n_anchors");
  CHECK(invalid("M", "0") == "M");
  CHECK(invalid("n_bins", "1") == "n_bins");
  CHECK(invalid("steps", "10") == "steps");
  CHECK_NOTHROW(PipelineConfig{}.validate());
}

TEST_CASE("every key round-trips through set and entries") {
  PipelineConfig c;
  for (const auto& [key, value] : c.entries()) CHECK_NOTHROW(c.set(key, value));
  CHECK(c.entries() == PipelineConfig{}.entries());
  CHECK(c.entries().size() == PipelineConfig::keys().size());
  const auto j = c.to_json();
  CHECK(j["beta"].get<double>() == 1.0);
  CHECK(j["steps"].get<long>() == 10'000'000);
  CHECK(j["rho_source"].get<std::string>() == "boltzmann");
  CHECK(j["cache"].get<bool>());
}

TEST_CASE("trajectory key depends only on what the trajectory depends on") {
  const PipelineConfig base;
  PipelineConfig other = base;
  other.M = 5;
  other.bandwidth = 0.3;
  CHECK(other.trajectory_key() == base.trajectory_key());
  for (const char* key : {"beta", "dt", "seed", "steps", "burn_in"}) {
    PipelineConfig c = base;
    c.set(key, key == std::string("dt") ? "0.002" : "3");
    CHECK(c.trajectory_key() != base.trajectory_key());
  }
}

TEST_CASE("csv quoting and table shape") {
  CHECK(io::csv_field("plain") == "plain");
  CHECK(io::csv_field("a,b") == "\"a,b\"");
  CHECK(io::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(io::csv_field("two\nlines") == "\"two\nlines\"");
  io::CsvTable t({"x", "label"});
  t.row(std::vector<std::string>{"1", "a,b"});
  CHECK(t.str() == "x,label\r\n1,\"a,b\"\r\n");
  CHECK(t.rows() == 1);
  CHECK_THROWS_AS(t.row(std::vector<double>{1, 2, 3}), std::invalid_argument);
  // Shortest round-trip formatting.
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(std::stod(io::format_number(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("atomic write creates directories and replaces content") {
  const auto dir = scratch("atomic");
  const auto file = dir / "nested" / "out.txt";
  io::atomic_write(file, "first");
  io::atomic_write(file, "second");
  CHECK(io::read_file(file) == "second");
  for (const auto& e : fs::directory_iterator(dir / "nested")) CHECK(e.path().filename() == "out.txt");
  fs::remove_all(dir);
}

TEST_CASE("fnv1a reference values") {
  CHECK(io::fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(io::hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("trajectory cache round-trip and key check") {
  const auto dir = scratch("traj");
  Trajectory t{Eigen::MatrixXd::Random(2, 100), 1e-3};
  io::save_trajectory(dir / "t.bin", t, 42);
  Trajectory back;
  CHECK(io::load_trajectory(dir / "t.bin", 42, back));
  CHECK(back.states == t.states);
  CHECK(back.dt == t.dt);
  Trajectory wrong;
  CHECK_FALSE(io::load_trajectory(dir / "t.bin", 43, wrong));
  CHECK_FALSE(io::load_trajectory(dir / "missing.bin", 42, wrong));
  io::atomic_write(dir / "junk.bin", "WTMTRJ01 but truncated");
  CHECK_FALSE(io::load_trajectory(dir / "junk.bin", 42, wrong));
  fs::remove_all(dir);
}
