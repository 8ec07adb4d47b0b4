// Acceptance run: full benchmark at the default configuration, one line per
// criterion. Exit status is 0 when the failing criteria are exactly the ones
// listed with --expected-failures (criteria known to be unreachable with the
// benchmark as specified); any other outcome, including an expected failure
// that starts passing, exits 1.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "wtm/errors.hpp"
#include "wtm/io.hpp"
#include "wtm/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the reaction-coordinate benchmark"};
  std::vector<int> expected;
  app.add_option("--expected-failures", expected, "criterion ids that are known to fail");
  std::map<std::string, std::string> overrides;
  for (const auto& key : wtm::PipelineConfig::keys()) app.add_option("--" + key, overrides[key]);
  CLI11_PARSE(app, argc, argv);

  const auto started = std::chrono::steady_clock::now();
  auto log = [started](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::fprintf(stderr, "[acceptance %7.1fs] %s\n", s, msg.c_str());
  };

  try {
    wtm::PipelineConfig config;
    for (const auto& key : wtm::PipelineConfig::keys())
      if (app.count("--" + key)) config.set(key, overrides[key]);
    config.validate();

    wtm::Pipeline pipeline(config, log);
    log("determinism: repeated reduced run");
    const auto det = wtm::determinism_check(wtm::reduced_config(config));
    const auto criteria = pipeline.acceptance(det);
    wtm::io::atomic_write(config.output_dir / "acceptance.json", pipeline.acceptance_json(criteria).dump(2) + "\n");

    std::set<int> failed;
    for (const auto& c : criteria) {
      std::printf("[%s] %d %s: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.detail.c_str());
      if (!c.pass) failed.insert(c.id);
    }
    const std::set<int> want(expected.begin(), expected.end());
    if (failed == want) {
      if (!want.empty()) std::printf("failing criteria match the documented expected failures\n");
      return 0;
    }
    std::printf("unexpected outcome: failing criteria differ from --expected-failures\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }
}
