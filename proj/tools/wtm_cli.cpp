// Command-line driver for the benchmark pipeline.
//
//   wtm <simulate|spectrum|embed|reducibility|rc-compare|oracle|full>
//       [--config FILE] [--<key> VALUE ...]
//
// Exit codes: 0 ok, 1 acceptance criterion failed (full), 2 usage or
// configuration error, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "wtm/errors.hpp"
#include "wtm/io.hpp"
#include "wtm/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCriterionFailed = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

int run_command(const std::string& command, wtm::Pipeline& p) {
  const auto& out = p.config().output_dir;
  if (command == "simulate") {
    p.write_simulate();
  } else if (command == "spectrum") {
    p.write_spectrum();
  } else if (command == "embed") {
    p.write_embed();
  } else if (command == "reducibility") {
    p.write_reducibility();
  } else if (command == "rc-compare") {
    p.write_rc_compare();
  } else if (command == "oracle") {
    p.write_oracle();
    return p.oracle_sweep().violations() == 0 ? kOk : kCriterionFailed;
  } else if (command == "full") {
    p.write_simulate();
    p.write_spectrum();
    p.write_embed();
    p.write_reducibility();
    p.write_rc_compare();
    p.write_oracle();
    std::cerr << "[wtm] determinism: repeated reduced run\n";
    const auto det = wtm::determinism_check(wtm::reduced_config(p.config()));
    const auto criteria = p.acceptance(det);
    wtm::io::atomic_write(out / "acceptance.json", p.acceptance_json(criteria).dump(2) + "\n");
    bool all = true;
    for (const auto& c : criteria) {
      std::printf("[%s] %d %s: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.detail.c_str());
      all = all && c.pass;
    }
    return all ? kOk : kCriterionFailed;
  }
  std::cerr << "[wtm] outputs written to " << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak transition manifolds: reaction-coordinate benchmark pipeline"};
  app.require_subcommand(1);

  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);

  // Every configuration key doubles as a --key override; overrides win over the file.
  std::map<std::string, std::string> overrides;
  for (const auto& key : wtm::PipelineConfig::keys())
    app.add_option("--" + key, overrides[key], "override '" + key + "'");

  std::string command;
  for (const char* name : {"simulate", "spectrum", "embed", "reducibility", "rc-compare", "oracle", "full"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  auto log = [started](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::fprintf(stderr, "[wtm %7.1fs] %s\n", s, msg.c_str());
  };

  try {
    wtm::PipelineConfig config;
    if (!config_file.empty()) config = wtm::load_config(config_file);
    for (const auto& key : wtm::PipelineConfig::keys())
      if (app.count("--" + key)) config.set(key, overrides[key]);
    wtm::Pipeline pipeline(config, log);
    return run_command(command, pipeline);
  } catch (const wtm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const wtm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
}
