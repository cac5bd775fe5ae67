// Command-line front end for the oscillator network experiments.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "onn/experiments.hpp"

namespace {

struct CommonArgs {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  unsigned threads = 0;  // 0: hardware concurrency
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

const char* describe(const std::string& cmd) {
  if (cmd == "simulate") return "simulate one network and measure reference/output synchronization";
  if (cmd == "sweep2d") return "synchronization ratio over a grid of two feed currents";
  if (cmd == "noise-sweep") return "step-1 search statistics against noise amplitude";
  if (cmd == "eta-sweep") return "step-1 search statistics against the synchronization threshold";
  if (cmd == "base-sync") return "spread of the output ratio under random grid settings";
  if (cmd == "converge") return "synchronization metrics over growing simulation prefixes";
  if (cmd == "classes") return "list the 102 symmetry classes of 3x3 patterns";
  if (cmd == "train") return "three-step random parameter search";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oscillatory neural network experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ONN_VERSION);

  CommonArgs args;
  std::vector<CLI::App*> subs;
  for (const auto& name : onn::experiments::command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--seed", args.seed, "root random seed")->capture_default_str();
    sub->add_option("--out-dir", args.out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", args.threads, "worker threads (0: all cores)");
    sub->add_option("--config", args.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", args.overrides, "override a key: section.key=value")->take_all();
    sub->add_flag("--quiet", args.quiet, "suppress progress output");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    onn::experiments::RunContext ctx;
    for (auto* sub : subs)
      if (sub->parsed()) ctx.command = sub->get_name();
    std::optional<std::filesystem::path> cfg_file;
    if (!args.config.empty()) cfg_file = args.config;
    ctx.config = onn::experiments::resolve_config(ctx.command, cfg_file, args.overrides);
    ctx.seed = args.seed;
    ctx.out_dir = args.out_dir;
    ctx.threads = args.threads ? args.threads : std::max(1u, std::thread::hardware_concurrency());
    ctx.log = args.quiet ? nullptr : &std::cerr;
    onn::experiments::run_command(ctx);
  } catch (const std::exception& e) {
    std::cerr << "onn " << (argc > 1 ? argv[1] : "") << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
