#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noisylab/config.hpp"
#include "noisylab/plot.hpp"
#include "noisylab/runner.hpp"
#include "noisylab/trainer.hpp"

namespace {

constexpr const char* kUsage =
    "usage: noisylab <command> [options]\n"
    "\n"
    "commands:\n"
    "  train   train one configuration (see `noisylab train --help`)\n"
    "  sweep   run methods x seeds and aggregate (`--methods`, `--seeds`, `--jobs`)\n"
    "  plot    render history CSVs to an SVG line chart\n"
    "  probe   compare small-loss clean rates ranked on original and flipped images\n";

int plot_command(const std::vector<std::string>& args) {
  CLI::App app{"noisylab plot"};
  std::vector<std::string> inputs;
  std::vector<std::string> columns{"acc_m1"};
  std::string output = "history.svg";
  app.add_option("histories", inputs, "history.csv files")->required();
  app.add_option("--columns", columns, "Columns to draw")->delimiter(',');
  app.add_option("-o,--output", output, "SVG path");
  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? noisylab::kExitOk : noisylab::kExitUsage;
  }
  try {
    noisylab::emit_plot({inputs.begin(), inputs.end()}, output, columns);
  } catch (const std::invalid_argument& e) {
    std::cerr << "noisylab: " << e.what() << '\n';
    return noisylab::kExitUsage;
  }
  return noisylab::kExitOk;
}

int probe_command(const std::vector<std::string>& args) {
  const auto config = noisylab::parse_config(args);
  const auto probe = noisylab::probe_flip_detection(config);
  std::printf("clean_rate_original = %.6f\nclean_rate_flip = %.6f\n", probe.clean_rate_original,
              probe.clean_rate_flip);
  return noisylab::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return noisylab::kExitUsage;
  }
  const std::string command = argv[1];
  const std::vector<std::string> args(argv + 2, argv + argc);
  try {
    if (command == "train") return noisylab::run(noisylab::parse_config(args), std::cerr);
    if (command == "sweep") return noisylab::sweep(noisylab::parse_sweep(args), std::cerr);
    if (command == "plot") return plot_command(args);
    if (command == "probe") return probe_command(args);
    if (command == "-h" || command == "--help" || command == "help") {
      std::cout << kUsage;
      return noisylab::kExitOk;
    }
    std::cerr << "noisylab: unknown command '" << command << "'\n" << kUsage;
    return noisylab::kExitUsage;
  } catch (const noisylab::HelpRequested& e) {
    std::cout << e.what();
    return noisylab::kExitOk;
  } catch (const noisylab::UsageError& e) {
    std::cerr << "noisylab: " << e.what() << '\n';
    return noisylab::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "noisylab: " << e.what() << '\n';
    return noisylab::kExitRuntime;
  }
}
