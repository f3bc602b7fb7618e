// Command-line front end: qcbound <command> --config <path> [options]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qcbound/error.hpp"
#include "qcbound/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Certified Poincare constants and Neumann eigenvalue bounds"};
  app.require_subcommand(1);
  // --h is the mesh size, so help is long-form only
  app.set_help_flag("--help", "print help");

  std::string config_path;
  std::optional<double> p;
  std::optional<int> depth;
  double h = 0.05;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string out_path;

  const char* commands[][2] = {
      {"bound-cells", "bound for a convex cell, an overlapping pair, a Whitney triple or a chain"},
      {"bound-snowflake", "fractal tree bound and level series for the snowflake tree"},
      {"bound-star", "bounds for the star-shaped domain built from two overlapping pieces"},
      {"transfer", "transfer a bound through a quasiconformal map"},
      {"verify", "check certificates against the finite-element oracle"},
      {"report", "run a list of commands and emit one combined report"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->set_help_flag("--help", "print help");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--p", p, "exponent p > 1 (overrides the config)");
    sub->add_option("--depth", depth, "tree depth (overrides the config)");
    sub->add_option("--h", h, "oracle mesh size")->capture_default_str();
    sub->add_option("--seed", seed, "seed for all randomized steps")->capture_default_str();
    sub->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    sub->add_option("--out", out_path, "output path (default: standard output)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    qcb::RunConfig cfg = qcb::load_run_config(qcb::parse_command(sub->get_name()), config_path);
    cfg.p = p;
    cfg.depth = depth;
    cfg.h = h;
    cfg.seed = seed;
    cfg.format = qcb::parse_format(format);
    cfg.out_path = out_path;
    const qcb::RunOutcome outcome = qcb::run(cfg);
    if (outcome.exit_code == 1) {
      std::cerr << "error: " << outcome.error << "\n";
      return 1;
    }
    qcb::write_output(qcb::emit_table(outcome.reports, cfg.format), cfg.out_path);
    if (outcome.exit_code == 2) std::cerr << "domination check FAILED\n";
    return outcome.exit_code;
  } catch (const qcb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
