#include "cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Forward solves and coefficient reconstruction for time-fractional diffusion"};
  app.require_subcommand(1);

  subdiff::cli::Invocation invocation;
  std::string config_file, output_dir;
  const std::pair<const char*, const char*> commands[] = {
      {"forward", "Solve the forward problem and dump the terminal state"},
      {"invert", "Reconstruct the diffusion coefficient from terminal data"},
      {"gradcheck", "Compare the adjoint gradient with central differences"},
      {"bench", "Run a noise-level sweep and fit convergence rates"},
      {"verify", "Decay, positivity and stability diagnostics"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_file, "Config file (INI sections)")->check(CLI::ExistingFile);
    sub->add_option("--set", invocation.overrides, "Override one key: section.key=value");
    sub->add_option("-o,--output-dir", output_dir, "Base directory for run artifacts");
    sub->add_flag("-v,--verbose", invocation.verbose, "Progress on stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : subdiff::cli::exit_config;
  }
  invocation.command = app.get_subcommands().front()->get_name();
  if (!config_file.empty()) invocation.config_file = config_file;
  if (!output_dir.empty()) invocation.output_dir = output_dir;
  return subdiff::cli::run(invocation, std::cout, std::cerr);
}
