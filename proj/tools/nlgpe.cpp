#include "nlgpe/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generalized principal eigenvalues of time-periodic nonlocal dispersal systems"};
  nlgpe::CliOptions opt;
  std::string config, out = "out";
  double tol = 0.0;
  std::uint64_t seed = 0;
  app.add_option("command", opt.command, "theta | spectral-bound | gpe | periodic-solve | classify | simulate | logistic | wnv | selftest")
      ->required()
      ->check(CLI::IsMember(nlgpe::cli_commands()));
  app.add_option("--config", config, "run config (JSON)");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--threads", opt.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto* tol_opt = app.add_option("--tol", tol, "override solver.tol_lambda");
  auto* seed_opt = app.add_option("--seed", seed, "override solver.seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : nlgpe::exit_config;
  }
  opt.config = config;
  opt.out = out;
  if (*tol_opt) opt.tol = tol;
  if (*seed_opt) opt.seed = seed;
  std::string msg;
  const int code = nlgpe::run_command(opt, &msg);
  (code == 0 ? std::cout : std::cerr) << msg << '\n';
  return code;
}
