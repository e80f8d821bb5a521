#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nlgpe {

/// Exit statuses of the command runner.
enum ExitCode : int { exit_ok = 0, exit_failed_check = 1, exit_config = 2, exit_numerical = 3, exit_io = 4 };

struct CliOptions {
  std::string command;
  std::filesystem::path config;  ///< empty only for selftest
  std::filesystem::path out = "out";
  std::size_t threads = 1;
  std::optional<double> tol;  ///< overrides solver.tol_lambda
  std::optional<std::uint64_t> seed;
};

const std::vector<std::string>& cli_commands();

/// Runs one command and writes summary.json, run_record.json and the CSV
/// artifacts into options.out. Errors are mapped to exit codes; on a numerical
/// failure diagnostics.json is written instead of summary.json.
int run_command(const CliOptions& options, std::string* message = nullptr);

}  // namespace nlgpe
