#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "fedism/config.hpp"
#include "fedism/verify.hpp"

namespace fedism::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Where settings come from, in increasing precedence: config file, `--set`
/// overrides, FEDISM_SEED, then `--seeds` / `--threads`.
struct SettingsSource {
  std::filesystem::path config_path;  // empty means all defaults
  std::vector<std::string> overrides;
  long long seeds = -1;    // -1: keep
  long long threads = -1;  // -1: keep
};

/// Throws config::ConfigError on any problem with the inputs.
config::RunSettings load_settings(const SettingsSource& source);

void run_command(const config::RunSettings& settings, const std::filesystem::path& out,
                 std::ostream& log);
void ablate_command(const config::RunSettings& settings, const std::filesystem::path& out,
                    std::ostream& log);
/// `param` must be one of method.q, method.beta, method.rho,
/// partition.corrupted_ratio.
void sweep_command(const SettingsSource& source, const std::string& param,
                   const std::vector<std::string>& values, const std::filesystem::path& out,
                   std::ostream& log);
void landscape_command(const config::RunSettings& settings, const std::filesystem::path& out,
                       double extent, std::size_t steps, std::ostream& log);
/// Writes `verify_report.txt` and returns kExitOk iff every check passed.
int verify_command(const verify::Options& options, const std::filesystem::path& out,
                   std::ostream& log);

int main(int argc, char** argv);

}  // namespace fedism::cli
