#pragma once

#include "sdem/mollify.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sdem::harness {

enum class Command { converge_flow, converge_derivative, gradient, kernel_bound, condition_g, ibp, moment };

std::optional<Command> parse_command(std::string_view name);  // accepts "converge-flow" and "converge_flow"
std::string command_name(Command c);                          // hyphenated form
std::vector<Command> all_commands();

/// One experiment. Every field except out_dir and workers enters the
/// fingerprint, so re-running an identical config with any worker count
/// produces byte-identical outputs.
struct ExperimentConfig {
  Command command = Command::converge_flow;
  nlohmann::json field;
  std::vector<double> eps;
  double T = 0.25;
  std::size_t steps = 250;
  std::size_t paths = 10000;
  std::uint64_t seed = 20240601;
  std::vector<double> x0;
  QuadratureSpec quad;
  nlohmann::json options = nlohmann::json::object();  // subcommand-specific
  std::string out_dir = "sdem_out";
  std::size_t workers = 1;

  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::uint64_t fingerprint() const;
};

/// Defaults for a subcommand (sized for a single-core desk run).
ExperimentConfig default_config(Command c);

/// Command defaults overlaid with a config document. Known top-level keys:
/// field, eps, T, steps, paths, seed, x0, quad, out, workers; everything
/// else lands in options (and `options` itself is merged as well).
ExperimentConfig load_config(Command c, const nlohmann::json& doc);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CommandResult {
  std::vector<std::pair<std::string, std::string>> files;  // file name -> contents
  std::vector<Check> checks;
  nlohmann::json summary;

  [[nodiscard]] bool ok() const;
  [[nodiscard]] const std::string& file(const std::string& name) const;
};

CommandResult run(const ExperimentConfig& config);

void write_outputs(const CommandResult& result, const std::filesystem::path& dir);

/// Config fingerprint embedded in an emitted file (JSON "config_hash", CSV
/// column config_hash, gnuplot "# config_hash=" header, or SDEM dump header).
std::string extract_fingerprint(const std::string& contents);

struct CompareResult {
  std::string hash_a;
  std::string hash_b;
  bool identical = false;
};

/// Compares two emitted files; throws sdem::Error when their fingerprints differ.
CompareResult compare_files(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace sdem::harness
