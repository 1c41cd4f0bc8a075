#include "sdem/harness.hpp"
#include "sdem/parallel.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

nlohmann::json read_config(const std::string& file) {
  if (file.empty()) return nullptr;
  std::ifstream is(file);
  if (!is) throw sdem::Error("cannot open config file " + file);
  return nlohmann::json::parse(is);
}

int run_command(sdem::harness::Command command, const Flags& flags) {
  using namespace sdem::harness;
  ExperimentConfig cfg = load_config(command, read_config(flags.config));
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.paths) cfg.paths = *flags.paths;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.workers) cfg.workers = *flags.workers;
  if (cfg.workers == 0) cfg.workers = 1;

  const CommandResult result = run(cfg);
  write_outputs(result, cfg.out_dir);
  std::cout << result.summary.dump(2) << '\n';
  int failed = 0;
  for (const auto& check : result.checks) {
    if (check.passed) continue;
    std::cerr << "FAILED: " << check.name << " (" << check.detail << ")\n";
    ++failed;
  }
  if (failed) std::cerr << failed << " check(s) failed\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdem: Monte Carlo studies of SDEs with irregular coefficients"};
  app.require_subcommand(1);

  Flags flags;
  std::optional<sdem::harness::Command> chosen;
  for (const auto command : sdem::harness::all_commands()) {
    const std::string name = sdem::harness::command_name(command);
    auto* sub = app.add_subcommand(name, "run the " + name + " study");
    std::string alias = name;
    for (auto& c : alias) c = c == '-' ? '_' : c;
    if (alias != name) sub->alias(alias);
    sub->add_option("--config", flags.config, "JSON config document")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--paths", flags.paths, "Monte Carlo paths");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--workers", flags.workers, "worker threads (default: SDEM_WORKERS or all cores)");
    sub->callback([&chosen, command] { chosen = command; });
  }

  std::string file_a, file_b;
  auto* compare = app.add_subcommand("compare", "compare two emitted files; aborts on fingerprint mismatch");
  compare->add_option("a", file_a)->required()->check(CLI::ExistingFile);
  compare->add_option("b", file_b)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) {
      const auto r = sdem::harness::compare_files(file_a, file_b);
      std::cout << "config_hash " << r.hash_a << '\n' << (r.identical ? "identical" : "different") << '\n';
      return r.identical ? 0 : 1;
    }
    return run_command(*chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
