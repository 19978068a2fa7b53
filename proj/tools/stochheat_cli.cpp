// stochheat: convergence studies, sample paths and self-test for the
// stochastic heat equation lab.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#include "stochheat.hpp"
#include "stochheat/verification/acceptance.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace stochheat;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> samples;
};

KeyValues collect(const CommonOptions &o) {
  KeyValues kv;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in)
      throw ConfigError("cannot read config file '" + o.config + "'");
    kv = parse_key_values(in, o.config);
  }
  for (const auto &s : o.sets)
    kv.push_back(parse_override(s));
  if (o.seed)
    kv.emplace_back("seed", std::to_string(*o.seed));
  if (o.out)
    kv.emplace_back("out", *o.out);
  if (o.samples)
    kv.emplace_back("samples", std::to_string(*o.samples));
  return kv;
}

/// Opens the destination before any work so that bad paths fail fast.
class Output {
public:
  explicit Output(const std::string &path) : path_(path) {
    if (path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_)
        throw ConfigError("cannot write output '" + path + "'");
    }
  }
  std::ostream &stream() { return path_ == "-" ? std::cout : file_; }
  void finish() {
    stream().flush();
    if (!stream())
      throw ConfigError("failed writing output '" + path_ + "'");
  }

private:
  std::string path_;
  std::ofstream file_;
};

void add_common(CLI::App *cmd, CommonOptions &o, bool samples) {
  cmd->add_option("--config", o.config, "Configuration file (key = value lines)");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out", o.out, "Output path, - for stdout");
  if (samples)
    cmd->add_option("--samples", o.samples, "Monte Carlo samples per level (0 disables)");
  cmd->add_option("--set", o.sets, "Override key=value (repeatable)")->take_all();
}

int run_study_command(const CommonOptions &o) {
  const StudyConfig config = build_study_config(collect(o));
  Output out(config.out);
  const ErrorReport report = run_study(config, &std::cerr);
  write_csv(out.stream(), report);
  out.finish();
  return exit_ok;
}

int run_sample_path_command(const CommonOptions &o) {
  const SamplePathConfig config = build_sample_path_config(collect(o));
  Output out(config.out);
  const NoiseGrid grid = sample_path_noise(config);
  if (std::abs(grid.horizon() - config.horizon) > 1e-14 * config.horizon)
    throw ConfigError("noise grid horizon does not match the configured horizon");
  if (!config.noise_out.empty()) {
    std::ofstream dump(config.noise_out, std::ios::binary | std::ios::trunc);
    if (!dump)
      throw ConfigError("cannot write noise grid '" + config.noise_out + "'");
    write_binary(dump, grid);
  }
  const FemSystem sys = assemble(Mesh(config.intervals));
  write_sample_path(out.stream(), cn_fem_spde(grid, sys, config.steps));
  out.finish();
  return exit_ok;
}

int run_selftest_command() {
  const bool ok = verification::run_criteria(verification::selftest_criteria(), std::cout);
  return ok ? exit_ok : exit_numerical;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Numerics lab for the 1D stochastic heat equation"};
  app.require_subcommand(1);

  CommonOptions study_opts, path_opts;
  auto *study = app.add_subcommand("study", "Run a convergence study and write CSV");
  add_common(study, study_opts, true);
  auto *path = app.add_subcommand("sample-path", "Write one fully discrete trajectory as CSV");
  add_common(path, path_opts, false);
  auto *selftest = app.add_subcommand("selftest", "Run the oracle-equivalence and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (study->parsed())
      return run_study_command(study_opts);
    if (path->parsed())
      return run_sample_path_command(path_opts);
    if (selftest->parsed())
      return run_selftest_command();
  } catch (const NumericalFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::logic_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::range_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
  return exit_usage;
}
