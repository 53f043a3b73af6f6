// Command-line driver for the latent force model experiments.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lfm/config.hpp"
#include "lfm/errors.hpp"
#include "lfm/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<double> snapshot_times;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "INI configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "noise seed (overrides the config file)");
  sub->add_option("--out", f.out, "output directory (overrides the config file)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent force model control experiments"};
  app.require_subcommand(1);
  Flags flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"spring-open-loop", "fit and smooth the forced spring, extrapolating past the data"},
      {"spring-control", "compare basic and latent-force-aware LQR on the spring"},
      {"heat-control", "compare both controllers on the heat equation"},
      {"kernel-check", "tabulate state-space versus exact covariance"},
      {"certify", "observability, controllability and sampling report"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    if (name == "heat-control") {
      sub->add_option("--snapshot-times", flags.snapshot_times, "field snapshot times, comma separated")
          ->delimiter(',');
    }
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const auto kind = lfm::app::parse_experiment(app.get_subcommands().front()->get_name());
    auto cfg = flags.config.empty() ? lfm::app::default_config(kind) : lfm::app::load_config(flags.config, kind);
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (!flags.snapshot_times.empty()) cfg.heat.snapshot_times = flags.snapshot_times;
    cfg.validate();
    for (const auto& f : lfm::app::run_experiment(cfg)) std::cout << f.string() << '\n';
    return 0;
  } catch (const lfm::Error& e) {
    std::cerr << "lfmctl: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lfmctl: unexpected failure: " << e.what() << '\n';
    return 3;
  }
}
