// emm: command line front end for the experiment runner.
//
//   emm <validate|simulate|decay|contraction|control|bvs> [config] [options]
//
// Exit codes: 0 all checks passed, 1 tolerance failure (failure.json written),
// 2 config or command line error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "emm/error.hpp"
#include "emm/experiment.hpp"

namespace {

emm::ExperimentConfig read_config(const std::string &path,
                                  const std::vector<std::string> &overrides) {
  emm::ConfigDoc doc;
  std::filesystem::path base;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in)
      throw emm::ParseError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    doc = emm::ConfigDoc::parse(ss.str());
    base = std::filesystem::path(path).parent_path();
  }
  for (const std::string &o : overrides) {
    const auto eq = o.find('=');
    const auto dot = eq == std::string::npos ? eq : o.rfind('.', eq);
    if (eq == std::string::npos || dot == std::string::npos || dot == 0)
      throw emm::ParseError("--set expects section.key=value, got '" + o + "'");
    doc.set(o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  return emm::experiment_from_doc(doc, base);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Extended Maxwell viscoelasticity: simulation and boundary control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  long long seed = -1;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "material, mesh and operator invariant checks"},
      {"simulate", "evolve the reduced system and write the energy CSV"},
      {"decay", "fit exponential decay of E and E_bar"},
      {"contraction", "estimate ||F(T)|| over a sweep of horizons"},
      {"control", "synthesize and verify a boundary control"},
      {"bvs", "relaxation-kernel backends and partial velocity control"},
  };
  for (const auto &[name, help] : commands) {
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "experiment config file");
    sub->add_option("-o,--out", out_dir, "output directory (overrides run.output)");
    sub->add_option("-s,--set", overrides,
                    "override a config value, section.key=value (repeatable)");
    sub->add_option("--seed", seed, "seed for random probes and fields")
        ->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    emm::ExperimentConfig cfg = read_config(config_path, overrides);
    if (!out_dir.empty())
      cfg.output = out_dir;
    if (seed >= 0)
      cfg.seed = static_cast<std::uint64_t>(seed);
    const int code = emm::run_experiment(command, cfg, std::cout);
    std::cout << command << (code == 0 ? ": PASS" : ": FAIL") << '\n';
    return code;
  } catch (const emm::ValidationError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
