#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "contagion/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Default contagion on random financial networks: simulation, limit laws, risk and intervention"};
  std::string config_path, output_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto add_common = [&](CLI::App* a) {
    a->add_option("-c,--config", config_path, "Key-value run configuration")->check(CLI::ExistingFile);
    a->add_option("-o,--output-dir", output_dir, "Output directory (overrides config and CONTAGION_OUTPUT_DIR)");
    a->add_option("--seed", seed, "Master seed (overrides config)");
    a->add_option("--threads", threads, "Worker threads, 0 = all cores (overrides config and CONTAGION_THREADS)");
  };
  add_common(&app);
  const std::map<std::string, std::string> help{
      {"validate", "Check a network spec (and optional risk spec) and echo it normalized"},
      {"generate", "Sample a population and wire a configuration-model network"},
      {"cascade", "Run the round-based cascade and the death process on one network"},
      {"limits", "Limit functions on a z-grid and the fixed point z*"},
      {"clt", "Process covariances on a y-grid and final-state Gaussian laws"},
      {"risk", "Systemic-risk aggregate limit and variance"},
      {"intervene", "Budget-constrained intervention plan"},
      {"simulate", "Monte Carlo ensemble compared against the limit laws"}};
  for (const auto& s : contagion::subcommands()) add_common(app.add_subcommand(s, help.at(s)));
  app.require_subcommand(0, 1);
  app.footer("The config file holds one 'key = value' per line; see README.md for the keys.\n"
             "Exit codes: 0 ok, 1 config, 2 model, 3 numeric, 4 I/O.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return 1;
  }
  contagion::RunConfig cfg;
  try {
    cfg = contagion::parse_config(config_path);
    contagion::apply_environment(cfg);
  } catch (const contagion::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  }
  const auto subs = app.get_subcommands();
  if (!subs.empty()) cfg.subcommand = subs.front()->get_name();
  for (auto* opt : {"--output-dir", "--seed", "--threads"}) {
    bool given = app.count(opt) > 0;
    for (auto* s : subs) given = given || s->count(opt) > 0;
    if (!given) continue;
    if (std::string(opt) == "--output-dir") cfg.output_dir = output_dir;
    if (std::string(opt) == "--seed") cfg.seed = seed;
    if (std::string(opt) == "--threads") cfg.threads = threads;
  }
  return contagion::dispatch(cfg);
}
