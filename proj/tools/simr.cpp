#include <iostream>

#include "CLI11.hpp"
#include "simr/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kolmogorov-flow super-resolution pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  simr::RunOptions opts;
  std::string model;
  std::string out;
  std::uint64_t seed = 0;

  for (const auto& name : simr::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--model", model, "simrno, fno or bicubic")->check(CLI::IsMember({"simrno", "fno", "bicubic"}));
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "master seed");
    sub->add_flag("-v,--verbose", opts.verbose, "progress on stderr");
  }
  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  if (sub->count("--model") > 0) opts.model = model;
  if (sub->count("--out") > 0) opts.out = out;
  if (sub->count("--seed") > 0) opts.seed = seed;

  try {
    const auto cfg = simr::resolve(simr::parse_config(config_path), opts);
    return simr::run(sub->get_name(), cfg, opts);
  } catch (const simr::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return 3;
  } catch (const simr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
