#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "commands.hpp"

namespace dmarch::cli {

namespace {

using Handler = int (*)(Reader&, Common&, const Overrides&);

struct Command {
  const char* name;
  const char* help;
  Handler handler;
};

const Command kCommands[] = {
    {"train", "train a distance field", cmd_train},
    {"sample", "draw samples from a trained field", cmd_sample},
    {"oracle", "closed-form minimizers and oracle trajectories", cmd_oracle},
    {"metrics", "W2, Hausdorff and Chamfer between two clouds", cmd_metrics},
    {"coverage", "nearest-target coverage and hubness by t", cmd_coverage},
    {"mape", "distance estimation error of a trained field", cmd_mape},
    {"verify", "invariant and oracle self-checks", cmd_verify},
    {"sweep", "step-size robustness grid on the 8D mixture", cmd_sweep},
    {"plot", "level sets, samples and trajectories as SVG", cmd_plot},
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  if (!j.contains("schema_version")) throw ConfigError(path + ": schema_version: required");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError(path + ": schema_version: expected " + std::to_string(kSchemaVersion));
  }
  return j;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"dmarch: distance marching experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out, model, kind, samples;
  int threads = 0;
  bool deterministic_svg = false, then_hmc = false;

  std::map<std::string, CLI::App*> subs;
  for (const auto& c : kCommands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--deterministic-svg", deterministic_svg, "omit the SVG timestamp comment");
    const std::string name = c.name;
    if (name == "sample" || name == "mape" || name == "plot") sub->add_option("--model", model, "model checkpoint");
    if (name == "sample") {
      sub->add_option("--kind", kind, "sampler kind");
      sub->add_flag("--then-hmc", then_hmc, "follow the sphere-tracing jump with HMC");
    }
    if (name == "metrics" || name == "plot") sub->add_option("--samples", samples, "samples CSV");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  const Command* cmd = nullptr;
  for (const auto& c : kCommands)
    if (subs[c.name]->parsed()) cmd = &c;
  CLI::App* sub = subs[cmd->name];

  Overrides ov;
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--out")) ov.out = out;
  if (sub->get_option_no_throw("--model") && sub->count("--model")) ov.model = model;
  if (sub->get_option_no_throw("--kind") && sub->count("--kind")) ov.kind = kind;
  if (sub->get_option_no_throw("--samples") && sub->count("--samples")) ov.samples = samples;
  ov.then_hmc = then_hmc;

  Common common;
  common.threads = threads;
  common.deterministic_svg = deterministic_svg;
  const std::string who = std::string("dmarch ") + cmd->name;
  try {
    set_num_threads(threads);
    const json j = config_path.empty() ? json::object() : load_config(config_path);
    Reader r(j, "");
    return cmd->handler(r, common, ov);
  } catch (const NumericError& e) {
    std::cerr << who << ": numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << who << ": error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << who << ": error: " << e.what() << "\n";
    return 2;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dmarch"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace dmarch::cli
