#pragma once

#include <optional>
#include <string>

#include "config.hpp"

namespace dmarch::cli {

// Values given on the command line that take precedence over the config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::string> kind;
  std::optional<std::string> samples;
  bool then_hmc = false;
};

// Each command validates its whole config before doing any work, writes its
// outputs under common.out and returns the process exit code.
int cmd_train(Reader& cfg, Common& common, const Overrides& ov);
int cmd_sample(Reader& cfg, Common& common, const Overrides& ov);
int cmd_metrics(Reader& cfg, Common& common, const Overrides& ov);
int cmd_oracle(Reader& cfg, Common& common, const Overrides& ov);
int cmd_coverage(Reader& cfg, Common& common, const Overrides& ov);
int cmd_mape(Reader& cfg, Common& common, const Overrides& ov);
int cmd_sweep(Reader& cfg, Common& common, const Overrides& ov);
int cmd_plot(Reader& cfg, Common& common, const Overrides& ov);
int cmd_verify(Reader& cfg, Common& common, const Overrides& ov);

}  // namespace dmarch::cli
