#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dmarch/data.hpp"
#include "dmarch/field.hpp"
#include "dmarch/losses.hpp"

namespace dmarch {

enum class OptimizerKind { adam, sgd };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  Index epochs = 500;
  Index batch_size = 512;
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Decoupled (AdamW-style) weight decay.
  double weight_decay = 0.0;
  double grad_clip = 10.0;  // global norm; 0 disables
  LossConfig loss;
  CouplingStrategy coupling;
  TimeDistribution t_dist;
  GmmSpec source;  // empty: standard normal
  std::uint64_t seed = 0;
  Index checkpoint_every = 0;  // 0 disables

  void validate() const;
  Index steps_per_epoch(Index target_size) const;
};

// Adam with bias-corrected moments.
class Adam {
 public:
  Adam(Index n, double lr, double beta1, double beta2, double eps, double weight_decay);
  void step(Vec& params, const Vec& grad);
  Index t() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, wd_;
  Vec m_, v_;
  Index t_ = 0;
};

struct TrainLogRow {
  Index step = 0;
  double osl = 0.0;
  double del = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  FieldModel model;
  std::vector<TrainLogRow> log;
  bool aborted = false;
  std::string abort_reason;
};

using CheckpointHook = std::function<void(Index step, const FieldModel& model)>;

// epochs x steps_per_epoch steps of sample_pairs -> combined loss ->
// loss_gradients -> clipped optimizer update. Batch seeds derive from
// cfg.seed and the step index. A non-finite loss or gradient stops training
// and returns the last finite parameters with aborted set.
TrainResult train(const FieldModel& init, const PointCloud& target, const TrainConfig& cfg,
                  const CheckpointHook& on_checkpoint = {});

}  // namespace dmarch
