#include <cmath>
#include <string>

#include "dmarch/trainer.hpp"

namespace dmarch {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.betas[0] must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.betas[1] must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  loss.validate();
  t_dist.validate();
  if (!source.components.empty()) source.validate();
}

Index TrainConfig::steps_per_epoch(Index target_size) const { return std::max<Index>(1, target_size / batch_size); }

Adam::Adam(Index n, double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

void Adam::step(Vec& params, const Vec& grad) {
  if (grad.size() != params.size() || params.size() != m_.size()) throw ShapeError("adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Index i = 0; i < params.size(); ++i) {
    m_(i) = beta1_ * m_(i) + (1.0 - beta1_) * grad(i);
    v_(i) = beta2_ * v_(i) + (1.0 - beta2_) * grad(i) * grad(i);
    const double mh = m_(i) / c1;
    const double vh = v_(i) / c2;
    params(i) -= lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * params(i));
  }
}

TrainResult train(const FieldModel& init, const PointCloud& target, const TrainConfig& cfg,
                  const CheckpointHook& on_checkpoint) {
  cfg.validate();
  target.validate();
  if (target.dim() != init.dim()) throw ShapeError("train: target dimension does not match the field");
  const Index per_epoch = cfg.steps_per_epoch(target.size());
  const Index total_steps = cfg.epochs * per_epoch;
  const GmmSpec* source = cfg.source.components.empty() ? nullptr : &cfg.source;

  TrainResult res{init, {}, false, {}};
  Vec params = init.params();
  Adam adam(params.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
  for (Index step = 0; step < total_steps; ++step) {
    const std::uint64_t batch_seed = make_stream(cfg.seed, static_cast<std::uint64_t>(step) + 1)();
    const PairBatch pairs = sample_pairs(target, cfg.batch_size, cfg.t_dist, cfg.coupling, batch_seed, source);
    const CombinedLoss loss(pairs, cfg.loss);
    LossGradients g;
    try {
      g = loss_gradients(res.model, pairs.x, loss);
    } catch (const NumericError& e) {
      res.aborted = true;
      res.abort_reason = "step " + std::to_string(step) + ": " + e.what();
      return res;
    }
    const double gnorm = g.grad.norm();
    if (!std::isfinite(g.value) || !std::isfinite(gnorm)) {
      res.aborted = true;
      res.abort_reason = "step " + std::to_string(step) + ": non-finite loss";
      return res;
    }
    res.log.push_back({step, loss.osl_value(), loss.del_value(), g.value, gnorm});
    if (cfg.grad_clip > 0.0 && gnorm > cfg.grad_clip) g.grad *= cfg.grad_clip / gnorm;
    if (cfg.optimizer == OptimizerKind::adam) {
      adam.step(params, g.grad);
    } else {
      params -= cfg.lr * (g.grad + cfg.weight_decay * params);
    }
    if (!params.allFinite()) {
      res.aborted = true;
      res.abort_reason = "step " + std::to_string(step) + ": non-finite parameters after update";
      return res;
    }
    res.model = res.model.with_params(params);
    if (on_checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(step + 1, res.model);
    }
  }
  return res;
}

}  // namespace dmarch
