#pragma once

#include <cmath>
#include <random>

#include "dmarch/field.hpp"

namespace dmarch::test {

inline FieldConfig small_config(FieldMode mode = FieldMode::gradient, Activation act = Activation::swish,
                                std::uint64_t seed = 1, Index dim = 2) {
  FieldConfig cfg;
  cfg.input_dim = dim;
  cfg.hidden_widths = {7, 5};
  cfg.activation = act;
  cfg.mode = mode;
  cfg.seed = seed;
  return cfg;
}

// Model with nonzero biases so every parameter block is exercised.
inline FieldModel random_model(const FieldConfig& cfg) {
  FieldModel base = init_field(cfg);
  std::mt19937_64 rng(cfg.seed * 7919 + 3);
  std::normal_distribution<double> n(0.0, 0.3);
  Vec p = base.params();
  for (Index i = 0; i < p.size(); ++i) p(i) += n(rng);
  return FieldModel(cfg, p);
}

inline Mat random_points(Index dim, Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Mat x(dim, n);
  for (Index j = 0; j < n; ++j)
    for (Index d = 0; d < dim; ++d) x(d, j) = g(rng);
  return x;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

// Field with prescribed constant outputs.
class ConstantField final : public Field {
 public:
  ConstantField(double u, Vec v) : u_(u), v_(std::move(v)) {}
  Index dim() const override { return v_.size(); }
  BatchOutput eval_batch(const Mat& x) const override {
    BatchOutput o{Vec::Constant(x.cols(), u_), Mat(v_.size(), x.cols())};
    for (Index j = 0; j < x.cols(); ++j) o.v.col(j) = v_;
    return o;
  }

 private:
  double u_;
  Vec v_;
};

// u = |x|^2 / 2, v = x.
class QuadraticField final : public Field {
 public:
  explicit QuadraticField(Index d) : d_(d) {}
  Index dim() const override { return d_; }
  BatchOutput eval_batch(const Mat& x) const override {
    return {0.5 * x.colwise().squaredNorm().transpose(), x};
  }

 private:
  Index d_;
};

}  // namespace dmarch::test
