#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dmarch/common.hpp"

namespace dmarch {

namespace detail {
struct NetView;
}

enum class Activation { swish, selu, tanh };
enum class FieldMode { gradient, direct };

std::string_view to_string(Activation a);
std::string_view to_string(FieldMode m);
Activation parse_activation(std::string_view s);
FieldMode parse_field_mode(std::string_view s);

// Value, first and second derivative of an activation at a point.
struct ActivationValue {
  double f;
  double df;
  double d2f;
};

ActivationValue activate(Activation a, double x);

struct FieldConfig {
  Index input_dim = 2;
  std::vector<Index> hidden_widths{128, 128, 128};
  Activation activation = Activation::swish;
  FieldMode mode = FieldMode::gradient;
  std::uint64_t seed = 0;
  // Multiplies the direction head. Direct mode only: in gradient mode v is
  // always the exact input-gradient of u.
  double output_scale = 1.0;

  void validate() const;
};

Index param_count(const FieldConfig& config);

struct FieldOutput {
  double u = 0.0;
  Vec v;
};

// Batched outputs; v holds one direction per column.
struct BatchOutput {
  Vec u;
  Mat v;
};

// Anything that maps points to (u, v). Implemented by the neural field and by
// the analytic fields used as test oracles.
class Field {
 public:
  virtual ~Field() = default;
  virtual Index dim() const = 0;
  virtual BatchOutput eval_batch(const Mat& x) const = 0;
  // False when v is not known to be the gradient of u (direct-mode heads).
  virtual bool conservative() const { return true; }

  FieldOutput eval(const Vec& x) const;
};

// Offsets of each parameter block inside the flat parameter vector. Weight
// blocks are column-major (rows = fan_out, cols = fan_in).
struct ParamLayout {
  struct Dense {
    Index rows = 0;
    Index cols = 0;
    Index weight = 0;
    Index bias = 0;
  };
  std::vector<Dense> hidden;
  Dense u_head;
  Dense v_head;  // rows == 0 in gradient mode
  Index total = 0;

  static ParamLayout build(const FieldConfig& config);
};

class FieldModel final : public Field {
 public:
  // Throws ConfigError on a bad config and ShapeError/DomainError on a
  // parameter vector that does not fit it.
  FieldModel(FieldConfig config, Vec params);

  const FieldConfig& config() const { return config_; }
  const Vec& params() const { return params_; }
  Index param_count() const { return layout_.total; }
  const ParamLayout& layout() const { return layout_; }

  FieldModel with_params(Vec params) const { return FieldModel(config_, std::move(params)); }

  Index dim() const override { return config_.input_dim; }
  bool conservative() const override { return config_.mode == FieldMode::gradient; }
  BatchOutput eval_batch(const Mat& x) const override;

  const detail::NetView& net() const { return *net_; }

 private:
  FieldConfig config_;
  ParamLayout layout_;
  Vec params_;
  std::shared_ptr<const detail::NetView> net_;
};

// He-style uniform fan-in initialisation; biases start at zero.
FieldModel init_field(const FieldConfig& config);

FieldOutput eval(const FieldModel& model, const Vec& x);

// Smoothed distance to a finite point set: u = sqrt(min_i |x - s_i|^2 + C),
// v = grad u. At an exact data point with C = 0 the gradient is set to zero.
class AnalyticDistanceField final : public Field {
 public:
  AnalyticDistanceField(Mat points, double offset_c);

  Index dim() const override { return points_.rows(); }
  BatchOutput eval_batch(const Mat& x) const override;

  const Mat& points() const { return points_; }
  double offset() const { return offset_c_; }

 private:
  Mat points_;
  double offset_c_;
};

// A batch loss that is a sum of per-point terms, each a function of the
// field output (u, v) at that point. Implementations fold any 1/n factor
// into the term.
class PointLoss {
 public:
  virtual ~PointLoss() = default;
  virtual Index size() const = 0;
  // Returns the term for point i and writes dterm/du and dterm/dv.
  virtual double term(Index i, double u, const double* v, double& du, double* dv) const = 0;
  virtual std::string name() const = 0;
};

struct LossGradients {
  double value = 0.0;
  Vec grad;
};

// Exact gradient of sum_i term_i(u(x_i), v(x_i)) with respect to the model
// parameters. In gradient mode v = grad_x u, so this differentiates through
// the input-gradient (reverse-over-reverse). Throws NumericError naming the
// loss and the point when a term or its adjoint is non-finite.
LossGradients loss_gradients(const FieldModel& model, const Mat& x, const PointLoss& loss,
                             Exec exec = Exec::parallel);

namespace kernels {

// Serial reference: one point at a time, naive loops, no shared buffers.
LossGradients loss_gradients_serial(const FieldModel& model, const Mat& x, const PointLoss& loss);
BatchOutput eval_serial(const FieldModel& model, const Mat& x);

// Chunked OpenMP path. Chunks have a fixed size and are reduced in chunk
// order, so results do not depend on the thread count.
LossGradients loss_gradients_omp(const FieldModel& model, const Mat& x, const PointLoss& loss);
BatchOutput eval_omp(const FieldModel& model, const Mat& x);

inline constexpr Index kChunk = 32;

}  // namespace kernels

}  // namespace dmarch
