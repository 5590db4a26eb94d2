#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>

#include <omp.h>

#include "dmarch/field.hpp"
#include "field_detail.hpp"

namespace dmarch {

void set_num_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int num_threads() { return omp_get_max_threads(); }

void FieldConfig::validate() const {
  if (input_dim < 1) throw ConfigError("field.input_dim must be >= 1");
  if (hidden_widths.empty()) throw ConfigError("field.hidden_widths must be nonempty");
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    if (hidden_widths[i] < 1) {
      throw ConfigError("field.hidden_widths[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) {
    throw ConfigError("field.output_scale must be a positive finite number");
  }
}

ParamLayout ParamLayout::build(const FieldConfig& config) {
  config.validate();
  ParamLayout layout;
  Index offset = 0;
  Index in = config.input_dim;
  auto dense = [&](Index rows, Index cols) {
    Dense d{rows, cols, offset, offset + rows * cols};
    offset += rows * cols + rows;
    return d;
  };
  for (Index width : config.hidden_widths) {
    layout.hidden.push_back(dense(width, in));
    in = width;
  }
  layout.u_head = dense(1, in);
  if (config.mode == FieldMode::direct) layout.v_head = dense(config.input_dim, in);
  layout.total = offset;
  return layout;
}

Index param_count(const FieldConfig& config) { return ParamLayout::build(config).total; }

FieldModel::FieldModel(FieldConfig config, Vec params)
    : config_(std::move(config)), layout_(ParamLayout::build(config_)), params_(std::move(params)) {
  if (params_.size() != layout_.total) {
    throw ShapeError("parameter vector has " + std::to_string(params_.size()) +
                     " entries, config requires " + std::to_string(layout_.total));
  }
  if (!params_.allFinite()) throw DomainError("parameter vector contains non-finite values");
  net_ = std::make_shared<const detail::NetView>(config_, layout_, params_);
}

BatchOutput FieldModel::eval_batch(const Mat& x) const { return kernels::eval_omp(*this, x); }

FieldOutput Field::eval(const Vec& x) const {
  if (x.size() != dim()) {
    throw ShapeError("point has dimension " + std::to_string(x.size()) + ", field expects " +
                     std::to_string(dim()));
  }
  BatchOutput out = eval_batch(Mat(x));
  return {out.u(0), out.v.col(0)};
}

FieldModel init_field(const FieldConfig& config) {
  const ParamLayout layout = ParamLayout::build(config);
  Vec params = Vec::Zero(layout.total);
  std::mt19937_64 rng = make_stream(config.seed, 0);
  auto fill = [&](const ParamLayout::Dense& d) {
    const double bound = std::sqrt(6.0 / static_cast<double>(d.cols));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Index i = 0; i < d.rows * d.cols; ++i) params(d.weight + i) = uni(rng);
  };
  for (const auto& d : layout.hidden) fill(d);
  fill(layout.u_head);
  if (layout.v_head.rows > 0) fill(layout.v_head);
  return FieldModel(config, std::move(params));
}

FieldOutput eval(const FieldModel& model, const Vec& x) { return model.eval(x); }

LossGradients loss_gradients(const FieldModel& model, const Mat& x, const PointLoss& loss, Exec exec) {
  return exec == Exec::serial ? kernels::loss_gradients_serial(model, x, loss)
                              : kernels::loss_gradients_omp(model, x, loss);
}

AnalyticDistanceField::AnalyticDistanceField(Mat points, double offset_c)
    : points_(std::move(points)), offset_c_(offset_c) {
  if (points_.cols() < 1 || points_.rows() < 1) throw ArgumentError("analytic field needs at least one point");
  if (!points_.allFinite()) throw DomainError("analytic field points must be finite");
  if (!(offset_c_ >= 0.0)) throw ArgumentError("analytic field offset must be >= 0");
}

BatchOutput AnalyticDistanceField::eval_batch(const Mat& x) const {
  if (x.rows() != dim()) throw ShapeError("analytic field: dimension mismatch");
  if (!x.allFinite()) throw DomainError("analytic field: non-finite input");
  BatchOutput out{Vec(x.cols()), Mat(x.rows(), x.cols())};
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < x.cols(); ++j) {
    Index best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < points_.cols(); ++i) {
      const double d2 = (x.col(j) - points_.col(i)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    const double u = std::sqrt(best_d2 + offset_c_);
    out.u(j) = u;
    if (u > 0.0) {
      out.v.col(j) = (x.col(j) - points_.col(best)) / u;
    } else {
      out.v.col(j).setZero();
    }
  }
  return out;
}

namespace detail {

NetView::NetView(const FieldConfig& cfg, const ParamLayout& lay, const Vec& params) {
  const double* p = params.data();
  dim = cfg.input_dim;
  act = cfg.activation;
  mode = cfg.mode;
  scale = cfg.output_scale;
  total = lay.total;
  for (const auto& d : lay.hidden) {
    Layer l;
    l.in = d.cols;
    l.out = d.rows;
    l.w.assign(p + d.weight, p + d.weight + d.rows * d.cols);
    l.b.assign(p + d.bias, p + d.bias + d.rows);
    l.w_off = d.weight;
    l.b_off = d.bias;
    l.wt.resize(static_cast<std::size_t>(d.rows * d.cols));
    for (Index k = 0; k < d.cols; ++k)
      for (Index i = 0; i < d.rows; ++i) l.wt[k + i * d.cols] = l.w[i + k * d.rows];
    layers.push_back(std::move(l));
  }
  width = layers.back().out;
  wo.assign(p + lay.u_head.weight, p + lay.u_head.weight + width);
  bo = p[lay.u_head.bias];
  wo_off = lay.u_head.weight;
  bo_off = lay.u_head.bias;
  if (mode == FieldMode::direct) {
    wv.assign(p + lay.v_head.weight, p + lay.v_head.weight + dim * width);
    bv.assign(p + lay.v_head.bias, p + lay.v_head.bias + dim);
    wv_off = lay.v_head.weight;
    bv_off = lay.v_head.bias;
    wvt.resize(static_cast<std::size_t>(dim * width));
    for (Index k = 0; k < width; ++k)
      for (Index d = 0; d < dim; ++d) wvt[k + d * width] = wv[d + k * dim];
  }
}

void check_input(const FieldModel& model, const Mat& x) {
  if (x.rows() != model.dim()) {
    throw ShapeError("input has dimension " + std::to_string(x.rows()) + ", field expects " +
                     std::to_string(model.dim()));
  }
  if (!x.allFinite()) throw DomainError("field input contains non-finite values");
}

}  // namespace detail

}  // namespace dmarch
