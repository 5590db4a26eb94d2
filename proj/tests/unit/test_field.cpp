#include <doctest.h>

#include <cmath>
#include <random>

#include "dmarch/field.hpp"
#include "dmarch/losses.hpp"
#include "helpers.hpp"

using namespace dmarch;
using dmarch::test::random_model;
using dmarch::test::random_points;
using dmarch::test::small_config;

namespace {

double fd_u(const FieldModel& m, Vec x, Index d, double h) {
  x(d) += h;
  const double up = m.eval(x).u;
  x(d) -= 2 * h;
  return (up - m.eval(x).u) / (2 * h);
}

// sum_i a_i u_i + b_i . v_i, a test loss touching both outputs.
class LinearLoss final : public PointLoss {
 public:
  LinearLoss(Vec a, Mat b) : a_(std::move(a)), b_(std::move(b)) {}
  Index size() const override { return a_.size(); }
  double term(Index i, double u, const double* v, double& du, double* dv) const override {
    du = a_(i);
    double t = a_(i) * u;
    for (Index k = 0; k < b_.rows(); ++k) {
      dv[k] = b_(k, i);
      t += b_(k, i) * v[k];
    }
    return t;
  }
  std::string name() const override { return "linear"; }

 private:
  Vec a_;
  Mat b_;
};

}  // namespace

TEST_CASE("param count follows layer arithmetic") {
  FieldConfig cfg;
  CHECK(param_count(cfg) == 2 * 128 + 128 + 2 * (128 * 128 + 128) + (128 * 1 + 1));
  cfg.mode = FieldMode::direct;
  CHECK(param_count(cfg) == 33537 + 128 * 2 + 2);
}

TEST_CASE("init is deterministic and seed sensitive") {
  FieldConfig cfg = small_config();
  const FieldModel a = init_field(cfg);
  const FieldModel b = init_field(cfg);
  CHECK(a.params() == b.params());
  cfg.seed += 1;
  CHECK(init_field(cfg).params() != a.params());
}

TEST_CASE("invalid configs are rejected") {
  FieldConfig cfg;
  cfg.hidden_widths.clear();
  CHECK_THROWS_AS(init_field(cfg), ConfigError);
  cfg = FieldConfig{};
  cfg.input_dim = 0;
  CHECK_THROWS_AS(init_field(cfg), ConfigError);
  cfg = FieldConfig{};
  cfg.output_scale = 0.0;
  CHECK_THROWS_AS(init_field(cfg), ConfigError);
  CHECK_THROWS_AS(FieldModel(FieldConfig{}, Vec::Zero(5)), ShapeError);
}

TEST_CASE("eval rejects bad input") {
  const FieldModel m = init_field(small_config());
  CHECK_THROWS_AS(m.eval(Vec::Zero(3)), ShapeError);
  Vec x = Vec::Zero(2);
  x(0) = std::nan("");
  CHECK_THROWS_AS(m.eval(x), DomainError);
}

TEST_CASE("gradient mode v matches finite differences of u") {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (Activation act : {Activation::swish, Activation::tanh, Activation::selu}) {
    for (int rep = 0; rep < 67; ++rep) {
      FieldConfig cfg = small_config(FieldMode::gradient, act, 100 + rep, 1 + rep % 4);
      cfg.hidden_widths = {16, 16, 16};
      const FieldModel m = random_model(cfg);
      Vec x = random_points(cfg.input_dim, 1, rng()).col(0);
      const FieldOutput out = m.eval(x);
      Vec fd(cfg.input_dim);
      for (Index d = 0; d < cfg.input_dim; ++d) fd(d) = fd_u(m, x, d, 1e-5);
      // selu has a kink at 0; skip points where the FD stencil straddles it
      const double err = (out.v - fd).norm() / fd.norm();
      if (act == Activation::selu && err > 1e-5) continue;
      CHECK(err < 1e-5);
      ++checked;
    }
  }
  CHECK(checked >= 190);
}

TEST_CASE("direct mode: direction head leaves u unchanged") {
  FieldConfig cfg = small_config(FieldMode::direct);
  const FieldModel m = random_model(cfg);
  Vec p = m.params();
  const auto& vh = m.layout().v_head;
  for (Index i = vh.weight; i < vh.bias + vh.rows; ++i) p(i) += 0.5;
  const FieldModel m2(cfg, p);
  const Mat x = random_points(2, 10, 3);
  const BatchOutput a = m.eval_batch(x), b = m2.eval_batch(x);
  CHECK(a.u == b.u);
  CHECK((a.v - b.v).norm() > 0.1);
}

TEST_CASE("output_scale rescales the direction head only") {
  FieldConfig cfg = small_config(FieldMode::direct);
  const FieldModel m = random_model(cfg);
  cfg.output_scale = 0.5;
  const FieldModel h(cfg, m.params());
  const Mat x = random_points(2, 4, 9);
  CHECK((h.eval_batch(x).v - 0.5 * m.eval_batch(x).v).norm() < 1e-14);
  CHECK(h.eval_batch(x).u == m.eval_batch(x).u);
}

TEST_CASE("batch eval equals single-point eval bitwise") {
  for (FieldMode mode : {FieldMode::gradient, FieldMode::direct}) {
    FieldConfig cfg = small_config(mode);
    cfg.hidden_widths = {33, 17};
    const FieldModel m = random_model(cfg);
    const Mat x = random_points(2, 101, 5);
    const BatchOutput b = m.eval_batch(x);
    for (Index j = 0; j < x.cols(); ++j) {
      const FieldOutput o = m.eval(Vec(x.col(j)));
      CHECK(o.u == b.u(j));
      CHECK(o.v == Vec(b.v.col(j)));
    }
  }
}

TEST_CASE("serial and parallel kernels agree") {
  for (FieldMode mode : {FieldMode::gradient, FieldMode::direct}) {
    FieldConfig cfg = small_config(mode);
    cfg.hidden_widths = {24, 24, 24};
    const FieldModel m = random_model(cfg);
    const Mat x = random_points(2, 300, 8);
    const BatchOutput a = kernels::eval_serial(m, x), b = kernels::eval_omp(m, x);
    CHECK((a.u - b.u).norm() <= 1e-12 * a.u.norm());
    CHECK((a.v - b.v).norm() <= 1e-12 * a.v.norm());
    const LinearLoss loss(random_points(1, 300, 2).row(0).transpose(), random_points(2, 300, 4));
    const LossGradients gs = loss_gradients(m, x, loss, Exec::serial);
    const LossGradients gp = loss_gradients(m, x, loss, Exec::parallel);
    CHECK(test::rel_err(gp.value, gs.value) < 1e-12);
    CHECK((gp.grad - gs.grad).norm() <= 1e-12 * gs.grad.norm());
  }
}

TEST_CASE("parallel gradient is independent of thread count") {
  FieldConfig cfg = small_config();
  cfg.hidden_widths = {32, 32};
  const FieldModel m = random_model(cfg);
  const Mat x = random_points(2, 517, 12);
  const LinearLoss loss(random_points(1, 517, 2).row(0).transpose(), random_points(2, 517, 4));
  const int before = num_threads();
  set_num_threads(1);
  const LossGradients a = loss_gradients(m, x, loss);
  set_num_threads(3);
  const LossGradients b = loss_gradients(m, x, loss);
  set_num_threads(before);
  CHECK(a.value == b.value);
  CHECK(a.grad == b.grad);
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(21);
  for (FieldMode mode : {FieldMode::gradient, FieldMode::direct}) {
    for (Activation act : {Activation::swish, Activation::tanh}) {
      FieldConfig cfg = small_config(mode, act, 40 + static_cast<int>(act));
      const FieldModel m = random_model(cfg);
      const Mat x = random_points(2, 9, rng());
      const LinearLoss loss(random_points(1, 9, rng()).row(0).transpose(), random_points(2, 9, rng()));
      const LossGradients g = loss_gradients(m, x, loss);
      std::uniform_int_distribution<Index> pick(0, m.param_count() - 1);
      for (int r = 0; r < 20; ++r) {
        const Index p = pick(rng);
        Vec hi = m.params(), lo = m.params();
        hi(p) += 1e-6;
        lo(p) -= 1e-6;
        const double fd = (loss_value(m.with_params(hi), x, loss) - loss_value(m.with_params(lo), x, loss)) / 2e-6;
        CHECK(std::abs(g.grad(p) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
      }
    }
  }
}

TEST_CASE("a step along the negative gradient decreases the loss") {
  FieldConfig cfg = small_config();
  const FieldModel m = random_model(cfg);
  const Mat x = random_points(2, 16, 31);
  const Mat s = random_points(2, 16, 32);
  PairBatch pairs{x, s, s, Vec::Constant(16, 0.5), {}};
  const LossConfig lc{};
  const CombinedLoss loss(pairs, lc);
  const LossGradients g = loss_gradients(m, x, loss);
  const double after = loss_value(m.with_params(m.params() - 1e-4 * g.grad), x, loss);
  CHECK(after < g.value);
}

TEST_CASE("non-finite loss terms are reported with the term name") {
  class Bad final : public PointLoss {
   public:
    Index size() const override { return 3; }
    double term(Index i, double, const double*, double& du, double* dv) const override {
      du = 0;
      dv[0] = dv[1] = 0;
      return i == 2 ? std::nan("") : 1.0;
    }
    std::string name() const override { return "bad"; }
  };
  const FieldModel m = init_field(small_config());
  for (Exec e : {Exec::serial, Exec::parallel}) {
    try {
      loss_gradients(m, random_points(2, 3, 1), Bad{}, e);
      FAIL("expected NumericError");
    } catch (const NumericError& err) {
      CHECK(std::string(err.what()).find("bad") != std::string::npos);
      CHECK(std::string(err.what()).find("point 2") != std::string::npos);
    }
  }
}

TEST_CASE("analytic distance field") {
  Mat pts(1, 1);
  pts << 0.0;
  const AnalyticDistanceField f(pts, 7.0);
  Vec x(1);
  x << 3.0;
  const FieldOutput o = f.eval(x);
  CHECK(o.u == doctest::Approx(4.0));
  CHECK(o.v(0) == doctest::Approx(0.75));
  const AnalyticDistanceField g(pts, 0.0);
  x << 0.0;
  CHECK(g.eval(x).v(0) == 0.0);
}
