#include <doctest.h>

#include <cmath>

#include "dmarch/losses.hpp"
#include "helpers.hpp"

using namespace dmarch;

namespace {

PairBatch small_batch(Index n, std::uint64_t seed) {
  return sample_pairs(two_moons(64, 0.05, 1), n, TimeDistribution{}, CouplingStrategy{CouplingKind::random}, seed);
}

// Direct evaluation of the OSL, DEL and FM means from their definitions.
double osl_ref(const Field& f, const PairBatch& b, double eps) {
  double s = 0;
  for (Index i = 0; i < b.size(); ++i) {
    const FieldOutput o = f.eval(b.x.col(i));
    const Vec r = b.x.col(i) - o.u * o.v - b.s.col(i);
    s += r.squaredNorm() / ((b.x.col(i) - b.s.col(i)).squaredNorm() + eps);
  }
  return s / static_cast<double>(b.size());
}

double del_ref(const Field& f, const PairBatch& b, double c0) {
  double s = 0;
  for (Index i = 0; i < b.size(); ++i) {
    const Vec d = b.x.col(i) - b.s.col(i);
    s += (f.eval(b.x.col(i)).v - d / std::sqrt(d.squaredNorm() + c0)).squaredNorm();
  }
  return s / static_cast<double>(b.size());
}

double fm_ref(const Field& f, const PairBatch& b) {
  double s = 0;
  for (Index i = 0; i < b.size(); ++i) s += (f.eval(b.x.col(i)).v - (b.s.col(i) - b.x0.col(i))).squaredNorm();
  return s / static_cast<double>(b.size());
}

}  // namespace

TEST_CASE("loss values match their definitions") {
  const FieldModel m = test::random_model(test::small_config());
  const PairBatch b = small_batch(40, 3);
  CHECK(osl(m, b, 0.01) == doctest::Approx(osl_ref(m, b, 0.01)).epsilon(1e-12));
  CHECK(del(m, b, 0.01) == doctest::Approx(del_ref(m, b, 0.01)).epsilon(1e-12));
  CHECK(fm_loss(m, b, FmWeight::none) == doctest::Approx(fm_ref(m, b)).epsilon(1e-12));
  LossConfig c;
  c.lambda1 = 0.3;
  c.lambda2 = 2.0;
  CHECK(combined_loss(m, b, c) == doctest::Approx(0.3 * osl_ref(m, b, 0.01) + 2.0 * del_ref(m, b, 0.01)).epsilon(1e-12));
}

TEST_CASE("DEL target has norm below one and the right direction") {
  Vec x(2), s(2);
  x << 3.0, 4.0;
  s << 0.0, 0.0;
  const Vec t = del_target(x, s, 0.0);
  CHECK(t.norm() == doctest::Approx(1.0));
  CHECK(del_target(x, s, 1.0).norm() == doctest::Approx(5.0 / std::sqrt(26.0)));
  CHECK(del_target(s, s, 0.01).norm() == 0.0);
}

TEST_CASE("the analytic distance field has zero OSL at its data points' nearest pairs") {
  // With C = 0, x - u v is the nearest data point; pairs whose target is
  // that point give zero one-step residual.
  const Mat pts = test::random_points(2, 5, 4);
  const AnalyticDistanceField f(pts, 0.0);
  PairBatch b;
  b.x = test::random_points(2, 20, 5, 3.0);
  b.s.resize(2, 20);
  b.x0 = b.x;
  b.t = Vec::Zero(20);
  for (Index i = 0; i < 20; ++i) {
    Index best = 0;
    (pts.colwise() - b.x.col(i)).colwise().squaredNorm().minCoeff(&best);
    b.s.col(i) = pts.col(best);
    b.target_index.push_back(best);
  }
  CHECK(osl(f, b, 0.01) < 1e-20);
  CHECK(del(f, b, 0.0) < 1e-20);
}

TEST_CASE("unnormalized OSL drops the denominator") {
  const test::QuadraticField f(2);
  const PairBatch b = small_batch(10, 2);
  double ref = 0;
  for (Index i = 0; i < b.size(); ++i) {
    const FieldOutput o = f.eval(b.x.col(i));
    ref += (b.x.col(i) - o.u * o.v - b.s.col(i)).squaredNorm();
  }
  CHECK(osl(f, b, 0.01, true) == doctest::Approx(ref / 10.0).epsilon(1e-12));
}

TEST_CASE("reweighted FM divides by (1-t)^2") {
  const test::QuadraticField f(2);
  const PairBatch b = small_batch(10, 6);
  double ref = 0;
  for (Index i = 0; i < b.size(); ++i) {
    const double w = 1.0 / ((1 - b.t(i)) * (1 - b.t(i)));
    ref += w * (f.eval(b.x.col(i)).v - (b.s.col(i) - b.x0.col(i))).squaredNorm();
  }
  CHECK(fm_loss(f, b, FmWeight::inverse_one_minus_t_sq) == doctest::Approx(ref / 10.0).epsilon(1e-12));
}

TEST_CASE("every loss gradient matches central differences") {
  // 20 random coordinates x 5 random models per loss, both field modes.
  for (FieldMode mode : {FieldMode::gradient, FieldMode::direct}) {
    for (std::uint64_t ms = 1; ms <= 5; ++ms) {
      const FieldModel m = test::random_model(test::small_config(mode, Activation::swish, ms));
      const PairBatch b = small_batch(16, ms + 100);
      LossConfig lc;
      const OslLoss lo(b, 0.01);
      const DelLoss ld(b, 0.01);
      const FmLoss lf(b, FmWeight::inverse_one_minus_t_sq);
      const CombinedLoss lcmb(b, lc);
      for (const PointLoss* loss : {static_cast<const PointLoss*>(&lo), static_cast<const PointLoss*>(&ld),
                                    static_cast<const PointLoss*>(&lf), static_cast<const PointLoss*>(&lcmb)}) {
        CAPTURE(loss->name());
        const LossGradients g = loss_gradients(m, b.x, *loss);
        std::mt19937_64 rng(ms * 31);
        std::uniform_int_distribution<Index> pick(0, m.param_count() - 1);
        for (int r = 0; r < 20; ++r) {
          const Index k = pick(rng);
          const double h = 1e-5;
          Vec p = m.params();
          p(k) += h;
          const double up = loss_value(m.with_params(p), b.x, *loss);
          p(k) -= 2 * h;
          const double dn = loss_value(m.with_params(p), b.x, *loss);
          const double fd = (up - dn) / (2 * h);
          CHECK(std::abs(fd - g.grad(k)) <= 1e-4 * std::max(std::abs(fd), 1e-3));
        }
      }
    }
  }
}

TEST_CASE("loss configs are validated") {
  LossConfig c;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.c0 = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_fm_weight(to_string(FmWeight::inverse_one_minus_t_sq)) == FmWeight::inverse_one_minus_t_sq);
}
