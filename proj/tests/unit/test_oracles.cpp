#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dmarch/oracles.hpp"
#include "dmarch/quadrature.hpp"
#include "helpers.hpp"

using namespace dmarch;

namespace {

PointCloud single_point(double a, double b) {
  PointCloud p;
  p.points.resize(2, 1);
  p.points << a, b;
  return p;
}

PointCloud small_dataset() {
  PointCloud p;
  p.points = test::random_points(2, 8, 21);
  return p;
}

}  // namespace

TEST_CASE("Gauss-Legendre integrates polynomials up to degree 2n-1 exactly") {
  for (Index n : {1, 2, 5, 8, 16}) {
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    REQUIRE(x.size() == static_cast<std::size_t>(n));
    for (Index deg = 0; deg < 2 * n; ++deg) {
      double q = 0;
      for (std::size_t i = 0; i < x.size(); ++i) q += w[i] * std::pow(x[i], static_cast<double>(deg));
      const double exact = deg % 2 ? 0.0 : 2.0 / static_cast<double>(deg + 1);
      CHECK(std::abs(q - exact) < 1e-13);
    }
  }
}

TEST_CASE("time rule integrates smooth functions over [t_min, t_max]") {
  QuadratureSpec spec;
  const TimeRule r = time_rule(spec);
  double s1 = 0, s2 = 0;
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    CHECK(r.t[k] > spec.t_min);
    CHECK(r.t[k] < spec.t_max);
    s1 += r.w[k];
    s2 += r.w[k] * std::exp(r.t[k]);
  }
  CHECK(s1 == doctest::Approx(spec.t_max - spec.t_min).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(std::exp(spec.t_max) - std::exp(spec.t_min)).epsilon(1e-10));
  spec.scheme = QuadScheme::trapezoid;
  spec.nodes = 2001;
  const TimeRule tr = time_rule(spec);
  double s3 = 0;
  for (std::size_t k = 0; k < tr.t.size(); ++k) s3 += tr.w[k] * tr.t[k] * tr.t[k];
  CHECK(s3 == doctest::Approx(std::pow(spec.t_max, 3) / 3.0).epsilon(1e-5));
}

TEST_CASE("bad quadrature specs are rejected") {
  QuadratureSpec q;
  q.nodes = 0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = QuadratureSpec{};
  q.t_max = 1.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("radial family: every member projects onto the data point") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (Index d : {1, 2, 8}) {
    for (double c : {0.0, 1.0, 7.0}) {
      for (int sign : {1, -1}) {
        for (int r = 0; r < 100; ++r) {
          Vec x(d), s(d);
          for (Index k = 0; k < d; ++k) {
            x(k) = 3 * g(rng);
            s(k) = g(rng);
          }
          CHECK(radial_family_check(x, s, c, sign) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("single-point dataset: closed-form minimizers") {
  const PointCloud ds = single_point(0.5, -0.25);
  OracleConfig cfg;
  Vec x(2);
  x << 1.5, 0.75;
  const MinimizerReport r = minimizer_report(x, ds, cfg);
  CHECK(r.pi(0) == doctest::Approx(1.0));
  CHECK((r.s_hat - ds.points.col(0)).norm() < 1e-12);
  CHECK((x + r.f_os - ds.points.col(0)).norm() < 1e-12);
  // The DEL target does not depend on t, so its conditional mean is itself.
  CHECK((r.h_de - del_target(x, ds.points.col(0), cfg.c0)).norm() < 1e-12);
  // FM and RFM both point from x straight at the only target.
  const Vec dir = (ds.points.col(0) - x).normalized();
  CHECK(r.g_fm.normalized().dot(dir) == doctest::Approx(1.0));
  CHECK(r.g_rfm.normalized().dot(dir) == doctest::Approx(1.0));
}

TEST_CASE("posterior index favours the nearby target at late times") {
  PointCloud ds;
  ds.points.resize(2, 2);
  ds.points << -1.0, 1.0, 0.0, 0.0;
  OracleConfig cfg;
  Vec x(2);
  x << 0.99, 0.0;
  const Vec pi = posterior_index(x, ds, cfg);
  CHECK(pi.sum() == doctest::Approx(1.0));
  CHECK(pi(1) > 0.99);
  x << 0.0, 0.0;
  const Vec sym = posterior_index(x, ds, cfg);
  CHECK(sym(0) == doctest::Approx(sym(1)));
}

TEST_CASE("closed form agrees with the Monte-Carlo estimate") {
  const PointCloud ds = small_dataset();
  OracleConfig cfg;
  cfg.epsilon = cfg.c0 = 0.5;
  Vec x(2);
  x << 0.3, -0.4;
  const MinimizerReport r = minimizer_report(x, ds, cfg);
  const McEstimate mc = mc_minimizers(x, ds, cfg, 200000, 5);
  auto within = [](const Vec& exact, const Vec& mean, const Vec& se) {
    for (Index k = 0; k < exact.size(); ++k) CHECK(std::abs(exact(k) - mean(k)) < 5 * se(k) + 1e-12);
  };
  within(r.g_fm, mc.mean.g_fm, mc.se.g_fm);
  within(r.g_rfm, mc.mean.g_rfm, mc.se.g_rfm);
  within(r.f_os, mc.mean.f_os, mc.se.f_os);
  within(r.h_de, mc.mean.h_de, mc.se.h_de);
}

TEST_CASE("serial and parallel oracle sweeps agree") {
  const PointCloud ds = small_dataset();
  OracleConfig cfg;
  const Mat xs = test::random_points(2, 9, 2);
  const auto a = minimizer_reports(xs, ds, cfg, Exec::serial);
  const auto b = minimizer_reports(xs, ds, cfg, Exec::parallel);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].g_fm == b[i].g_fm);
    CHECK(a[i].h_de == b[i].h_de);
  }
}

TEST_CASE("angles and the additivity ratio") {
  Vec a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 2.0;
  CHECK(angle_between(a, b) == doctest::Approx(std::numbers::pi / 2));
  CHECK(angle_between(a, -a) == doctest::Approx(std::numbers::pi));
  CHECK_THROWS_AS(angle_between(a, Vec::Zero(2)), NumericError);
  MinimizerReport r;
  r.f_os = a;
  r.g_fm = b;
  r.h_de = -(a + b);  // -h_de bisects f_os and g_fm
  const AngleReport ar = angle_analysis(r);
  CHECK(ar.additivity_ratio == doctest::Approx(1.0));
  r.h_de = a + b;  // -h_de points away from both
  CHECK(angle_analysis(r).additivity_ratio < 1.0);
}

TEST_CASE("outlierness and the incomplete gamma tail") {
  // Q(1, x) = exp(-x).
  for (double x : {0.0, 0.5, 3.0, 40.0}) CHECK(neg_log_gamma_q(1.0, x) == doctest::Approx(x));
  // Q(1/2, x) = erfc(sqrt(x)).
  CHECK(neg_log_gamma_q(0.5, 2.0) == doctest::Approx(-std::log(std::erfc(std::sqrt(2.0)))));
  GmmSpec g = standard_normal(2);
  Vec x(2);
  x << 1.0, 2.0;
  CHECK(outlierness(x, g) == doctest::Approx(2.5));
}

TEST_CASE("GMM minimizers are reproducible and point toward the target") {
  GmmOracleConfig cfg;
  cfg.source = gmm8d_source();
  cfg.target = gmm8d_target();
  cfg.samples = 20000;
  cfg.seed = 3;
  const Vec x = cfg.source.components.front().mean;
  const GmmMinimizers a = gmm_minimizers(x, cfg), b = gmm_minimizers(x, cfg);
  CHECK(a.g_fm == b.g_fm);
  CHECK(a.ess > cfg.ess_floor);
  // Every minimizer points from the source mean toward the target mixture's mean.
  const Vec to_target = cfg.target.mean() - x;
  CHECK(a.g_fm.dot(to_target) > 0);
  CHECK(a.f_os.dot(to_target) > 0);
  CHECK((-a.h_de).dot(to_target) > 0);
}

TEST_CASE("oracle trajectories record per-step diagnostics") {
  GmmOracleConfig cfg;
  cfg.source = gmm8d_source();
  cfg.target = gmm8d_target();
  cfg.samples = 5000;
  const OracleTrajectory t =
      oracle_trajectory(cfg.source.components.front().mean, MinimizerKind::osl, cfg, 0.1, 10);
  CHECK(t.path.states.size() == 11);
  CHECK(t.outlierness.size() == 11);
  CHECK(t.log_density.size() == 11);
  CHECK(t.turning_angles_deg.size() == 9);
  CHECK(t.outlierness.back() < t.outlierness.front());
  CHECK(parse_minimizer_kind("rfm") == MinimizerKind::rfm);
}
