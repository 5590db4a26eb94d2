#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "dmarch/oracles.hpp"

namespace dmarch {

void GmmOracleConfig::validate() const {
  source.validate();
  target.validate();
  t_dist.validate();
  if (source.dim() != target.dim()) throw ConfigError("gmm oracle: source and target dimensions differ");
  for (const auto* spec : {&source, &target})
    for (const auto& c : spec->components)
      if (!(c.sigma > 0.0)) throw ConfigError("gmm oracle: component sigma must be > 0");
  if (!(t_dist.t_max < 1.0)) throw ConfigError("gmm oracle: t_dist.t_max must be < 1");
  if (samples < 2) throw ConfigError("gmm oracle: samples must be >= 2");
  if (!(epsilon >= 0.0) || !(c0 >= 0.0)) throw ConfigError("gmm oracle: epsilon and c0 must be >= 0");
}

GmmMinimizers gmm_minimizers(const Vec& x, const GmmOracleConfig& cfg) {
  cfg.validate();
  const Index dim = cfg.target.dim();
  if (x.size() != dim) throw ShapeError("gmm oracle: query point has the wrong dimension");
  const double d = static_cast<double>(dim);
  std::mt19937_64 rng = make_stream(cfg.seed, 0);
  std::vector<double> ws, wt;
  for (const auto& c : cfg.source.components) ws.push_back(c.weight);
  for (const auto& c : cfg.target.components) wt.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick_src(ws.begin(), ws.end()), pick_tgt(wt.begin(), wt.end());
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto n = static_cast<std::size_t>(cfg.samples);
  Mat s(dim, cfg.samples);
  std::vector<double> lw(n), ts(n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = cfg.source.components[pick_src(rng)];
    const auto& k = cfg.target.components[pick_tgt(rng)];
    const double t = cfg.t_dist.sample(rng);
    const double a = 1.0 - t;
    const double v0 = c.sigma * c.sigma, v1 = k.sigma * k.sigma;
    // Marginal likelihood of x given (c, k, t), with s integrated out.
    const double var = a * a * v0 + t * t * v1;
    lw[j] = -0.5 * d * std::log(var) - (x - a * c.mean - t * k.mean).squaredNorm() / (2.0 * var);
    top = std::max(top, lw[j]);
    // Exact conditional of s given (x, c, k, t).
    const double prec = 1.0 / v1 + t * t / (a * a * v0);
    const double pv = 1.0 / prec;
    const Vec pm = pv * (k.mean / v1 + (t / (a * a * v0)) * (x - a * c.mean));
    const double sd = std::sqrt(pv);
    for (Index i = 0; i < dim; ++i) s(i, static_cast<Index>(j)) = pm(i) + sd * normal(rng);
    ts[j] = t;
  }

  GmmMinimizers out;
  out.g_fm = Vec::Zero(dim);
  out.g_rfm = Vec::Zero(dim);
  out.h_de = Vec::Zero(dim);
  Vec osl_num = Vec::Zero(dim);
  double sw = 0.0, sw2 = 0.0, sr = 0.0, so = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = std::exp(lw[j] - top);
    const Vec sj = s.col(static_cast<Index>(j));
    const double a = 1.0 - ts[j];
    const Vec delta = (sj - x) / a;
    const double r2 = (x - sj).squaredNorm();
    const double wr = w / (a * a);
    const double wo = w / (r2 + cfg.epsilon);
    sw += w;
    sw2 += w * w;
    sr += wr;
    so += wo;
    out.g_fm += w * delta;
    out.g_rfm += wr * delta;
    osl_num += wo * sj;
    const double q = std::sqrt(r2 + cfg.c0);
    if (q > 0.0) out.h_de += w * (x - sj) / q;
  }
  out.g_fm /= sw;
  out.g_rfm /= sr;
  out.h_de /= sw;
  out.f_os = osl_num / so - x;
  out.ess = sw * sw / sw2;
  return out;
}

double neg_log_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw ArgumentError("neg_log_gamma_q: a must be > 0");
  if (x <= 0.0) return 0.0;
  const double q = boost::math::gamma_q(a, x);
  if (q > 1e-300) return -std::log(q);
  // Leading terms of the large-x expansion of Q(a, x).
  return x - (a - 1.0) * std::log(x) + std::lgamma(a) - std::log1p((a - 1.0) / x);
}

double outlierness(const Vec& x, const GmmSpec& target) {
  double z2 = std::numeric_limits<double>::infinity();
  for (const auto& c : target.components) z2 = std::min(z2, (x - c.mean).squaredNorm() / (c.sigma * c.sigma));
  return neg_log_gamma_q(0.5 * static_cast<double>(x.size()), 0.5 * z2);
}

}  // namespace dmarch
