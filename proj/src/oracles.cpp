#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "dmarch/oracles.hpp"

namespace dmarch {

namespace {

GmmSpec source_or_default(const OracleConfig& cfg, Index dim) {
  return cfg.source.components.empty() ? standard_normal(dim) : cfg.source;
}

QuadratureSpec effective_quad(const OracleConfig& cfg) {
  QuadratureSpec q = cfg.quad;
  q.t_min = std::max(q.t_min, cfg.t_dist.t_min);
  q.t_max = std::min(q.t_max, cfg.t_dist.t_max);
  if (!(q.t_min < q.t_max)) throw ConfigError("oracle: quadrature range does not overlap the support of t_dist");
  return q;
}

double dist_row(const PointCloud& data, Index i, const Vec& x) { return (x - data.points.col(i)).squaredNorm(); }

}  // namespace

void OracleConfig::validate(Index dim) const {
  t_dist.validate();
  quad.validate();
  if (!(epsilon >= 0.0)) throw ConfigError("oracle.epsilon must be >= 0");
  if (!(c0 >= 0.0)) throw ConfigError("oracle.c0 must be >= 0");
  if (!source.components.empty()) {
    source.validate();
    if (source.dim() != dim) throw ConfigError("oracle.source: dimension does not match the dataset");
    for (const auto& c : source.components)
      if (!(c.sigma > 0.0)) throw ConfigError("oracle.source: component sigma must be > 0");
  }
}

JointPosterior joint_posterior(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg) {
  dataset.validate();
  if (x.size() != dataset.dim()) throw ShapeError("oracle: query point has the wrong dimension");
  if (!x.allFinite()) throw DomainError("oracle: query point must be finite");
  cfg.validate(dataset.dim());
  const TimeRule rule = time_rule(effective_quad(cfg));
  const GmmSpec src = source_or_default(cfg, dataset.dim());
  const Index n = dataset.size();
  const auto nk = static_cast<Index>(rule.t.size());
  const double d = static_cast<double>(dataset.dim());

  // log weights per (i, k, c), reduced over c by log-sum-exp after a global shift.
  const auto nc = static_cast<Index>(src.components.size());
  std::vector<double> lw(static_cast<std::size_t>(n * nk * nc), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < nk; ++k) {
    const double t = rule.t[static_cast<std::size_t>(k)];
    const double a = 1.0 - t;
    const double base = std::log(rule.w[static_cast<std::size_t>(k)]) + std::log(cfg.t_dist.density(t));
    for (Index c = 0; c < nc; ++c) {
      const auto& comp = src.components[static_cast<std::size_t>(c)];
      if (comp.weight <= 0.0) continue;
      const double s = a * comp.sigma;
      const Vec m = x - a * comp.mean;
      const double head = base + std::log(comp.weight) - d * std::log(s);
      for (Index i = 0; i < n; ++i) {
        const double r2 = (m - t * dataset.points.col(i)).squaredNorm();
        const double v = head - r2 / (2.0 * s * s);
        lw[static_cast<std::size_t>((i * nk + k) * nc + c)] = v;
        top = std::max(top, v);
      }
    }
  }
  if (!std::isfinite(top)) throw NumericError("oracle: degenerate posterior (all weights underflow)");

  JointPosterior post;
  post.t = rule.t;
  post.p = Mat::Zero(n, nk);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < nk; ++k) {
      double acc = 0.0;
      for (Index c = 0; c < nc; ++c) acc += std::exp(lw[static_cast<std::size_t>((i * nk + k) * nc + c)] - top);
      post.p(i, k) = acc;
      total += acc;
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("oracle: degenerate posterior");
  post.p /= total;
  post.pi = post.p.rowwise().sum();
  return post;
}

Vec posterior_index(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg) {
  return joint_posterior(x, dataset, cfg).pi;
}

namespace {

MinimizerReport report_from(const Vec& x, const PointCloud& data, const OracleConfig& cfg, const JointPosterior& post) {
  const Index n = data.size();
  const Index nk = static_cast<Index>(post.t.size());
  MinimizerReport r;
  r.pi = post.pi;
  r.g_fm = Vec::Zero(x.size());
  r.g_rfm = Vec::Zero(x.size());
  double rfm_norm = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec delta = data.points.col(i) - x;
    double a1 = 0.0, a3 = 0.0, w2 = 0.0;
    for (Index k = 0; k < nk; ++k) {
      const double inv = 1.0 / (1.0 - post.t[static_cast<std::size_t>(k)]);
      const double p = post.p(i, k);
      a1 += p * inv;
      a3 += p * inv * inv * inv;
      w2 += p * inv * inv;
    }
    r.g_fm += a1 * delta;
    r.g_rfm += a3 * delta;
    rfm_norm += w2;
  }
  r.g_rfm /= rfm_norm;

  Vec num = Vec::Zero(x.size());
  double den = 0.0;
  r.h_de = Vec::Zero(x.size());
  for (Index i = 0; i < n; ++i) {
    const double r2 = dist_row(data, i, x);
    const double omega = 1.0 / (r2 + cfg.epsilon);
    num += post.pi(i) * omega * data.points.col(i);
    den += post.pi(i) * omega;
    const double q = std::sqrt(r2 + cfg.c0);
    if (q > 0.0) r.h_de += post.pi(i) * (x - data.points.col(i)) / q;
  }
  if (!std::isfinite(den) || !(den > 0.0)) {
    // x sits on a data point with epsilon = 0: the weight concentrates there.
    num.setZero();
    den = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (dist_row(data, i, x) == 0.0 && post.pi(i) > 0.0) {
        num += post.pi(i) * data.points.col(i);
        den += post.pi(i);
      }
    }
    if (!(den > 0.0)) throw NumericError("oracle: OSL weights are degenerate");
  }
  r.s_hat = num / den;
  r.f_os = r.s_hat - x;
  return r;
}

}  // namespace

MinimizerReport minimizer_report(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg) {
  return report_from(x, dataset, cfg, joint_posterior(x, dataset, cfg));
}

Vec fm_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg, FmWeight weight) {
  const MinimizerReport r = minimizer_report(x, dataset, cfg);
  return weight == FmWeight::none ? r.g_fm : r.g_rfm;
}

OslMinimizer osl_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg) {
  const MinimizerReport r = minimizer_report(x, dataset, cfg);
  return {r.s_hat, r.f_os};
}

Vec del_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg) {
  return minimizer_report(x, dataset, cfg).h_de;
}

std::vector<MinimizerReport> minimizer_reports(const Mat& xs, const PointCloud& dataset, const OracleConfig& cfg,
                                               Exec exec) {
  std::vector<MinimizerReport> out(static_cast<std::size_t>(xs.cols()));
  if (exec == Exec::serial) {
    for (Index j = 0; j < xs.cols(); ++j) out[static_cast<std::size_t>(j)] = minimizer_report(xs.col(j), dataset, cfg);
    return out;
  }
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (Index j = 0; j < xs.cols(); ++j) {
    try {
      out[static_cast<std::size_t>(j)] = minimizer_report(xs.col(j), dataset, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double angle_between(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("angle undefined for a zero vector");
  const Vec ua = a / na, ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

AngleReport angle_analysis(const MinimizerReport& report) {
  const Vec h = -report.h_de;
  AngleReport r;
  r.angle_os_fm = angle_between(report.f_os, report.g_fm);
  r.angle_os_de = angle_between(report.f_os, h);
  r.angle_fm_de = angle_between(report.g_fm, h);
  const double den = r.angle_os_de + r.angle_fm_de;
  if (den < 1e-12) {
    r.additivity_ratio = std::numeric_limits<double>::quiet_NaN();
    r.degenerate = true;
  } else {
    r.additivity_ratio = r.angle_os_fm / den;
    r.degenerate = r.angle_os_fm < 1e-12;
  }
  return r;
}

double radial_family_check(const Vec& x, const Vec& s_closest, double c, int sign) {
  if (x.size() != s_closest.size()) throw ShapeError("radial_family_check: dimension mismatch");
  if (sign != 1 && sign != -1) throw ArgumentError("radial_family_check: sign must be +1 or -1");
  if (!(c >= 0.0)) throw ArgumentError("radial_family_check: C must be >= 0");
  const Vec r = x - s_closest;
  const double root = std::sqrt(r.squaredNorm() + c);
  const double d = sign * root;
  if (d == 0.0) throw DomainError("radial_family_check: singular family member (d = 0)");
  const Vec grad = (sign / root) * r;
  return (x - d * grad - s_closest).norm();
}

McEstimate mc_minimizers(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg, Index samples,
                         std::uint64_t seed) {
  dataset.validate();
  cfg.validate(dataset.dim());
  if (samples < 2) throw ArgumentError("mc_minimizers: need at least 2 samples");
  const GmmSpec src = source_or_default(cfg, dataset.dim());
  const QuadratureSpec q = effective_quad(cfg);
  const Index n = dataset.size();
  const Index dim = dataset.dim();
  const double d = static_cast<double>(dim);
  std::mt19937_64 rng = make_stream(seed, 0);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::uniform_real_distribution<double> ut(q.t_min, q.t_max);
  std::vector<double> cw;
  for (const auto& c : src.components) cw.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick_c(cw.begin(), cw.end());

  std::vector<Index> idx(static_cast<std::size_t>(samples));
  std::vector<double> ts(idx.size()), lw(idx.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const Index i = pick(rng);
    const double t = ut(rng);
    const auto& comp = src.components[src.components.size() == 1 ? 0 : pick_c(rng)];
    const double a = 1.0 - t;
    const double sig = a * comp.sigma;
    const double r2 = (x - a * comp.mean - t * dataset.points.col(i)).squaredNorm();
    idx[s] = i;
    ts[s] = t;
    lw[s] = -d * std::log(sig) - r2 / (2.0 * sig * sig);
    top = std::max(top, lw[s]);
  }
  std::vector<double> w(idx.size());
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    w[s] = std::exp(lw[s] - top);
    sw += w[s];
    sw2 += w[s] * w[s];
  }

  std::vector<Vec> hvec(static_cast<std::size_t>(n));
  std::vector<double> omega(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double r2 = dist_row(dataset, i, x);
    hvec[static_cast<std::size_t>(i)] = (x - dataset.points.col(i)) / std::sqrt(r2 + cfg.c0);
    omega[static_cast<std::size_t>(i)] = 1.0 / (r2 + cfg.epsilon);
  }

  // Self-normalised estimates sum(v f) / sum(v) with weights v.
  auto ratio = [&](auto weight, auto value, Index width, Vec& mean, Vec& se) {
    double sv = 0.0;
    mean = Vec::Zero(width);
    for (std::size_t s = 0; s < w.size(); ++s) {
      const double v = weight(s);
      sv += v;
      mean += v * value(s);
    }
    mean /= sv;
    Vec acc = Vec::Zero(width);
    for (std::size_t s = 0; s < w.size(); ++s) {
      const double v = weight(s);
      acc += (v * v) * (value(s) - mean).array().square().matrix();
    }
    se = acc.cwiseSqrt() / sv;
  };

  McEstimate est;
  auto unit = [&](std::size_t s) { return w[s]; };
  ratio(unit, [&](std::size_t s) { Vec e = Vec::Zero(n); e(idx[s]) = 1.0; return e; }, n, est.mean.pi, est.se.pi);
  auto delta = [&](std::size_t s) -> Vec { return (dataset.points.col(idx[s]) - x) / (1.0 - ts[s]); };
  ratio(unit, delta, dim, est.mean.g_fm, est.se.g_fm);
  ratio([&](std::size_t s) { const double a = 1.0 - ts[s]; return w[s] / (a * a); }, delta, dim, est.mean.g_rfm,
        est.se.g_rfm);
  ratio([&](std::size_t s) { return w[s] * omega[static_cast<std::size_t>(idx[s])]; },
        [&](std::size_t s) -> Vec { return dataset.points.col(idx[s]); }, dim, est.mean.s_hat, est.se.s_hat);
  est.mean.f_os = est.mean.s_hat - x;
  est.se.f_os = est.se.s_hat;
  ratio(unit, [&](std::size_t s) -> Vec { return hvec[static_cast<std::size_t>(idx[s])]; }, dim, est.mean.h_de,
        est.se.h_de);
  est.ess = sw * sw / sw2;
  return est;
}

std::string_view to_string(MinimizerKind k) {
  switch (k) {
    case MinimizerKind::fm: return "fm";
    case MinimizerKind::rfm: return "rfm";
    case MinimizerKind::osl: return "osl";
    case MinimizerKind::del: return "del";
  }
  return "?";
}

MinimizerKind parse_minimizer_kind(std::string_view s) {
  for (MinimizerKind k : {MinimizerKind::fm, MinimizerKind::rfm, MinimizerKind::osl, MinimizerKind::del})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown minimizer kind '" + std::string(s) + "'");
}

double OracleTrajectory::mean_turning_deg() const {
  if (turning_angles_deg.empty()) return 0.0;
  return std::accumulate(turning_angles_deg.begin(), turning_angles_deg.end(), 0.0) /
         static_cast<double>(turning_angles_deg.size());
}

namespace {

template <class Direction, class Distance>
OracleTrajectory march(const Vec& x0, double eta, Index steps, Direction direction, Distance distance) {
  if (!(eta >= 0.0)) throw ArgumentError("oracle_trajectory: eta must be >= 0");
  if (steps < 1) throw ArgumentError("oracle_trajectory: steps must be >= 1");
  OracleTrajectory out;
  Vec x = x0;
  out.path.states.push_back(x);
  out.path.step_norms.push_back(0.0);
  out.path.u_values.push_back(distance(x));
  Vec prev_step;
  for (Index k = 0; k < steps; ++k) {
    const Vec step = eta * direction(x);
    ++out.path.nfe;
    x += step;
    if (!x.allFinite()) throw NumericError("oracle_trajectory: non-finite state at step " + std::to_string(k + 1));
    out.path.states.push_back(x);
    out.path.step_norms.push_back(step.norm());
    out.path.u_values.push_back(distance(x));
    if (k > 0 && prev_step.norm() > 0.0 && step.norm() > 0.0) {
      out.turning_angles_deg.push_back(angle_between(prev_step, step) * 180.0 / std::numbers::pi);
    }
    prev_step = step;
  }
  return out;
}

Vec denoising(const MinimizerReport& r, MinimizerKind kind) {
  switch (kind) {
    case MinimizerKind::fm: return r.g_fm;
    case MinimizerKind::rfm: return r.g_rfm;
    case MinimizerKind::osl: return r.f_os;
    case MinimizerKind::del: return -r.h_de;
  }
  return r.g_fm;
}

}  // namespace

OracleTrajectory oracle_trajectory(const Vec& x0, MinimizerKind kind, const PointCloud& dataset,
                                   const OracleConfig& cfg, double eta, Index steps) {
  auto dir = [&](const Vec& x) { return denoising(minimizer_report(x, dataset, cfg), kind); };
  auto dist = [&](const Vec& x) { return std::sqrt((dataset.points.colwise() - x).colwise().squaredNorm().minCoeff()); };
  return march(x0, eta, steps, dir, dist);
}

OracleTrajectory oracle_trajectory(const Vec& x0, MinimizerKind kind, const GmmOracleConfig& cfg, double eta,
                                   Index steps) {
  cfg.validate();
  double min_ess = std::numeric_limits<double>::infinity();
  auto dir = [&](const Vec& x) {
    const GmmMinimizers m = gmm_minimizers(x, cfg);
    min_ess = std::min(min_ess, m.ess);
    switch (kind) {
      case MinimizerKind::fm: return m.g_fm;
      case MinimizerKind::rfm: return m.g_rfm;
      case MinimizerKind::osl: return m.f_os;
      case MinimizerKind::del: return Vec(-m.h_de);
    }
    return m.g_fm;
  };
  auto dist = [&](const Vec& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cfg.target.components) best = std::min(best, (x - c.mean).norm());
    return best;
  };
  OracleTrajectory out = march(x0, eta, steps, dir, dist);
  for (const Vec& x : out.path.states) {
    out.log_density.push_back(cfg.target.log_density(x));
    out.outlierness.push_back(outlierness(x, cfg.target));
  }
  out.min_ess = min_ess;
  if (min_ess < cfg.ess_floor) {
    out.ess_warning = true;
    out.warning = "importance-sampling ESS " + std::to_string(min_ess) + " below floor " +
                  std::to_string(cfg.ess_floor);
  }
  return out;
}

}  // namespace dmarch
