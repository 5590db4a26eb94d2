#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "dmarch/assignment.hpp"
#include "dmarch/data.hpp"

namespace dmarch {

std::string_view to_string(CloudLabel l) {
  switch (l) {
    case CloudLabel::source: return "source";
    case CloudLabel::target: return "target";
    case CloudLabel::generated: return "generated";
  }
  return "?";
}

void PointCloud::validate() const {
  if (points.cols() < 1 || points.rows() < 1) throw ArgumentError("point cloud must be nonempty");
  if (!points.allFinite()) throw DomainError("point cloud contains non-finite values");
}

void GmmSpec::validate() const {
  if (components.empty()) throw ConfigError("gmm: at least one component required");
  const Index d = components.front().mean.size();
  if (d < 1) throw ConfigError("gmm: component mean must be nonempty");
  double total = 0.0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto& comp = components[c];
    const std::string where = "gmm.components[" + std::to_string(c) + "]";
    if (comp.mean.size() != d) throw ConfigError(where + ".mean: dimension mismatch");
    if (!comp.mean.allFinite()) throw ConfigError(where + ".mean: non-finite");
    if (!(comp.sigma >= 0.0) || !std::isfinite(comp.sigma)) throw ConfigError(where + ".sigma must be >= 0");
    if (!(comp.weight >= 0.0) || !std::isfinite(comp.weight)) throw ConfigError(where + ".weight must be >= 0");
    total += comp.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("gmm: weights must sum to 1");
}

Vec GmmSpec::mean() const {
  Vec m = Vec::Zero(dim());
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

double GmmSpec::log_density(const Vec& x) const {
  const double d = static_cast<double>(dim());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components) {
    if (c.weight <= 0.0) continue;
    const double var = c.sigma * c.sigma;
    const double t = std::log(c.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                     (x - c.mean).squaredNorm() / (2.0 * var);
    terms.push_back(t);
    best = std::max(best, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

namespace {

GmmSpec equal_mixture(const std::vector<Vec>& means, double sigma) {
  GmmSpec spec;
  for (const Vec& m : means) spec.components.push_back({m, sigma, 1.0 / static_cast<double>(means.size())});
  return spec;
}

Vec axis(Index d, Index i, double v) {
  Vec e = Vec::Zero(d);
  e(i) = v;
  return e;
}

}  // namespace

GmmSpec gmm8d_source() { return equal_mixture({axis(8, 0, 4.0), axis(8, 0, -4.0)}, 0.5); }

GmmSpec gmm8d_target() {
  std::vector<Vec> means;
  for (double a : {1.0, -1.0})
    for (double b : {1.0, -1.0}) means.push_back(axis(8, 1, 4.0 * a) + axis(8, 2, 4.0 * b));
  return equal_mixture(means, 0.5);
}

GmmSpec standard_normal(Index dim) { return equal_mixture({Vec::Zero(dim)}, 1.0); }

void TimeDistribution::validate() const {
  if (!(t_min >= 0.0 && t_min < 1.0)) throw ConfigError("t_dist.t_min must lie in [0, 1)");
  if (!(t_max > 0.0 && t_max <= 1.0)) throw ConfigError("t_dist.t_max must lie in (0, 1]");
  if (!(t_min < t_max)) throw ConfigError("t_dist.t_min must be < t_max");
}

double TimeDistribution::density(double t) const {
  return (t >= t_min && t <= t_max) ? 1.0 / (t_max - t_min) : 0.0;
}

double TimeDistribution::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(t_min, t_max);
  return uni(rng);
}

std::string_view to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::random: return "random";
    case CouplingKind::minibatch_ot: return "minibatch_ot";
    case CouplingKind::minibatch_closest_with_replacement: return "minibatch_closest_with_replacement";
    case CouplingKind::minibatch_closest_without_replacement: return "minibatch_closest_without_replacement";
    case CouplingKind::minibatch_closest_to_interpolant: return "minibatch_closest_to_interpolant";
  }
  return "?";
}

CouplingKind parse_coupling(std::string_view s) {
  for (CouplingKind k : {CouplingKind::random, CouplingKind::minibatch_ot,
                         CouplingKind::minibatch_closest_with_replacement,
                         CouplingKind::minibatch_closest_without_replacement,
                         CouplingKind::minibatch_closest_to_interpolant}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown coupling '" + std::string(s) + "'");
}

std::vector<TrainingPair> PairBatch::pairs() const {
  std::vector<TrainingPair> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) out.push_back(pair(i));
  return out;
}

PairBatch PairBatch::from_pairs(const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw ArgumentError("pair list must be nonempty");
  const Index d = pairs.front().x.size();
  const Index n = static_cast<Index>(pairs.size());
  PairBatch b{Mat(d, n), Mat(d, n), Mat(d, n), Vec(n), std::vector<Index>(pairs.size(), -1)};
  for (Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (p.x.size() != d || p.s_data.size() != d) throw ShapeError("pair dimensions differ");
    b.x.col(i) = p.x;
    b.s.col(i) = p.s_data;
    b.x0.col(i) = p.x0.size() == d ? p.x0 : Vec((p.x - p.t * p.s_data) / (1.0 - p.t));
    b.t(i) = p.t;
  }
  return b;
}

PointCloud two_moons(Index n, double noise_std, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("two_moons: n must be >= 1");
  if (!(noise_std >= 0.0)) throw ArgumentError("two_moons: noise_std must be >= 0");
  std::mt19937_64 rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n_outer = n / 2;
  PointCloud cloud{Mat(2, n), CloudLabel::target, seed};
  for (Index i = 0; i < n; ++i) {
    const double a = angle(rng);
    if (i < n_outer) {
      cloud.points(0, i) = std::cos(a);
      cloud.points(1, i) = std::sin(a);
    } else {
      cloud.points(0, i) = 1.0 - std::cos(a);
      cloud.points(1, i) = 0.5 - std::sin(a);
    }
  }
  if (noise_std > 0.0) {
    for (Index i = 0; i < n; ++i)
      for (Index d = 0; d < 2; ++d) cloud.points(d, i) += noise_std * normal(rng);
  }
  return cloud;
}

GmmSpec eight_gaussians_spec(double radius, double std) {
  std::vector<Vec> means;
  for (int k = 0; k < 8; ++k) {
    const double a = std::numbers::pi / 4.0 * k;
    Vec m(2);
    m << radius * std::cos(a), radius * std::sin(a);
    means.push_back(m);
  }
  return equal_mixture(means, std);
}

PointCloud eight_gaussians(Index n, double radius, double std, std::uint64_t seed) {
  if (!(radius > 0.0)) throw ArgumentError("eight_gaussians: radius must be > 0");
  if (!(std >= 0.0)) throw ArgumentError("eight_gaussians: std must be >= 0");
  PointCloud c = gmm_sample(eight_gaussians_spec(radius, std), n, seed);
  c.label = CloudLabel::source;
  return c;
}

namespace {

void draw_gmm(const GmmSpec& spec, Mat& out, std::mt19937_64& rng, std::vector<Index>* component) {
  std::vector<double> w;
  for (const auto& c : spec.components) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < out.cols(); ++i) {
    const std::size_t c = spec.components.size() == 1 ? 0 : pick(rng);
    const auto& comp = spec.components[c];
    for (Index d = 0; d < out.rows(); ++d) out(d, i) = comp.mean(d) + comp.sigma * normal(rng);
    if (component) (*component)[static_cast<std::size_t>(i)] = static_cast<Index>(c);
  }
}

}  // namespace

PointCloud gmm_sample(const GmmSpec& spec, Index n, std::uint64_t seed, std::vector<Index>* component) {
  spec.validate();
  if (n < 1) throw ArgumentError("gmm_sample: n must be >= 1");
  std::mt19937_64 rng = make_stream(seed, 0);
  PointCloud cloud{Mat(spec.dim(), n), CloudLabel::target, seed};
  if (component) component->assign(static_cast<std::size_t>(n), 0);
  draw_gmm(spec, cloud.points, rng, component);
  return cloud;
}

PointCloud gaussian_noise(Index dim, Index n, std::uint64_t seed) {
  PointCloud c = gmm_sample(standard_normal(dim), n, seed);
  c.label = CloudLabel::source;
  return c;
}

PointCloud hubness_dataset(Index dim, Index n, double spread, std::uint64_t seed) {
  if (dim < 1 || n < 1) throw ArgumentError("hubness_dataset: dim and n must be >= 1");
  std::mt19937_64 rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec shared(dim);
  for (Index d = 0; d < dim; ++d) shared(d) = normal(rng);
  PointCloud cloud{Mat(dim, n), CloudLabel::target, seed};
  for (Index j = 0; j < n; ++j) {
    const double scale = std::exp(spread * normal(rng));
    for (Index d = 0; d < dim; ++d) cloud.points(d, j) = scale * (shared(d) + normal(rng));
  }
  return cloud;
}

std::vector<Index> couple(const Mat& x0, const Mat& targets, CouplingKind kind, std::mt19937_64& rng) {
  const Index b = x0.cols();
  const Index m = targets.cols();
  std::vector<Index> out(static_cast<std::size_t>(b));
  switch (kind) {
    case CouplingKind::random: {
      std::uniform_int_distribution<Index> pick(0, m - 1);
      for (auto& o : out) o = pick(rng);
      break;
    }
    case CouplingKind::minibatch_ot: {
      if (m != b) throw ArgumentError("minibatch_ot needs as many targets as sources");
      out = solve_assignment(squared_distances(x0, targets));
      break;
    }
    case CouplingKind::minibatch_closest_with_replacement: {
      for (Index i = 0; i < b; ++i) {
        Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < m; ++j) {
          const double d = (x0.col(i) - targets.col(j)).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        out[static_cast<std::size_t>(i)] = best;
      }
      break;
    }
    case CouplingKind::minibatch_closest_without_replacement: {
      if (b > m) throw ArgumentError("closest coupling without replacement needs batch <= number of targets");
      std::vector<char> used(static_cast<std::size_t>(m), 0);
      for (Index i = 0; i < b; ++i) {
        Index best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < m; ++j) {
          if (used[static_cast<std::size_t>(j)]) continue;
          const double d = (x0.col(i) - targets.col(j)).squaredNorm();
          if (best < 0 || d < best_d) {
            best_d = d;
            best = j;
          }
        }
        used[static_cast<std::size_t>(best)] = 1;
        out[static_cast<std::size_t>(i)] = best;
      }
      break;
    }
    case CouplingKind::minibatch_closest_to_interpolant:
      throw ArgumentError("couple: minibatch_closest_to_interpolant matches interpolants, use sample_pairs");
  }
  return out;
}

PairBatch sample_pairs(const PointCloud& target, Index batch, const TimeDistribution& t_dist,
                       const CouplingStrategy& coupling, std::uint64_t seed, const GmmSpec* source) {
  target.validate();
  t_dist.validate();
  if (batch < 1) throw ArgumentError("sample_pairs: batch must be >= 1");
  const Index n = target.size();
  const Index d = target.dim();
  if (coupling.kind == CouplingKind::minibatch_closest_without_replacement && batch > n) {
    throw ArgumentError("sample_pairs: batch " + std::to_string(batch) + " exceeds target size " +
                        std::to_string(n) + " for closest coupling without replacement");
  }
  if (source && source->dim() != d) throw ShapeError("sample_pairs: source and target dimensions differ");

  std::mt19937_64 rng = make_stream(seed, 0);
  PairBatch out{Mat(d, batch), Mat(d, batch), Mat(d, batch), Vec(batch), {}};
  if (source) {
    source->validate();
    draw_gmm(*source, out.x0, rng, nullptr);
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < batch; ++i)
      for (Index k = 0; k < d; ++k) out.x0(k, i) = normal(rng);
  }

  std::vector<Index> pool;
  if (coupling.kind == CouplingKind::random || coupling.kind == CouplingKind::minibatch_closest_to_interpolant) {
    std::uniform_int_distribution<Index> pick(0, n - 1);
    pool.resize(static_cast<std::size_t>(batch));
    for (auto& p : pool) p = pick(rng);
    out.target_index = pool;
  } else {
    // Minibatch of targets: distinct indices when possible.
    if (batch <= n) {
      std::vector<Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), Index{0});
      for (Index i = 0; i < batch; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
      }
      pool.assign(perm.begin(), perm.begin() + batch);
    } else {
      std::uniform_int_distribution<Index> pick(0, n - 1);
      pool.resize(static_cast<std::size_t>(batch));
      for (auto& p : pool) p = pick(rng);
    }
    Mat candidates(d, batch);
    for (Index i = 0; i < batch; ++i) candidates.col(i) = target.points.col(pool[static_cast<std::size_t>(i)]);
    const std::vector<Index> match = couple(out.x0, candidates, coupling.kind, rng);
    out.target_index.resize(static_cast<std::size_t>(batch));
    for (Index i = 0; i < batch; ++i)
      out.target_index[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(match[static_cast<std::size_t>(i)])];
  }

  for (Index i = 0; i < batch; ++i) {
    const double t = t_dist.sample(rng);
    out.t(i) = t;
    out.s.col(i) = target.points.col(out.target_index[static_cast<std::size_t>(i)]);
    out.x.col(i) = (1.0 - t) * out.x0.col(i) + t * out.s.col(i);
  }
  if (coupling.kind == CouplingKind::minibatch_closest_to_interpolant) {
    for (Index i = 0; i < batch; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < batch; ++j) {
        const double dj = (out.x.col(i) - target.points.col(pool[static_cast<std::size_t>(j)])).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      out.target_index[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(best)];
      out.s.col(i) = target.points.col(pool[static_cast<std::size_t>(best)]);
    }
  }
  return out;
}

}  // namespace dmarch
