#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dmarch/assignment.hpp"
#include "dmarch/metrics.hpp"

namespace dmarch {

namespace {

void check_pair(const Mat& a, const Mat& b) {
  if (a.cols() < 1 || b.cols() < 1) throw ArgumentError("metrics: point clouds must be nonempty");
  if (a.rows() != b.rows()) throw ShapeError("metrics: dimension mismatch");
}

double exact_w2(const Mat& a, const Mat& b) {
  const Mat cost = squared_distances(a, b);
  const std::vector<Index> match = solve_assignment(cost);
  double total = 0.0;
  for (Index i = 0; i < a.cols(); ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return std::sqrt(total / static_cast<double>(a.cols()));
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

}  // namespace

double hausdorff(const Mat& a, const Mat& b) {
  check_pair(a, b);
  const double ab = nearest_neighbors(a, b).dist2.maxCoeff();
  const double ba = nearest_neighbors(b, a).dist2.maxCoeff();
  return std::sqrt(std::max(ab, ba));
}

double chamfer(const Mat& a, const Mat& b) {
  check_pair(a, b);
  return nearest_neighbors(a, b).dist2.mean() + nearest_neighbors(b, a).dist2.mean();
}

W2Result w2(const Mat& a, const Mat& b, Index cap, std::uint64_t seed) {
  check_pair(a, b);
  if (cap < 1) throw ArgumentError("w2: cap must be >= 1");
  const Index n = a.cols();
  if (n <= cap || b.cols() <= cap) {
    if (a.cols() != b.cols()) throw ShapeError("w2: exact mode needs equal cloud sizes");
    return {exact_w2(a, b), "exact", n, 1};
  }
  constexpr Index kRepeats = 5;
  const Index m = std::min({cap, a.cols() / kRepeats, b.cols() / kRepeats});
  std::mt19937_64 rng = make_stream(seed, 0);
  auto perm = [&](Index size) {
    std::vector<Index> p(static_cast<std::size_t>(size));
    std::iota(p.begin(), p.end(), Index{0});
    std::shuffle(p.begin(), p.end(), rng);
    return p;
  };
  const std::vector<Index> pa = perm(a.cols()), pb = perm(b.cols());
  double total = 0.0;
  for (Index r = 0; r < kRepeats; ++r) {
    Mat sa(a.rows(), m), sb(b.rows(), m);
    for (Index j = 0; j < m; ++j) {
      sa.col(j) = a.col(pa[static_cast<std::size_t>(r * m + j)]);
      sb.col(j) = b.col(pb[static_cast<std::size_t>(r * m + j)]);
    }
    total += exact_w2(sa, sb);
  }
  return {total / kRepeats, "subsample_exact", m, kRepeats};
}

MetricReport cloud_metrics(const Mat& a, const Mat& b, Index cap, std::uint64_t seed) {
  const W2Result w = w2(a, b, cap, seed);
  return {w.value, hausdorff(a, b), chamfer(a, b), a.cols(), b.cols(), w.method};
}

MapeReport distance_mape(const Field& field, const PairBatch& pairs, double c0, Index n_bins) {
  if (pairs.size() < 1) throw ArgumentError("distance_mape: empty pair batch");
  if (n_bins < 1) throw ArgumentError("distance_mape: n_bins must be >= 1");
  if (!(c0 >= 0.0)) throw ArgumentError("distance_mape: c0 must be >= 0");
  const BatchOutput out = field.eval_batch(pairs.x);
  const Index n = pairs.size();
  Vec dist(n), ape_u(n), ape_uv(n);
  for (Index i = 0; i < n; ++i) {
    const double d = (pairs.x.col(i) - pairs.s.col(i)).norm();
    const double truth = std::sqrt(d * d + c0);
    dist(i) = d;
    ape_u(i) = truth > 0.0 ? 100.0 * std::abs(out.u(i) - truth) / truth : std::nan("");
    const double uv = std::abs(out.u(i)) * out.v.col(i).norm();
    ape_uv(i) = d > 0.0 ? 100.0 * std::abs(uv - d) / d : std::nan("");
  }
  MapeReport rep;
  const double top = dist.maxCoeff();
  const double width = top > 0.0 ? top / static_cast<double>(n_bins) : 1.0;
  for (Index b = 0; b < n_bins; ++b) {
    MapeBin bin;
    bin.lo = width * static_cast<double>(b);
    bin.hi = width * static_cast<double>(b + 1);
    std::vector<double> us, uvs;
    for (Index i = 0; i < n; ++i) {
      const Index k = std::min(n_bins - 1, static_cast<Index>(dist(i) / width));
      if (k != b) continue;
      if (std::isfinite(ape_u(i))) us.push_back(ape_u(i));
      if (std::isfinite(ape_uv(i))) uvs.push_back(ape_uv(i));
    }
    bin.count = static_cast<Index>(us.size());
    bin.omitted = us.empty();
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) return;
      mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double acc = 0.0;
      for (double x : v) acc += (x - mean) * (x - mean);
      sd = std::sqrt(acc / static_cast<double>(v.size()));
    };
    stats(us, bin.mape_u, bin.std_u);
    stats(uvs, bin.mape_uv, bin.std_uv);
    rep.bins.push_back(bin);
  }
  std::vector<double> all_u, all_uv;
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(ape_u(i))) all_u.push_back(ape_u(i));
    if (std::isfinite(ape_uv(i))) all_uv.push_back(ape_uv(i));
  }
  rep.median_ape_u = median(all_u);
  rep.median_ape_uv = median(all_uv);
  return rep;
}

double topk_mass(const std::vector<Index>& counts, Index k) {
  if (k < 1) throw ArgumentError("topk_mass: k must be >= 1");
  std::vector<Index> sorted = counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const Index total = std::accumulate(sorted.begin(), sorted.end(), Index{0});
  if (total == 0) return 0.0;
  const auto take = static_cast<std::ptrdiff_t>(std::min<std::size_t>(static_cast<std::size_t>(k), sorted.size()));
  const Index top = std::accumulate(sorted.begin(), sorted.begin() + take, Index{0});
  return static_cast<double>(top) / static_cast<double>(total);
}

CoverageCurve coverage_curve(const PointCloud& target, Index n_per_bin, const std::vector<double>& t_edges, Index k,
                             std::uint64_t seed, Exec exec) {
  target.validate();
  if (n_per_bin < 1) throw ArgumentError("coverage_curve: n_per_bin must be >= 1");
  if (t_edges.size() < 2) throw ArgumentError("coverage_curve: need at least two bin edges");
  for (std::size_t b = 0; b + 1 < t_edges.size(); ++b) {
    if (!(t_edges[b] < t_edges[b + 1]) || t_edges[b] < 0.0 || t_edges[b + 1] > 1.0) {
      throw ArgumentError("coverage_curve: bin edges must increase within [0, 1]");
    }
  }
  const Index n = target.size();
  const Index d = target.dim();
  CoverageCurve curve;
  curve.k = k;
  for (std::size_t b = 0; b + 1 < t_edges.size(); ++b) {
    std::mt19937_64 rng = make_stream(seed, b);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::uniform_real_distribution<double> ut(t_edges[b], t_edges[b + 1]);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat x(d, n_per_bin);
    for (Index j = 0; j < n_per_bin; ++j) {
      const Index i = pick(rng);
      const double t = ut(rng);
      for (Index c = 0; c < d; ++c) x(c, j) = (1.0 - t) * normal(rng) + t * target.points(c, i);
    }
    const NearestResult nn = nearest_neighbors(x, target.points, exec);
    std::vector<Index> counts(static_cast<std::size_t>(n), 0);
    for (Index idx : nn.index) ++counts[static_cast<std::size_t>(idx)];
    const auto hit = std::count_if(counts.begin(), counts.end(), [](Index c) { return c > 0; });
    curve.t_lo.push_back(t_edges[b]);
    curve.t_hi.push_back(t_edges[b + 1]);
    curve.coverage.push_back(static_cast<double>(hit) / static_cast<double>(n));
    curve.topk_mass.push_back(topk_mass(counts, k));
  }
  return curve;
}

double coupling_topk_mass(const PointCloud& target, Index batch, CouplingKind coupling, Index n_batches, Index k,
                          std::uint64_t seed) {
  if (n_batches < 1) throw ArgumentError("coupling_topk_mass: n_batches must be >= 1");
  std::vector<Index> counts(static_cast<std::size_t>(target.size()), 0);
  std::mt19937_64 rng = make_stream(seed, 0);
  for (Index b = 0; b < n_batches; ++b) {
    const PairBatch pairs = sample_pairs(target, batch, TimeDistribution{}, CouplingStrategy{coupling}, rng());
    for (Index idx : pairs.target_index) ++counts[static_cast<std::size_t>(idx)];
  }
  return topk_mass(counts, k);
}

}  // namespace dmarch
