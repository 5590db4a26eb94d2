#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmarch/data.hpp"
#include "dmarch/field.hpp"

namespace dmarch {

struct NearestResult {
  std::vector<Index> index;
  Vec dist2;
};

// Brute-force nearest neighbour of every query column among the reference
// columns; ties go to the lowest reference index.
NearestResult nearest_neighbors(const Mat& queries, const Mat& refs, Exec exec = Exec::parallel);

namespace kernels {
NearestResult nearest_serial(const Mat& queries, const Mat& refs);
NearestResult nearest_omp(const Mat& queries, const Mat& refs);
}  // namespace kernels

double hausdorff(const Mat& a, const Mat& b);
// Sum of the two directed mean squared nearest-neighbour distances.
double chamfer(const Mat& a, const Mat& b);

struct W2Result {
  double value = 0.0;
  std::string method;  // "exact" or "subsample_exact"
  Index subsample = 0;
  Index repeats = 0;
};

// Exact W2 for equal sizes up to `cap`; above it, the mean of exact W2 over
// 5 disjoint random subsamples of size min(cap, n / 5).
W2Result w2(const Mat& a, const Mat& b, Index cap = 2048, std::uint64_t seed = 0);

struct MetricReport {
  double w2 = 0.0;
  double hausdorff = 0.0;
  double chamfer = 0.0;
  Index n_a = 0;
  Index n_b = 0;
  std::string w2_method;
};

MetricReport cloud_metrics(const Mat& a, const Mat& b, Index cap = 2048, std::uint64_t seed = 0);

struct MapeBin {
  double lo = 0.0;
  double hi = 0.0;
  Index count = 0;
  double mape_u = 0.0;   // percent
  double std_u = 0.0;
  double mape_uv = 0.0;  // percent
  double std_uv = 0.0;
  bool omitted = false;
};

struct MapeReport {
  std::vector<MapeBin> bins;
  double median_ape_u = 0.0;   // percent, over all pairs
  double median_ape_uv = 0.0;  // percent
};

// Bins pairs by |x - x1| and compares u against sqrt(|x - x1|^2 + c0) and
// |u v| against |x - x1|.
MapeReport distance_mape(const Field& field, const PairBatch& pairs, double c0, Index n_bins = 10);

struct CoverageCurve {
  std::vector<double> t_lo;
  std::vector<double> t_hi;
  std::vector<double> coverage;
  std::vector<double> topk_mass;
  Index k = 8;
};

// Per t-bin: n_per_bin points x = (1-t) x0 + t s (standard normal x0 and a
// uniform target index), each assigned to its nearest target.
CoverageCurve coverage_curve(const PointCloud& target, Index n_per_bin, const std::vector<double>& t_edges, Index k,
                             std::uint64_t seed, Exec exec = Exec::parallel);

// Share of the total count held by the k largest entries.
double topk_mass(const std::vector<Index>& counts, Index k);

// Top-k share of target usage over n_batches minibatches of sample_pairs.
double coupling_topk_mass(const PointCloud& target, Index batch, CouplingKind coupling, Index n_batches, Index k,
                          std::uint64_t seed);

}  // namespace dmarch
