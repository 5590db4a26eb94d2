#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmarch/assignment.hpp"
#include "dmarch/metrics.hpp"
#include "helpers.hpp"

using namespace dmarch;

namespace {

double brute_w2(const Mat& a, const Mat& b) {
  std::vector<Index> perm(static_cast<std::size_t>(a.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0;
    for (Index i = 0; i < a.cols(); ++i) c += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).squaredNorm();
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.cols()));
}

double brute_hausdorff(const Mat& a, const Mat& b) {
  auto directed = [](const Mat& p, const Mat& q) {
    double worst = 0;
    for (Index i = 0; i < p.cols(); ++i) {
      double best = 1e300;
      for (Index j = 0; j < q.cols(); ++j) best = std::min(best, (p.col(i) - q.col(j)).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

double brute_chamfer(const Mat& a, const Mat& b) {
  auto directed = [](const Mat& p, const Mat& q) {
    double s = 0;
    for (Index i = 0; i < p.cols(); ++i) {
      double best = 1e300;
      for (Index j = 0; j < q.cols(); ++j) best = std::min(best, (p.col(i) - q.col(j)).squaredNorm());
      s += best;
    }
    return s / static_cast<double>(p.cols());
  };
  return directed(a, b) + directed(b, a);
}

}  // namespace

TEST_CASE("metrics match brute force on small clouds") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Mat a = test::random_points(2, 3, s), b = test::random_points(2, 3, s + 100);
    CHECK(w2(a, b).value == doctest::Approx(brute_w2(a, b)).epsilon(1e-12));
    CHECK(w2(a, b).method == "exact");
    CHECK(hausdorff(a, b) == doctest::Approx(brute_hausdorff(a, b)).epsilon(1e-12));
    CHECK(chamfer(a, b) == doctest::Approx(brute_chamfer(a, b)).epsilon(1e-12));
  }
  const Mat a = test::random_points(3, 7, 5), b = test::random_points(3, 7, 6);
  CHECK(w2(a, b).value == doctest::Approx(brute_w2(a, b)).epsilon(1e-12));
}

TEST_CASE("one-point clouds") {
  Mat a(1, 1), b(1, 1);
  a << 0.0;
  b << 3.0;
  CHECK(chamfer(a, b) == 18.0);
  CHECK(hausdorff(a, b) == 3.0);
  Mat c(1, 2);
  c << 0.0, 10.0;
  CHECK(hausdorff(c, a) == 10.0);
}

TEST_CASE("identical clouds score zero") {
  const Mat a = test::random_points(2, 50, 3);
  const MetricReport m = cloud_metrics(a, a);
  CHECK(m.w2 == 0.0);
  CHECK(m.hausdorff == 0.0);
  CHECK(m.chamfer == 0.0);
}

TEST_CASE("hungarian assignment is optimal") {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Mat cost = squared_distances(test::random_points(2, 6, s), test::random_points(2, 6, s + 50));
    const auto asg = solve_assignment(cost);
    double c = 0;
    for (Index i = 0; i < 6; ++i) c += cost(i, asg[static_cast<std::size_t>(i)]);
    std::vector<Index> perm{0, 1, 2, 3, 4, 5};
    double best = 1e300;
    do {
      double t = 0;
      for (Index i = 0; i < 6; ++i) t += cost(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(c == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("large clouds fall back to subsampled exact W2") {
  const Mat a = test::random_points(2, 600, 1), b = test::random_points(2, 600, 2);
  const W2Result r = w2(a, b, 100, 3);
  CHECK(r.method == "subsample_exact");
  CHECK(r.subsample == 100);
  CHECK(r.repeats == 5);
  CHECK(w2(a, b, 100, 3).value == r.value);
}

TEST_CASE("nearest neighbours: serial and parallel agree, ties go low") {
  const Mat q = test::random_points(4, 300, 1), r = test::random_points(4, 200, 2);
  const NearestResult s = kernels::nearest_serial(q, r), p = kernels::nearest_omp(q, r);
  CHECK(s.index == p.index);
  CHECK(s.dist2 == p.dist2);
  Mat dup(1, 3);
  dup << 1.0, 1.0, 5.0;
  Mat one(1, 1);
  one << 1.0;
  CHECK(nearest_neighbors(one, dup).index[0] == 0);
}

TEST_CASE("MAPE is zero for the exact smoothed distance") {
  const PointCloud tg = two_moons(128, 0.05, 1);
  const AnalyticDistanceField f(tg.points, 0.01);
  const PairBatch pairs =
      sample_pairs(tg, 512, TimeDistribution{}, CouplingStrategy{CouplingKind::minibatch_closest_to_interpolant}, 2);
  const MapeReport r = distance_mape(f, pairs, 0.01, 5);
  // x1 is the in-batch nearest target, so u can only under-shoot when the
  // global nearest lies outside the batch.
  CHECK(r.median_ape_u < 1.0);
  CHECK(r.bins.size() == 5);
}

TEST_CASE("coverage: single target and coupon-collector limit") {
  PointCloud one;
  one.points = Mat::Zero(3, 1);
  const CoverageCurve c1 = coverage_curve(one, 64, {0.0, 0.5, 1.0}, 8, 1);
  for (double v : c1.coverage) CHECK(v == 1.0);

  // At t close to 1 every sample's nearest target is its own, so coverage
  // equals the fraction of distinct indices among n draws from N targets.
  PointCloud tg;
  tg.points = 10.0 * test::random_points(5, 200, 4);
  const CoverageCurve c = coverage_curve(tg, 400, {0.99, 0.999}, 8, 5);
  const double expected = 1.0 - std::pow(1.0 - 1.0 / 200.0, 400.0);
  CHECK(c.coverage[0] == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("topk mass") {
  CHECK(topk_mass({5, 1, 1, 1}, 1) == doctest::Approx(5.0 / 8.0));
  CHECK(topk_mass({2, 2}, 8) == 1.0);
}

TEST_CASE("closest coupling concentrates on fewer targets than random coupling") {
  const PointCloud tg = hubness_dataset(64, 256, 0.5, 1);
  const double rnd = coupling_topk_mass(tg, 128, CouplingKind::random, 8, 8, 2);
  const double closest = coupling_topk_mass(tg, 128, CouplingKind::minibatch_closest_with_replacement, 8, 8, 2);
  CHECK(closest > rnd);
}
