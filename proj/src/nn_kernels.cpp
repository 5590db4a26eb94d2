#include <limits>

#include "dmarch/metrics.hpp"

namespace dmarch {

namespace {

void check(const Mat& q, const Mat& r) {
  if (q.rows() != r.rows()) throw ShapeError("nearest neighbours: dimension mismatch");
  if (r.cols() < 1) throw ArgumentError("nearest neighbours: empty reference set");
}

// Squared distance accumulated coordinate by coordinate in a fixed order.
inline double sqdist(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double e = a[k] - b[k];
    s += e * e;
  }
  return s;
}

}  // namespace

namespace kernels {

NearestResult nearest_serial(const Mat& queries, const Mat& refs) {
  check(queries, refs);
  const Index d = queries.rows();
  NearestResult out{std::vector<Index>(static_cast<std::size_t>(queries.cols())), Vec(queries.cols())};
  for (Index i = 0; i < queries.cols(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < refs.cols(); ++j) {
      const double dist = sqdist(queries.col(i).data(), refs.col(j).data(), d);
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    out.index[static_cast<std::size_t>(i)] = best;
    out.dist2(i) = best_d;
  }
  return out;
}

NearestResult nearest_omp(const Mat& queries, const Mat& refs) {
  check(queries, refs);
  const Index d = queries.rows();
  const Index n = queries.cols();
  NearestResult out{std::vector<Index>(static_cast<std::size_t>(n)), Vec(n)};
  const double* q = queries.data();
  const double* r = refs.data();
  const Index m = refs.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const double* qi = q + i * d;
    for (Index j = 0; j < m; ++j) {
      const double dist = sqdist(qi, r + j * d, d);
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    out.index[static_cast<std::size_t>(i)] = best;
    out.dist2(i) = best_d;
  }
  return out;
}

}  // namespace kernels

NearestResult nearest_neighbors(const Mat& queries, const Mat& refs, Exec exec) {
  return exec == Exec::serial ? kernels::nearest_serial(queries, refs) : kernels::nearest_omp(queries, refs);
}

}  // namespace dmarch
