#include "dmarch/plots.hpp"

#include <algorithm>
#include <cmath>

namespace dmarch::plots {

using svg::Box;
using svg::Canvas;
using svg::Point;

namespace {

Point pt(const Vec& v) { return {v(0), v(1)}; }

void require_2d(Index d, const char* what) {
  if (d != 2) throw ShapeError(std::string(what) + ": plots need 2D points");
}

}  // namespace

std::vector<double> quantile_levels(std::vector<double> values, int n_levels) {
  std::vector<double> levels;
  if (values.empty() || n_levels <= 0) return levels;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  for (int k = 1; k <= n_levels; ++k) {
    const double q = static_cast<double>(k) / (n_levels + 1);
    levels.push_back(values[std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n - 1)))]);
  }
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

Box bounding_box(const Mat& points, double pad) {
  require_2d(points.rows(), "bounding_box");
  if (points.cols() == 0) return {};
  const Vec lo = points.rowwise().minCoeff();
  const Vec hi = points.rowwise().maxCoeff();
  const double ex = std::max(hi(0) - lo(0), 1e-6), ey = std::max(hi(1) - lo(1), 1e-6);
  return {lo(0) - pad * ex, hi(0) + pad * ex, lo(1) - pad * ey, hi(1) + pad * ey};
}

Canvas level_set(const Field& field, const LevelSetOptions& opts) {
  require_2d(field.dim(), "level_set");
  if (opts.grid < 2) throw ArgumentError("level_set: grid must be >= 2");
  const Box& b = opts.box;
  const int n = opts.grid;
  Mat grid(2, static_cast<Index>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      grid(0, j * n + i) = b.x_min + (b.x_max - b.x_min) * i / (n - 1);
      grid(1, j * n + i) = b.y_min + (b.y_max - b.y_min) * j / (n - 1);
    }
  }
  const BatchOutput out = field.eval_batch(grid);
  std::vector<double> values(out.u.data(), out.u.data() + out.u.size());

  Canvas c(b);
  c.title(opts.title);
  c.axes();
  const auto levels = quantile_levels(values, opts.n_levels);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double t = levels.size() > 1 ? static_cast<double>(k) / static_cast<double>(levels.size() - 1) : 0.0;
    const std::string color = svg::mix("#2c7bb6", "#d7191c", t);
    for (const auto& seg : svg::marching_squares(values, n, n, b, levels[k])) c.line(seg[0], seg[1], color, 1.0);
  }
  if (opts.overlay != nullptr) {
    require_2d(opts.overlay->rows(), "level_set overlay");
    for (Index j = 0; j < opts.overlay->cols(); ++j) c.circle(pt(opts.overlay->col(j)), 1.0, "#444", 0.5);
  }
  if (opts.arrows > 0) {
    const int m = opts.arrows;
    Mat at(2, static_cast<Index>(m) * m);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        at(0, j * m + i) = b.x_min + (b.x_max - b.x_min) * (i + 0.5) / m;
        at(1, j * m + i) = b.y_min + (b.y_max - b.y_min) * (j + 0.5) / m;
      }
    }
    const BatchOutput a = field.eval_batch(at);
    const double cell = 0.4 * std::min(b.x_max - b.x_min, b.y_max - b.y_min) / m;
    for (Index k = 0; k < at.cols(); ++k) {
      const double norm = a.v.col(k).norm();
      if (!(norm > 0.0)) continue;
      const Vec dir = -a.v.col(k) / norm;
      c.arrow(pt(at.col(k)), pt(at.col(k) + cell * dir), "#333", 0.8);
    }
  }
  return c;
}

Canvas oracle_arrows(const Mat& xs, const std::vector<MinimizerReport>& reports, const Mat& dataset, const Box& box,
                     const std::string& title) {
  require_2d(xs.rows(), "oracle_arrows");
  if (static_cast<Index>(reports.size()) != xs.cols()) throw ShapeError("oracle_arrows: one report per query");
  Canvas c(box);
  c.title(title);
  c.axes();
  for (Index j = 0; j < dataset.cols(); ++j) c.circle(pt(dataset.col(j)), 2.0, "#000", 0.6);
  const double scale = 0.08 * std::min(box.x_max - box.x_min, box.y_max - box.y_min);
  for (Index j = 0; j < xs.cols(); ++j) {
    const auto& r = reports[static_cast<std::size_t>(j)];
    const Vec x = xs.col(j);
    c.circle(pt(x), 2.0, "#555");
    auto draw = [&](const Vec& d, const char* color) {
      const double n = d.norm();
      if (n > 0.0) c.arrow(pt(x), pt(x + scale * d / n), color, 1.2);
    };
    draw(r.g_fm, "#d62728");
    draw(r.g_rfm, "#2ca02c");
    draw(r.f_os, "#ff7f0e");
    draw(-r.h_de, "#1f77b4");
  }
  return c;
}

Canvas trajectories(const std::vector<Trajectory>& trajs, const Box& box, const Mat* backdrop,
                    const std::string& title) {
  Canvas c(box);
  c.title(title);
  c.axes();
  if (backdrop != nullptr) {
    require_2d(backdrop->rows(), "trajectories backdrop");
    for (Index j = 0; j < backdrop->cols(); ++j) c.circle(pt(backdrop->col(j)), 1.0, "#bbb", 0.6);
  }
  for (const auto& tr : trajs) {
    if (tr.states.empty()) continue;
    require_2d(tr.states.front().size(), "trajectories");
    std::vector<Point> path;
    for (const auto& s : tr.states) path.push_back(pt(s));
    c.polyline(path, "#999", 0.5);
    const std::size_t n = tr.states.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 1.0;
      const std::string color = t < 0.5 ? svg::mix("#000000", "#ffd700", 2.0 * t) : svg::mix("#ffd700", "#1f4fff", 2.0 * t - 1.0);
      c.circle(path[i], 1.8, color);
    }
  }
  return c;
}

Canvas scatter(const std::vector<const Mat*>& clouds, const std::vector<std::string>& colors, const Box& box,
               const std::string& title) {
  if (clouds.size() != colors.size()) throw ArgumentError("scatter: one color per cloud");
  Canvas c(box);
  c.title(title);
  c.axes();
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    require_2d(clouds[k]->rows(), "scatter");
    for (Index j = 0; j < clouds[k]->cols(); ++j) c.circle(pt(clouds[k]->col(j)), 1.0, colors[k], 0.5);
  }
  return c;
}

Canvas curves(const std::vector<Series>& series, const std::string& title) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("curves: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  const double px = 0.05 * (x1 - x0), py = 0.08 * (y1 - y0);
  Box box{x0 - px, x1 + px, y0 - py, y1 + py};
  Canvas c(box, 560, 400, 40);
  c.title(title);
  c.axes();
  c.text({box.x_min, box.y_min}, svg::num(y0) + " .. " + svg::num(y1), 10, "#555");
  double ly = y1;
  for (const auto& s : series) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts.push_back({s.x[i], s.y[i]});
    c.polyline(pts, s.color, 1.5);
    for (const auto& p : pts) c.circle(p, 2.0, s.color);
    if (!s.label.empty()) {
      c.text({x0, ly}, s.label, 11, s.color);
      ly -= 0.06 * (y1 - y0);
    }
  }
  return c;
}

Canvas coverage_plot(const CoverageCurve& curve) {
  Series cov{{}, {}, "#1f77b4", "coverage"};
  Series top{{}, {}, "#d62728", "top-" + std::to_string(curve.k) + " mass"};
  for (std::size_t i = 0; i < curve.coverage.size(); ++i) {
    const double mid = 0.5 * (curve.t_lo[i] + curve.t_hi[i]);
    cov.x.push_back(mid);
    cov.y.push_back(curve.coverage[i]);
    top.x.push_back(mid);
    top.y.push_back(curve.topk_mass[i]);
  }
  return curves({cov, top}, "coverage vs t");
}

}  // namespace dmarch::plots
