#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmarch/field.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/samplers.hpp"
#include "dmarch/svg.hpp"

namespace dmarch::plots {

struct LevelSetOptions {
  svg::Box box{-2.5, 2.5, -2.5, 2.5};
  int grid = 256;
  int n_levels = 10;
  int arrows = 20;  // arrows per side; 0 disables
  const Mat* overlay = nullptr;  // optional 2D points drawn on top
  std::string title;
};

// Contours of u at quantile levels of the grid values, plus arrows of -v.
svg::Canvas level_set(const Field& field, const LevelSetOptions& opts);

// Quantile levels of a sample, evenly spaced in probability and excluding
// the extremes.
std::vector<double> quantile_levels(std::vector<double> values, int n_levels);

// Minimizer arrows at each query (red FM, green RFM, orange OSL, blue DEL)
// over the dataset points.
svg::Canvas oracle_arrows(const Mat& xs, const std::vector<MinimizerReport>& reports, const Mat& dataset,
                          const svg::Box& box, const std::string& title = "");

// States colored by progress: black at the start, yellow midway, blue at the end.
svg::Canvas trajectories(const std::vector<Trajectory>& trajs, const svg::Box& box, const Mat* backdrop = nullptr,
                         const std::string& title = "");

svg::Canvas scatter(const std::vector<const Mat*>& clouds, const std::vector<std::string>& colors,
                    const svg::Box& box, const std::string& title = "");

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color;
  std::string label;
};

svg::Canvas curves(const std::vector<Series>& series, const std::string& title = "");

svg::Canvas coverage_plot(const CoverageCurve& curve);

// Bounding box of the columns of a 2D cloud, padded by `pad` times its extent.
svg::Box bounding_box(const Mat& points, double pad = 0.1);

}  // namespace dmarch::plots
