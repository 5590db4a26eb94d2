#pragma once

#include <array>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace dmarch::svg {

struct Box {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Shapes are given in world coordinates and mapped into a fixed pixel frame
// with the y axis pointing up.
class Canvas {
 public:
  Canvas(Box world, int width = 512, int height = 512, int margin = 24);

  void title(const std::string& text);
  void line(Point a, Point b, const std::string& color, double width = 1.0);
  void polyline(const std::vector<Point>& pts, const std::string& color, double width = 1.0);
  void circle(Point c, double radius_px, const std::string& fill, double opacity = 1.0);
  void arrow(Point from, Point to, const std::string& color, double width = 1.0);
  void text(Point p, const std::string& s, int size = 11, const std::string& color = "#000");
  void axes();

  // With deterministic = false a timestamp comment is added; it is the only
  // part of the document that varies between runs.
  std::string str(bool deterministic) const;
  void save(const std::filesystem::path& path, bool deterministic) const;

  double px(double x) const;
  double py(double y) const;

 private:
  Box world_;
  int width_;
  int height_;
  int margin_;
  std::string title_;
  std::ostringstream body_;
};

std::string num(double v);

// Linear blend between two #rrggbb colors.
std::string mix(const std::string& a, const std::string& b, double t);

// Segments of the iso-line at `level` through a grid of values sampled at
// x_i = box.x_min + i * dx (i < nx) and y_j likewise; values are row-major in y.
std::vector<std::array<Point, 2>> marching_squares(const std::vector<double>& values, int nx, int ny, const Box& box,
                                                   double level);

}  // namespace dmarch::svg
