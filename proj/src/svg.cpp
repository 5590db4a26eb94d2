#include "dmarch/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "dmarch/common.hpp"

namespace dmarch::svg {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

int hex(const std::string& c, int pos) { return std::stoi(c.substr(static_cast<std::size_t>(pos), 2), nullptr, 16); }

}  // namespace

std::string mix(const std::string& a, const std::string& b, double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[8];
  int rgb[3];
  for (int k = 0; k < 3; ++k) {
    rgb[k] = static_cast<int>(std::lround((1.0 - t) * hex(a, 1 + 2 * k) + t * hex(b, 1 + 2 * k)));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

Canvas::Canvas(Box world, int width, int height, int margin)
    : world_(world), width_(width), height_(height), margin_(margin) {
  if (!(world.x_max > world.x_min) || !(world.y_max > world.y_min)) throw ArgumentError("svg: empty bounding box");
}

double Canvas::px(double x) const {
  return margin_ + (x - world_.x_min) / (world_.x_max - world_.x_min) * (width_ - 2 * margin_);
}

double Canvas::py(double y) const {
  return height_ - margin_ - (y - world_.y_min) / (world_.y_max - world_.y_min) * (height_ - 2 * margin_);
}

void Canvas::title(const std::string& text) { title_ = text; }

void Canvas::line(Point a, Point b, const std::string& color, double width) {
  body_ << "<line x1=\"" << num(px(a.x)) << "\" y1=\"" << num(py(a.y)) << "\" x2=\"" << num(px(b.x)) << "\" y2=\""
        << num(py(b.y)) << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"/>\n";
}

void Canvas::polyline(const std::vector<Point>& pts, const std::string& color, double width) {
  if (pts.size() < 2) return;
  body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    body_ << (i ? " " : "") << num(px(pts[i].x)) << ',' << num(py(pts[i].y));
  }
  body_ << "\"/>\n";
}

void Canvas::circle(Point c, double radius_px, const std::string& fill, double opacity) {
  body_ << "<circle cx=\"" << num(px(c.x)) << "\" cy=\"" << num(py(c.y)) << "\" r=\"" << num(radius_px)
        << "\" fill=\"" << fill << "\"";
  if (opacity < 1.0) body_ << " fill-opacity=\"" << num(opacity) << "\"";
  body_ << "/>\n";
}

void Canvas::arrow(Point from, Point to, const std::string& color, double width) {
  const double x0 = px(from.x), y0 = py(from.y), x1 = px(to.x), y1 = py(to.y);
  const double dx = x1 - x0, dy = y1 - y0;
  const double len = std::hypot(dx, dy);
  body_ << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y1)
        << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"/>\n";
  if (len < 1e-9) return;
  const double head = std::min(6.0, 0.4 * len);
  const double ux = dx / len, uy = dy / len;
  const double bx = x1 - head * ux, by = y1 - head * uy;
  const double hx = -uy * head * 0.5, hy = ux * head * 0.5;
  body_ << "<polygon points=\"" << num(x1) << ',' << num(y1) << ' ' << num(bx + hx) << ',' << num(by + hy) << ' '
        << num(bx - hx) << ',' << num(by - hy) << "\" fill=\"" << color << "\"/>\n";
}

void Canvas::text(Point p, const std::string& s, int size, const std::string& color) {
  body_ << "<text x=\"" << num(px(p.x)) << "\" y=\"" << num(py(p.y)) << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\" fill=\"" << color << "\">" << escape(s) << "</text>\n";
}

void Canvas::axes() {
  body_ << "<rect x=\"" << margin_ << "\" y=\"" << margin_ << "\" width=\"" << width_ - 2 * margin_ << "\" height=\""
        << height_ - 2 * margin_ << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"0.5\"/>\n";
}

std::string Canvas::str(bool deterministic) const {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!deterministic) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "<!-- generated " << buf << " -->\n";
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
      << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  if (!title_.empty()) {
    out << "<text x=\"" << width_ / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\" "
        << "font-family=\"sans-serif\">" << escape(title_) << "</text>\n";
  }
  out << body_.str() << "</svg>\n";
  return out.str();
}

void Canvas::save(const std::filesystem::path& path, bool deterministic) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << str(deterministic);
}

std::vector<std::array<Point, 2>> marching_squares(const std::vector<double>& values, int nx, int ny, const Box& box,
                                                   double level) {
  if (nx < 2 || ny < 2 || values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)) {
    throw ShapeError("marching_squares: grid shape mismatch");
  }
  const double dx = (box.x_max - box.x_min) / (nx - 1);
  const double dy = (box.y_max - box.y_min) / (ny - 1);
  auto at = [&](int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; };
  auto lerp = [&](int i0, int j0, int i1, int j1) {
    const double a = at(i0, j0), b = at(i1, j1);
    const double t = (a == b) ? 0.5 : (level - a) / (b - a);
    return Point{box.x_min + (i0 + t * (i1 - i0)) * dx, box.y_min + (j0 + t * (j1 - j0)) * dy};
  };
  std::vector<std::array<Point, 2>> segs;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      // Corners: 0 = (i,j), 1 = (i+1,j), 2 = (i+1,j+1), 3 = (i,j+1).
      const int code = (at(i, j) > level ? 1 : 0) | (at(i + 1, j) > level ? 2 : 0) |
                       (at(i + 1, j + 1) > level ? 4 : 0) | (at(i, j + 1) > level ? 8 : 0);
      if (code == 0 || code == 15) continue;
      const Point e0 = lerp(i, j, i + 1, j);          // bottom
      const Point e1 = lerp(i + 1, j, i + 1, j + 1);  // right
      const Point e2 = lerp(i, j + 1, i + 1, j + 1);  // top
      const Point e3 = lerp(i, j, i, j + 1);          // left
      const double centre = 0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
      switch (code) {
        case 1: case 14: segs.push_back({e3, e0}); break;
        case 2: case 13: segs.push_back({e0, e1}); break;
        case 3: case 12: segs.push_back({e3, e1}); break;
        case 4: case 11: segs.push_back({e1, e2}); break;
        case 6: case 9: segs.push_back({e0, e2}); break;
        case 7: case 8: segs.push_back({e3, e2}); break;
        case 5:
          if (centre > level) {
            segs.push_back({e3, e2});
            segs.push_back({e0, e1});
          } else {
            segs.push_back({e3, e0});
            segs.push_back({e1, e2});
          }
          break;
        case 10:
          if (centre > level) {
            segs.push_back({e3, e0});
            segs.push_back({e1, e2});
          } else {
            segs.push_back({e3, e2});
            segs.push_back({e0, e1});
          }
          break;
        default: break;
      }
    }
  }
  return segs;
}

}  // namespace dmarch::svg
