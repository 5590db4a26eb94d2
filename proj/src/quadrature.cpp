#include <cmath>
#include <numbers>
#include <string>

#include "dmarch/quadrature.hpp"

namespace dmarch {

std::string_view to_string(QuadScheme s) { return s == QuadScheme::gauss_legendre ? "gauss_legendre" : "trapezoid"; }

QuadScheme parse_quad_scheme(std::string_view s) {
  if (s == "gauss_legendre") return QuadScheme::gauss_legendre;
  if (s == "trapezoid") return QuadScheme::trapezoid;
  throw ConfigError("unknown quadrature scheme '" + std::string(s) + "'");
}

void QuadratureSpec::validate() const {
  if (nodes < 8) throw ConfigError("quadrature.nodes must be >= 8");
  if (!(t_max < 1.0)) throw ConfigError("quadrature.t_max must be < 1 (a node at t = 1 is singular)");
  if (!(t_min >= 0.0)) throw ConfigError("quadrature.t_min must be >= 0");
  if (!(t_min < t_max)) throw ConfigError("quadrature.t_min must be < t_max");
}

void gauss_legendre(Index n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ArgumentError("gauss_legendre: n must be >= 1");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  const Index half = (n + 1) / 2;
  for (Index i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (Index k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * static_cast<double>(k) - 1.0) * z * p1 - (static_cast<double>(k) - 1.0) * p2) /
             static_cast<double>(k);
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[static_cast<std::size_t>(i)] = -z;
    nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

TimeRule time_rule(const QuadratureSpec& spec) {
  spec.validate();
  const double a = -std::log1p(-spec.t_min);
  const double b = -std::log1p(-spec.t_max);
  const auto n = static_cast<std::size_t>(spec.nodes);
  TimeRule rule;
  rule.t.resize(n);
  rule.w.resize(n);
  std::vector<double> z, zw;
  if (spec.scheme == QuadScheme::gauss_legendre) {
    gauss_legendre(spec.nodes, z, zw);
    for (std::size_t k = 0; k < n; ++k) {
      const double tau = 0.5 * (b - a) * z[k] + 0.5 * (b + a);
      const double one_minus_t = std::exp(-tau);
      rule.t[k] = -std::expm1(-tau);
      rule.w[k] = 0.5 * (b - a) * zw[k] * one_minus_t;
    }
  } else {
    const double h = (b - a) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      const double tau = a + h * static_cast<double>(k);
      const double one_minus_t = std::exp(-tau);
      rule.t[k] = -std::expm1(-tau);
      rule.w[k] = (k == 0 || k + 1 == n ? 0.5 : 1.0) * h * one_minus_t;
    }
  }
  return rule;
}

}  // namespace dmarch
