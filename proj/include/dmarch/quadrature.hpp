#pragma once

#include <string_view>
#include <vector>

#include "dmarch/common.hpp"

namespace dmarch {

enum class QuadScheme { gauss_legendre, trapezoid };

std::string_view to_string(QuadScheme s);
QuadScheme parse_quad_scheme(std::string_view s);

struct QuadratureSpec {
  Index nodes = 64;
  QuadScheme scheme = QuadScheme::gauss_legendre;
  double t_min = 0.0;
  double t_max = 0.999;

  void validate() const;
};

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(Index n, std::vector<double>& nodes, std::vector<double>& weights);

// Nodes t_k and weights w_k with sum_k w_k f(t_k) ~ int_{t_min}^{t_max} f(t) dt.
// The rule is laid out in tau = -log(1 - t), which refines geometrically
// toward t = 1 where the posterior kernel concentrates.
struct TimeRule {
  std::vector<double> t;
  std::vector<double> w;
};

TimeRule time_rule(const QuadratureSpec& spec);

}  // namespace dmarch
