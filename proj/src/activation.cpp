#include <cmath>
#include <string>

#include "dmarch/field.hpp"

namespace dmarch {

namespace {
constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;
}  // namespace

ActivationValue activate(Activation a, double x) {
  switch (a) {
    case Activation::swish: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      const double ds = s * (1.0 - s);
      return {x * s, s + x * ds, ds * (2.0 + x * (1.0 - 2.0 * s))};
    }
    case Activation::selu: {
      if (x > 0.0) return {kSeluLambda * x, kSeluLambda, 0.0};
      const double e = kSeluLambda * kSeluAlpha * std::exp(x);
      return {e - kSeluLambda * kSeluAlpha, e, e};
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      const double dt = 1.0 - t * t;
      return {t, dt, -2.0 * t * dt};
    }
  }
  return {0.0, 0.0, 0.0};
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::swish: return "swish";
    case Activation::selu: return "selu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

std::string_view to_string(FieldMode m) { return m == FieldMode::gradient ? "gradient" : "direct"; }

Activation parse_activation(std::string_view s) {
  if (s == "swish") return Activation::swish;
  if (s == "selu") return Activation::selu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected swish, selu or tanh)");
}

FieldMode parse_field_mode(std::string_view s) {
  if (s == "gradient") return FieldMode::gradient;
  if (s == "direct") return FieldMode::direct;
  throw ConfigError("unknown field mode '" + std::string(s) + "' (expected gradient or direct)");
}

}  // namespace dmarch
