#pragma once

#include <vector>

#include "dmarch/field.hpp"

namespace dmarch::detail {

// Unpacked copy of a model's parameters, with transposed weights so that
// both W*x and W^T*x run as column axpys.
struct NetView {
  struct Layer {
    Index in = 0;
    Index out = 0;
    std::vector<double> w;   // out x in, column-major
    std::vector<double> b;
    std::vector<double> wt;  // in x out, column-major
    Index w_off = 0;
    Index b_off = 0;
  };

  NetView(const FieldConfig& config, const ParamLayout& layout, const Vec& params);

  Index dim = 0;
  Index width = 0;  // last hidden width
  Activation act = Activation::swish;
  FieldMode mode = FieldMode::gradient;
  double scale = 1.0;
  std::vector<Layer> layers;
  std::vector<double> wo;
  double bo = 0.0;
  Index wo_off = 0;
  Index bo_off = 0;
  std::vector<double> wv;   // dim x width
  std::vector<double> bv;
  std::vector<double> wvt;  // width x dim
  Index wv_off = 0;
  Index bv_off = 0;
  Index total = 0;
};

void check_input(const FieldModel& model, const Mat& x);

}  // namespace dmarch::detail
