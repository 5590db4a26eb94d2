#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dmarch/data.hpp"
#include "dmarch/field.hpp"

namespace dmarch {

enum class FmWeight { none, inverse_one_minus_t_sq };

std::string_view to_string(FmWeight w);
FmWeight parse_fm_weight(std::string_view s);

struct LossConfig {
  double epsilon = 0.01;
  double c0 = 0.01;
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  FmWeight fm_weight_mode = FmWeight::none;
  // Drops the OSL denominator (ablation).
  bool unnormalized_osl = false;

  void validate() const;
};

// x - u(x) v(x) for each column of x.
Mat denoise(const Field& field, const Mat& x);
Vec denoise(const Field& field, const Vec& x);

// Per-point loss terms over a pair batch. Each term already carries the 1/n
// factor, so the sum over points is the batch mean.
class OslLoss final : public PointLoss {
 public:
  OslLoss(const PairBatch& pairs, double epsilon, bool unnormalized = false, double weight = 1.0);
  Index size() const override { return pairs_.size(); }
  double term(Index i, double u, const double* v, double& du, double* dv) const override;
  std::string name() const override { return "osl"; }

 private:
  const PairBatch& pairs_;
  double epsilon_;
  bool unnormalized_;
  double weight_;
};

class DelLoss final : public PointLoss {
 public:
  DelLoss(const PairBatch& pairs, double c0, double weight = 1.0);
  Index size() const override { return pairs_.size(); }
  double term(Index i, double u, const double* v, double& du, double* dv) const override;
  std::string name() const override { return "del"; }

 private:
  const PairBatch& pairs_;
  double c0_;
  double weight_;
};

// Flow matching regression of v onto x1 - x0.
class FmLoss final : public PointLoss {
 public:
  FmLoss(const PairBatch& pairs, FmWeight mode);
  Index size() const override { return pairs_.size(); }
  double term(Index i, double u, const double* v, double& du, double* dv) const override;
  std::string name() const override { return "fm"; }

 private:
  const PairBatch& pairs_;
  FmWeight mode_;
};

// lambda1 * OSL + lambda2 * DEL. Also records each point's two components so
// a single gradient pass yields both loss values for logging.
class CombinedLoss final : public PointLoss {
 public:
  CombinedLoss(const PairBatch& pairs, const LossConfig& cfg);
  Index size() const override { return pairs_.size(); }
  double term(Index i, double u, const double* v, double& du, double* dv) const override;
  std::string name() const override { return "combined"; }

  double osl_value() const;
  double del_value() const;

 private:
  const PairBatch& pairs_;
  LossConfig cfg_;
  OslLoss osl_;
  DelLoss del_;
  mutable std::vector<double> osl_terms_;
  mutable std::vector<double> del_terms_;
};

// Sum of the loss terms at the field outputs on loss-specific inputs.
double loss_value(const Field& field, const Mat& x, const PointLoss& loss);

double osl(const Field& field, const PairBatch& pairs, double epsilon, bool unnormalized = false);
double del(const Field& field, const PairBatch& pairs, double c0);
double fm_loss(const Field& field, const PairBatch& pairs, FmWeight mode);
double combined_loss(const Field& field, const PairBatch& pairs, const LossConfig& cfg);

// DEL regression target (x - s) / sqrt(|x - s|^2 + c0).
Vec del_target(const Vec& x, const Vec& s, double c0);

}  // namespace dmarch
