#include <cmath>
#include <string>

#include "dmarch/losses.hpp"

namespace dmarch {

std::string_view to_string(FmWeight w) {
  return w == FmWeight::none ? "none" : "inverse_one_minus_t_sq";
}

FmWeight parse_fm_weight(std::string_view s) {
  if (s == "none") return FmWeight::none;
  if (s == "inverse_one_minus_t_sq") return FmWeight::inverse_one_minus_t_sq;
  throw ConfigError("unknown fm weight mode '" + std::string(s) + "'");
}

void LossConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("loss.epsilon must be > 0");
  if (!(c0 > 0.0)) throw ConfigError("loss.c0 must be > 0");
  if (!(lambda1 >= 0.0)) throw ConfigError("loss.lambda1 must be >= 0");
  if (!(lambda2 >= 0.0)) throw ConfigError("loss.lambda2 must be >= 0");
}

Mat denoise(const Field& field, const Mat& x) {
  const BatchOutput out = field.eval_batch(x);
  Mat y = x;
  for (Index j = 0; j < x.cols(); ++j) y.col(j) -= out.u(j) * out.v.col(j);
  return y;
}

Vec denoise(const Field& field, const Vec& x) { return denoise(field, Mat(x)).col(0); }

Vec del_target(const Vec& x, const Vec& s, double c0) {
  const Vec r = x - s;
  return r / std::sqrt(r.squaredNorm() + c0);
}

OslLoss::OslLoss(const PairBatch& pairs, double epsilon, bool unnormalized, double weight)
    : pairs_(pairs), epsilon_(epsilon), unnormalized_(unnormalized), weight_(weight) {
  if (!unnormalized_ && !(epsilon_ > 0.0)) throw ArgumentError("osl: epsilon must be > 0");
}

double OslLoss::term(Index i, double u, const double* v, double& du, double* dv) const {
  const Index d = pairs_.dim();
  const double scale = weight_ / static_cast<double>(pairs_.size());
  double denom = 1.0;
  if (!unnormalized_) denom = (pairs_.x.col(i) - pairs_.s.col(i)).squaredNorm() + epsilon_;
  const double c = scale / denom;
  double acc = 0.0;
  du = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double r = pairs_.x(k, i) - u * v[k] - pairs_.s(k, i);
    acc += r * r;
    du -= 2.0 * c * r * v[k];
    dv[k] = -2.0 * c * r * u;
  }
  return c * acc;
}

DelLoss::DelLoss(const PairBatch& pairs, double c0, double weight) : pairs_(pairs), c0_(c0), weight_(weight) {
  if (!(c0_ >= 0.0)) throw ArgumentError("del: c0 must be >= 0");
}

double DelLoss::term(Index i, double, const double* v, double& du, double* dv) const {
  const Index d = pairs_.dim();
  const double scale = weight_ / static_cast<double>(pairs_.size());
  const double r2 = (pairs_.x.col(i) - pairs_.s.col(i)).squaredNorm();
  const double inv = r2 + c0_ > 0.0 ? 1.0 / std::sqrt(r2 + c0_) : 0.0;
  double acc = 0.0;
  du = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double e = v[k] - (pairs_.x(k, i) - pairs_.s(k, i)) * inv;
    acc += e * e;
    dv[k] = 2.0 * scale * e;
  }
  return scale * acc;
}

FmLoss::FmLoss(const PairBatch& pairs, FmWeight mode) : pairs_(pairs), mode_(mode) {
  for (Index i = 0; i < pairs_.size(); ++i) {
    if (!(pairs_.t(i) < 1.0)) throw DomainError("fm_loss: pair " + std::to_string(i) + " has t >= 1");
  }
}

double FmLoss::term(Index i, double, const double* v, double& du, double* dv) const {
  const Index d = pairs_.dim();
  double w = 1.0;
  if (mode_ == FmWeight::inverse_one_minus_t_sq) {
    const double a = 1.0 - pairs_.t(i);
    w = 1.0 / (a * a);
  }
  const double scale = w / static_cast<double>(pairs_.size());
  double acc = 0.0;
  du = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double e = v[k] - (pairs_.s(k, i) - pairs_.x0(k, i));
    acc += e * e;
    dv[k] = 2.0 * scale * e;
  }
  return scale * acc;
}

CombinedLoss::CombinedLoss(const PairBatch& pairs, const LossConfig& cfg)
    : pairs_(pairs),
      cfg_(cfg),
      osl_(pairs, cfg.epsilon, cfg.unnormalized_osl),
      del_(pairs, cfg.c0),
      osl_terms_(static_cast<std::size_t>(pairs.size()), 0.0),
      del_terms_(static_cast<std::size_t>(pairs.size()), 0.0) {
  cfg_.validate();
}

double CombinedLoss::term(Index i, double u, const double* v, double& du, double* dv) const {
  const Index d = pairs_.dim();
  double du_o = 0.0, du_d = 0.0;
  std::vector<double> dv_o(static_cast<std::size_t>(d)), dv_d(static_cast<std::size_t>(d));
  const double o = osl_.term(i, u, v, du_o, dv_o.data());
  const double e = del_.term(i, u, v, du_d, dv_d.data());
  osl_terms_[static_cast<std::size_t>(i)] = o;
  del_terms_[static_cast<std::size_t>(i)] = e;
  du = cfg_.lambda1 * du_o + cfg_.lambda2 * du_d;
  for (Index k = 0; k < d; ++k) dv[k] = cfg_.lambda1 * dv_o[k] + cfg_.lambda2 * dv_d[k];
  return cfg_.lambda1 * o + cfg_.lambda2 * e;
}

double CombinedLoss::osl_value() const {
  double s = 0.0;
  for (double t : osl_terms_) s += t;
  return s;
}

double CombinedLoss::del_value() const {
  double s = 0.0;
  for (double t : del_terms_) s += t;
  return s;
}

double loss_value(const Field& field, const Mat& x, const PointLoss& loss) {
  if (loss.size() != x.cols()) throw ShapeError("loss size does not match batch size");
  const BatchOutput out = field.eval_batch(x);
  std::vector<double> dv(static_cast<std::size_t>(x.rows()));
  double total = 0.0;
  for (Index i = 0; i < x.cols(); ++i) {
    double du = 0.0;
    total += loss.term(i, out.u(i), out.v.col(i).data(), du, dv.data());
  }
  return total;
}

double osl(const Field& field, const PairBatch& pairs, double epsilon, bool unnormalized) {
  return loss_value(field, pairs.x, OslLoss(pairs, epsilon, unnormalized));
}

double del(const Field& field, const PairBatch& pairs, double c0) {
  return loss_value(field, pairs.x, DelLoss(pairs, c0));
}

double fm_loss(const Field& field, const PairBatch& pairs, FmWeight mode) {
  return loss_value(field, pairs.x, FmLoss(pairs, mode));
}

double combined_loss(const Field& field, const PairBatch& pairs, const LossConfig& cfg) {
  return loss_value(field, pairs.x, CombinedLoss(pairs, cfg));
}

}  // namespace dmarch
