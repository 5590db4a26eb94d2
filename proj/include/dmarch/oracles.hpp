#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dmarch/data.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/quadrature.hpp"
#include "dmarch/samplers.hpp"

namespace dmarch {

// Setting for the finite-dataset minimizers: p_T, the t-quadrature, the
// source law of x0 (standard normal when empty) and the loss constants.
struct OracleConfig {
  TimeDistribution t_dist;
  QuadratureSpec quad;
  GmmSpec source;
  double epsilon = 0.01;
  double c0 = 0.01;

  void validate(Index dim) const;
};

// Posterior over (target index, t-node), marginalised over source components.
struct JointPosterior {
  std::vector<double> t;
  Mat p;   // N x nodes, sums to 1
  Vec pi;  // row sums
};

JointPosterior joint_posterior(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg);

Vec posterior_index(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg);
Vec fm_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg, FmWeight weight);

struct OslMinimizer {
  Vec s_hat;
  Vec f_os;
};

OslMinimizer osl_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg);
// Points away from the data; negate for a denoising direction.
Vec del_minimizer(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg);

struct MinimizerReport {
  Vec pi;
  Vec g_fm;
  Vec g_rfm;
  Vec f_os;
  Vec h_de;
  Vec s_hat;
};

// All four minimizers from one shared posterior.
MinimizerReport minimizer_report(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg);

// One report per column of xs; Exec::parallel sweeps query points with OpenMP.
std::vector<MinimizerReport> minimizer_reports(const Mat& xs, const PointCloud& dataset, const OracleConfig& cfg,
                                               Exec exec = Exec::parallel);

struct AngleReport {
  double angle_os_fm = 0.0;
  double angle_os_de = 0.0;
  double angle_fm_de = 0.0;
  double additivity_ratio = 0.0;
  bool degenerate = false;
};

// Angle between two vectors in [0, pi]; throws NumericError on a zero vector.
double angle_between(const Vec& a, const Vec& b);

// Uses f_os, g_fm and -h_de. A ratio with a vanishing numerator or
// denominator is flagged degenerate (ratio NaN for an empty denominator).
AngleReport angle_analysis(const MinimizerReport& report);

// |x - d grad d - s| for d = sign sqrt(|x - s|^2 + C).
double radial_family_check(const Vec& x, const Vec& s_closest, double c, int sign);

// Monte-Carlo estimate of the same minimizers: draws (i, t, source
// component) from the prior and weights each draw by the Gaussian
// likelihood of x. Each entry carries a delta-method standard error.
struct McEstimate {
  MinimizerReport mean;
  MinimizerReport se;
  double ess = 0.0;
};

McEstimate mc_minimizers(const Vec& x, const PointCloud& dataset, const OracleConfig& cfg, Index samples,
                         std::uint64_t seed);

// Continuous-target (GMM to GMM) setting, estimated by self-normalised
// importance sampling.
struct GmmOracleConfig {
  GmmSpec source;
  GmmSpec target;
  TimeDistribution t_dist;
  double epsilon = 0.5;
  double c0 = 0.5;
  Index samples = 50000;
  std::uint64_t seed = 0;
  double ess_floor = 200.0;

  void validate() const;
};

struct GmmMinimizers {
  Vec g_fm;
  Vec g_rfm;
  Vec f_os;
  Vec h_de;
  double ess = 0.0;
};

// Every call with the same config reuses the same random stream, so the
// estimate is a smooth function of x.
GmmMinimizers gmm_minimizers(const Vec& x, const GmmOracleConfig& cfg);

// -log of the chi-square(D) upper tail at min over target components of |x - mu|^2 / sigma^2.
double outlierness(const Vec& x, const GmmSpec& target);
// -log Q(a, x) for the regularised upper incomplete gamma function.
double neg_log_gamma_q(double a, double x);

enum class MinimizerKind { fm, rfm, osl, del };

std::string_view to_string(MinimizerKind k);
MinimizerKind parse_minimizer_kind(std::string_view s);

struct OracleTrajectory {
  Trajectory path;
  std::vector<double> turning_angles_deg;
  std::vector<double> log_density;  // GMM targets only
  std::vector<double> outlierness;  // GMM targets only
  double min_ess = 0.0;
  bool ess_warning = false;
  std::string warning;

  double mean_turning_deg() const;
};

// x <- x + eta * (denoising direction of the chosen minimizer).
OracleTrajectory oracle_trajectory(const Vec& x0, MinimizerKind kind, const PointCloud& dataset,
                                   const OracleConfig& cfg, double eta, Index steps);
OracleTrajectory oracle_trajectory(const Vec& x0, MinimizerKind kind, const GmmOracleConfig& cfg, double eta,
                                   Index steps);

}  // namespace dmarch
