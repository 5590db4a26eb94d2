#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dmarch/common.hpp"

namespace dmarch {

enum class CloudLabel { source, target, generated };

std::string_view to_string(CloudLabel l);

struct PointCloud {
  Mat points;  // dim x n
  CloudLabel label = CloudLabel::target;
  std::uint64_t seed = 0;

  Index dim() const { return points.rows(); }
  Index size() const { return points.cols(); }
  void validate() const;
};

struct GmmComponent {
  Vec mean;
  double sigma = 1.0;  // isotropic standard deviation
  double weight = 1.0;
};

struct GmmSpec {
  std::vector<GmmComponent> components;

  Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }
  void validate() const;
  Vec mean() const;
  double log_density(const Vec& x) const;
};

// Source and target mixtures of the 8D analysis setup.
GmmSpec gmm8d_source();
GmmSpec gmm8d_target();
GmmSpec standard_normal(Index dim);

enum class TimeKind { uniform };

struct TimeDistribution {
  TimeKind kind = TimeKind::uniform;
  double t_min = 0.0;
  double t_max = 0.999;

  void validate() const;
  double density(double t) const;
  double sample(std::mt19937_64& rng) const;
};

enum class CouplingKind {
  random,
  minibatch_ot,
  minibatch_closest_with_replacement,
  minibatch_closest_without_replacement,
  // x0 is paired at random; after interpolation the target is replaced by the
  // in-batch target nearest to x (with replacement).
  minibatch_closest_to_interpolant,
};

std::string_view to_string(CouplingKind k);
CouplingKind parse_coupling(std::string_view s);

struct CouplingStrategy {
  CouplingKind kind = CouplingKind::minibatch_closest_without_replacement;
};

struct TrainingPair {
  Vec x;
  Vec s_data;
  double t = 0.0;
  Vec x0;
};

// A batch of interpolation pairs stored column-wise. target_index records which
// target point each column was paired with.
struct PairBatch {
  Mat x;
  Mat s;
  Mat x0;
  Vec t;
  std::vector<Index> target_index;

  Index size() const { return x.cols(); }
  Index dim() const { return x.rows(); }
  TrainingPair pair(Index i) const { return {x.col(i), s.col(i), t(i), x0.col(i)}; }
  std::vector<TrainingPair> pairs() const;
  static PairBatch from_pairs(const std::vector<TrainingPair>& pairs);
};

PointCloud two_moons(Index n, double noise_std, std::uint64_t seed);
GmmSpec eight_gaussians_spec(double radius, double std);
PointCloud eight_gaussians(Index n, double radius, double std, std::uint64_t seed);
PointCloud gmm_sample(const GmmSpec& spec, Index n, std::uint64_t seed,
                      std::vector<Index>* component = nullptr);
PointCloud gaussian_noise(Index dim, Index n, std::uint64_t seed);

// Heterogeneous-norm high-dimensional cloud used for the hubness analysis:
// s_j = sigma_j (c + z_j), c and z_j standard normal, log sigma_j ~ N(0, spread^2).
PointCloud hubness_dataset(Index dim, Index n, double spread, std::uint64_t seed);

// Draws x0 from `source` (standard normal when null), a target per the
// coupling, t from t_dist, and forms x = (1-t) x0 + t s.
PairBatch sample_pairs(const PointCloud& target, Index batch, const TimeDistribution& t_dist,
                       const CouplingStrategy& coupling, std::uint64_t seed,
                       const GmmSpec* source = nullptr);

// Re-pairs fixed sources with the given candidate targets per the coupling.
// Returns, for each source column, the index of its target column.
std::vector<Index> couple(const Mat& x0, const Mat& targets, CouplingKind kind, std::mt19937_64& rng);

}  // namespace dmarch
