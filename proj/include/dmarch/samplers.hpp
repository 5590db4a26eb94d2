#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dmarch/field.hpp"

namespace dmarch {

enum class SamplerKind { sphere_tracing, gradient_descent, adaptive_gd, ula, hmc };

std::string_view to_string(SamplerKind k);
SamplerKind parse_sampler_kind(std::string_view s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::sphere_tracing;
  double eta = 1.0;
  Index max_steps = 100;
  // Stop once u falls below this value (1.05 sqrt(c0) for the default c0).
  double stop_threshold = 0.105;
  Index patience = 10;
  // ULA: tempering of U = u and a multiplier on the injected noise.
  double sigma = 0.25;
  double noise_scale = 1.0;

  void validate() const;
};

struct HmcConfig {
  double mass = 1.0;
  double sigma = 0.25;
  Index leapfrog_steps = 5;
  double leapfrog_eps = 0.2;
  Index n_proposals = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Trajectory {
  std::vector<Vec> states;
  std::vector<double> u_values;
  // Norm of the move into each state; step_norms[0] = 0.
  std::vector<double> step_norms;
  Index nfe = 0;
  bool stopped_early = false;
  Index accept_count = 0;
  Index proposals = 0;
  // Set when the potential gradient came from a direct-mode head.
  bool non_conservative_potential = false;

  const Vec& final_state() const { return states.back(); }
};

// Single-chain samplers. Randomised ones draw from make_stream(seed, 0).
Trajectory sphere_trace(const Field& field, const Vec& x0, const SamplerConfig& cfg);
Trajectory grad_descent(const Field& field, const Vec& x0, const SamplerConfig& cfg);
// Gradient descent that stops after `patience` consecutive steps without a new
// minimum of u.
Trajectory adaptive_gd(const Field& field, const Vec& x0, const SamplerConfig& cfg);
Trajectory ula_refine(const Field& field, const Vec& x_init, const SamplerConfig& cfg, std::uint64_t seed);
Trajectory hmc_refine(const Field& field, const Vec& x_init, const HmcConfig& hmc);

// One deterministic sphere-tracing jump followed by HMC; the jump's eval
// doubles as the initial HMC energy, so defaults cost 97 NFE.
Trajectory st_then_hmc(const Field& field, const Vec& x0, double st_eta, const HmcConfig& hmc);

// What to run on every chain of a batch.
struct SamplerPlan {
  SamplerConfig sampler;
  bool then_hmc = false;  // sphere_tracing with max_steps jumps, then HMC
  HmcConfig hmc;
};

struct ChainBatch {
  Mat final_states;
  std::vector<Trajectory> trajectories;  // empty unless recorded
  std::vector<Index> nfe;
  std::vector<Index> steps;  // recorded states minus one, per chain
  Index accepted = 0;
  Index proposals = 0;
};

// Runs one chain per column of x0. Chain j draws randomness from
// make_stream(seed, j), so results do not depend on batching or threads.
// Exec::serial runs the chains one at a time; Exec::parallel advances all
// chains in lockstep with batched field evaluations.
ChainBatch run_chains(const Field& field, const Mat& x0, const SamplerPlan& plan, std::uint64_t seed,
                      bool record, Exec exec = Exec::parallel);

// {eta/2, eta, 2 eta, 4 eta}.
std::vector<double> sweep_etas(double eta);

}  // namespace dmarch
