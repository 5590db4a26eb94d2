#include <cmath>
#include <random>
#include <string>

#include "dmarch/samplers.hpp"

namespace dmarch {

std::string_view to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::sphere_tracing: return "sphere_tracing";
    case SamplerKind::gradient_descent: return "gradient_descent";
    case SamplerKind::adaptive_gd: return "adaptive_gd";
    case SamplerKind::ula: return "ula";
    case SamplerKind::hmc: return "hmc";
  }
  return "?";
}

SamplerKind parse_sampler_kind(std::string_view s) {
  for (SamplerKind k : {SamplerKind::sphere_tracing, SamplerKind::gradient_descent, SamplerKind::adaptive_gd,
                        SamplerKind::ula, SamplerKind::hmc}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown sampler kind '" + std::string(s) + "'");
}

void SamplerConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("sampler.eta must be >= 0");
  if (max_steps < 1) throw ConfigError("sampler.max_steps must be >= 1");
  if (!(stop_threshold >= 0.0)) throw ConfigError("sampler.stop_threshold must be >= 0");
  if (patience < 1) throw ConfigError("sampler.patience must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("sampler.sigma must be > 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("sampler.noise_scale must be >= 0");
}

void HmcConfig::validate() const {
  if (!(mass > 0.0)) throw ConfigError("hmc.mass must be > 0");
  if (!(sigma > 0.0)) throw ConfigError("hmc.sigma must be > 0");
  if (leapfrog_steps < 1) throw ConfigError("hmc.leapfrog_steps must be >= 1");
  if (!(leapfrog_eps > 0.0)) throw ConfigError("hmc.leapfrog_eps must be > 0");
  if (n_proposals < 1) throw ConfigError("hmc.n_proposals must be >= 1");
}

std::vector<double> sweep_etas(double eta) { return {eta / 2.0, eta, 2.0 * eta, 4.0 * eta}; }

namespace {

struct Chain {
  Vec x;
  std::mt19937_64 rng;
  Trajectory traj;
  bool done = false;
  double last_u = 0.0;
  double best_u = 0.0;
  Index increases = 0;
  Index steps = 0;
};

class Engine {
 public:
  Engine(const Field& field, const Mat& x0, const SamplerPlan& plan, std::uint64_t seed, Index first, bool record)
      : field_(field), plan_(plan), record_(record) {
    if (x0.rows() != field.dim()) throw ShapeError("sampler: start points have the wrong dimension");
    if (!x0.allFinite()) throw DomainError("sampler: start points must be finite");
    chains_.resize(static_cast<std::size_t>(x0.cols()));
    for (Index j = 0; j < x0.cols(); ++j) {
      Chain& c = chains_[static_cast<std::size_t>(j)];
      c.x = x0.col(j);
      c.rng = make_stream(seed, static_cast<std::uint64_t>(first + j));
      push_state(c, 0.0);
    }
  }

  void run() {
    const SamplerKind kind = plan_.sampler.kind;
    if (kind == SamplerKind::hmc) {
      initial_eval();
      hmc();
    } else if (plan_.then_hmc) {
      jumps();
      hmc();
    } else {
      descent();
    }
    const bool potential = kind == SamplerKind::hmc || kind == SamplerKind::ula || plan_.then_hmc;
    for (auto& c : chains_) c.traj.non_conservative_potential = potential && !field_.conservative();
  }

  ChainBatch result() {
    ChainBatch out;
    out.final_states.resize(field_.dim(), static_cast<Index>(chains_.size()));
    for (std::size_t j = 0; j < chains_.size(); ++j) {
      Chain& c = chains_[j];
      out.final_states.col(static_cast<Index>(j)) = c.x;
      out.nfe.push_back(c.traj.nfe);
      out.steps.push_back(c.steps);
      out.accepted += c.traj.accept_count;
      out.proposals += c.traj.proposals;
      if (record_) out.trajectories.push_back(std::move(c.traj));
    }
    return out;
  }

 private:
  void push_state(Chain& c, double step_norm) {
    if (!record_) return;
    c.traj.states.push_back(c.x);
    c.traj.step_norms.push_back(step_norm);
  }

  void push_u(Chain& c, double u) {
    c.last_u = u;
    if (record_) c.traj.u_values.push_back(u);
  }

  // Evaluates the field at the positions of the selected chains.
  BatchOutput eval(const std::vector<std::size_t>& idx, const std::vector<Vec>& pos) {
    Mat x(field_.dim(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) x.col(static_cast<Index>(k)) = pos[idx[k]];
    for (std::size_t k : idx) ++chains_[k].traj.nfe;
    return field_.eval_batch(x);
  }

  std::vector<Vec> positions() const {
    std::vector<Vec> p;
    for (const auto& c : chains_) p.push_back(c.x);
    return p;
  }

  void move(Chain& c, const Vec& next, Index step) {
    if (!next.allFinite()) {
      throw NumericError("sampler: non-finite state at step " + std::to_string(step));
    }
    const double norm = (next - c.x).norm();
    c.x = next;
    ++c.steps;
    push_state(c, norm);
  }

  void descent() {
    const SamplerConfig& cfg = plan_.sampler;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index k = 0;; ++k) {
      std::vector<std::size_t> active;
      for (std::size_t j = 0; j < chains_.size(); ++j)
        if (!chains_[j].done) active.push_back(j);
      if (active.empty()) break;
      const BatchOutput out = eval(active, positions());
      for (std::size_t a = 0; a < active.size(); ++a) {
        Chain& c = chains_[active[a]];
        const double u = out.u(static_cast<Index>(a));
        const Vec v = out.v.col(static_cast<Index>(a));
        push_u(c, u);
        if (cfg.kind == SamplerKind::sphere_tracing || cfg.kind == SamplerKind::gradient_descent) {
          if (u < cfg.stop_threshold) {
            c.traj.stopped_early = true;
            c.done = true;
            continue;
          }
        } else if (cfg.kind == SamplerKind::adaptive_gd) {
          // Counts steps since u last reached a new minimum.
          if (k == 0 || u < c.best_u) {
            c.best_u = u;
            c.increases = 0;
          } else {
            ++c.increases;
          }
          if (c.increases >= cfg.patience) {
            c.traj.stopped_early = true;
            c.done = true;
            continue;
          }
        }
        if (k == cfg.max_steps) {
          c.done = true;
          continue;
        }
        Vec next;
        switch (cfg.kind) {
          case SamplerKind::sphere_tracing: next = c.x - cfg.eta * u * v; break;
          case SamplerKind::ula: {
            const double s2 = cfg.sigma * cfg.sigma;
            next = c.x - (cfg.eta / s2) * v;
            const double amp = cfg.noise_scale * std::sqrt(2.0 * cfg.eta);
            for (Index d = 0; d < next.size(); ++d) next(d) += amp * normal(c.rng);
            break;
          }
          default: next = c.x - cfg.eta * v; break;
        }
        move(c, next, k + 1);
      }
    }
  }

  void initial_eval() {
    std::vector<std::size_t> all(chains_.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    const BatchOutput out = eval(all, positions());
    for (std::size_t j = 0; j < all.size(); ++j) push_u(chains_[j], out.u(static_cast<Index>(j)));
  }

  void jumps() {
    const SamplerConfig& cfg = plan_.sampler;
    std::vector<std::size_t> all(chains_.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    for (Index k = 0; k < cfg.max_steps; ++k) {
      const BatchOutput out = eval(all, positions());
      for (std::size_t j = 0; j < all.size(); ++j) {
        Chain& c = chains_[j];
        const double u = out.u(static_cast<Index>(j));
        push_u(c, u);
        move(c, c.x - cfg.eta * u * out.v.col(static_cast<Index>(j)), k + 1);
      }
    }
  }

  void hmc() {
    const HmcConfig& h = plan_.hmc;
    h.validate();
    const double inv_s2 = 1.0 / (h.sigma * h.sigma);
    const double sqrt_m = std::sqrt(h.mass);
    const std::size_t n = chains_.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;

    std::vector<Vec> xp(n), p(n);
    std::vector<double> u0(n), h0(n), up(n);
    std::vector<char> ok(n);
    for (Index prop = 0; prop < h.n_proposals; ++prop) {
      BatchOutput out = eval(all, positions());
      for (std::size_t j = 0; j < n; ++j) {
        Chain& c = chains_[j];
        u0[j] = out.u(static_cast<Index>(j));
        if (record_ && c.traj.u_values.size() < c.traj.states.size()) push_u(c, u0[j]);
        p[j].resize(c.x.size());
        for (Index d = 0; d < c.x.size(); ++d) p[j](d) = sqrt_m * normal(c.rng);
        h0[j] = u0[j] * inv_s2 + p[j].squaredNorm() / (2.0 * h.mass);
        p[j] -= 0.5 * h.leapfrog_eps * inv_s2 * out.v.col(static_cast<Index>(j));
        xp[j] = c.x;
        ok[j] = 1;
      }
      for (Index l = 1; l <= h.leapfrog_steps; ++l) {
        std::vector<std::size_t> live;
        for (std::size_t j = 0; j < n; ++j) {
          if (!ok[j]) continue;
          xp[j] += (h.leapfrog_eps / h.mass) * p[j];
          if (xp[j].allFinite()) {
            live.push_back(j);
          } else {
            ok[j] = 0;
          }
        }
        if (live.empty()) break;
        out = eval(live, xp);
        const double kick = (l < h.leapfrog_steps ? 1.0 : 0.5) * h.leapfrog_eps * inv_s2;
        for (std::size_t a = 0; a < live.size(); ++a) {
          const std::size_t j = live[a];
          up[j] = out.u(static_cast<Index>(a));
          p[j] -= kick * out.v.col(static_cast<Index>(a));
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        Chain& c = chains_[j];
        ++c.traj.proposals;
        const double h1 = up[j] * inv_s2 + p[j].squaredNorm() / (2.0 * h.mass);
        const double r = uniform(c.rng);
        const bool finite = ok[j] && std::isfinite(h1) && p[j].allFinite();
        const double accept = finite ? std::min(1.0, std::exp(h0[j] - h1)) : 0.0;
        if (finite && r < accept) {
          ++c.traj.accept_count;
          const double norm = (xp[j] - c.x).norm();
          c.x = xp[j];
          ++c.steps;
          push_state(c, norm);
          push_u(c, up[j]);
        } else {
          ++c.steps;
          push_state(c, 0.0);
          push_u(c, u0[j]);
        }
      }
    }
  }

  const Field& field_;
  const SamplerPlan& plan_;
  bool record_;
  std::vector<Chain> chains_;
};

ChainBatch run_engine(const Field& field, const Mat& x0, const SamplerPlan& plan, std::uint64_t seed, Index first,
                      bool record) {
  plan.sampler.validate();
  if (plan.then_hmc || plan.sampler.kind == SamplerKind::hmc) plan.hmc.validate();
  Engine e(field, x0, plan, seed, first, record);
  e.run();
  return e.result();
}

Trajectory single(const Field& field, const Vec& x0, const SamplerPlan& plan, std::uint64_t seed) {
  if (x0.size() != field.dim()) throw ShapeError("sampler: start point has the wrong dimension");
  ChainBatch b = run_engine(field, Mat(x0), plan, seed, 0, true);
  return std::move(b.trajectories.front());
}

SamplerPlan plan_for(const SamplerConfig& cfg, SamplerKind kind) {
  SamplerPlan p;
  p.sampler = cfg;
  p.sampler.kind = kind;
  return p;
}

}  // namespace

Trajectory sphere_trace(const Field& field, const Vec& x0, const SamplerConfig& cfg) {
  return single(field, x0, plan_for(cfg, SamplerKind::sphere_tracing), 0);
}

Trajectory grad_descent(const Field& field, const Vec& x0, const SamplerConfig& cfg) {
  return single(field, x0, plan_for(cfg, SamplerKind::gradient_descent), 0);
}

Trajectory adaptive_gd(const Field& field, const Vec& x0, const SamplerConfig& cfg) {
  return single(field, x0, plan_for(cfg, SamplerKind::adaptive_gd), 0);
}

Trajectory ula_refine(const Field& field, const Vec& x_init, const SamplerConfig& cfg, std::uint64_t seed) {
  return single(field, x_init, plan_for(cfg, SamplerKind::ula), seed);
}

Trajectory hmc_refine(const Field& field, const Vec& x_init, const HmcConfig& hmc) {
  SamplerPlan p;
  p.sampler.kind = SamplerKind::hmc;
  p.hmc = hmc;
  return single(field, x_init, p, hmc.seed);
}

Trajectory st_then_hmc(const Field& field, const Vec& x0, double st_eta, const HmcConfig& hmc) {
  SamplerPlan p;
  p.sampler.kind = SamplerKind::sphere_tracing;
  p.sampler.eta = st_eta;
  p.sampler.max_steps = 1;
  p.then_hmc = true;
  p.hmc = hmc;
  return single(field, x0, p, hmc.seed);
}

ChainBatch run_chains(const Field& field, const Mat& x0, const SamplerPlan& plan, std::uint64_t seed, bool record,
                      Exec exec) {
  if (exec == Exec::parallel) return run_engine(field, x0, plan, seed, 0, record);
  ChainBatch out;
  out.final_states.resize(x0.rows(), x0.cols());
  for (Index j = 0; j < x0.cols(); ++j) {
    ChainBatch one = run_engine(field, Mat(x0.col(j)), plan, seed, j, record);
    out.final_states.col(j) = one.final_states.col(0);
    out.nfe.push_back(one.nfe.front());
    out.steps.push_back(one.steps.front());
    out.accepted += one.accepted;
    out.proposals += one.proposals;
    if (record) out.trajectories.push_back(std::move(one.trajectories.front()));
  }
  return out;
}

}  // namespace dmarch
