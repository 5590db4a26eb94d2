#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>

#include "commands.hpp"
#include "dmarch/assignment.hpp"
#include "dmarch/io.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/quadrature.hpp"
#include "dmarch/samplers.hpp"
#include "dmarch/trainer.hpp"

namespace dmarch::cli {

namespace {

struct Check {
  std::string module;
  std::string name;
  std::string relation;  // how value is compared with threshold
  double threshold;
  std::function<double()> value;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

FieldConfig small_config(FieldMode mode, std::uint64_t seed) {
  FieldConfig c;
  c.hidden_widths = {12, 10};
  c.mode = mode;
  c.seed = seed;
  c.output_scale = mode == FieldMode::direct ? 0.7 : 1.0;
  return c;
}

PairBatch small_pairs(std::uint64_t seed, Index n = 12) {
  const PointCloud target = two_moons(64, 0.05, seed);
  CouplingStrategy cs;
  cs.kind = CouplingKind::random;
  return sample_pairs(target, n, TimeDistribution{}, cs, seed + 1);
}

// Worst relative error between the analytic parameter gradient and central
// differences over a spread of coordinates.
double loss_grad_error(const FieldModel& model, const Mat& x, const PointLoss& loss) {
  const LossGradients g = loss_gradients(model, x, loss, Exec::serial);
  double worst = 0.0;
  const Index n = model.param_count();
  for (Index k = 0; k < 12; ++k) {
    const Index i = (k * 7919) % n;
    Vec p = model.params();
    const double h = 1e-5 * std::max(1.0, std::abs(p(i)));
    p(i) += h;
    const double fp = loss_gradients(model.with_params(p), x, loss, Exec::serial).value;
    p(i) -= 2.0 * h;
    const double fm = loss_gradients(model.with_params(p), x, loss, Exec::serial).value;
    const double fd = (fp - fm) / (2.0 * h);
    if (std::abs(fd) < 1e-9 && std::abs(g.grad(i)) < 1e-9) continue;
    worst = std::max(worst, rel_err(fd, g.grad(i)));
  }
  return worst;
}

// u = |x| with v pointing inward, so every descent step increases u.
class OutwardField final : public Field {
 public:
  Index dim() const override { return 2; }
  bool conservative() const override { return false; }
  BatchOutput eval_batch(const Mat& x) const override {
    BatchOutput out{x.colwise().norm().transpose(), Mat(2, x.cols())};
    for (Index j = 0; j < x.cols(); ++j) out.v.col(j) = -x.col(j) / out.u(j);
    return out;
  }
};

PointCloud eight_point_dataset() {
  PointCloud c;
  c.points.resize(2, 8);
  c.points << -1.0, -0.5, 0.0, 0.5, 1.0, 0.3, -0.7, 1.2,  //
      0.4, -0.8, 0.9, -0.2, 0.6, 1.1, 0.1, -0.9;
  return c;
}

// Largest |closed form - MC| in units of the MC standard error.
double mc_z(MinimizerKind kind) {
  const PointCloud data = eight_point_dataset();
  OracleConfig oc;
  oc.epsilon = 0.1;
  oc.c0 = 0.1;
  Vec x(2);
  x << 0.2, 0.3;
  const MinimizerReport exact = minimizer_report(x, data, oc);
  const McEstimate mc = mc_minimizers(x, data, oc, 200000, 17);
  auto pick = [&](const MinimizerReport& r) -> const Vec& {
    switch (kind) {
      case MinimizerKind::fm: return r.g_fm;
      case MinimizerKind::rfm: return r.g_rfm;
      case MinimizerKind::osl: return r.f_os;
      case MinimizerKind::del: return r.h_de;
    }
    return r.g_fm;
  };
  double z = 0.0;
  for (Index i = 0; i < 2; ++i) z = std::max(z, std::abs(pick(exact)(i) - pick(mc.mean)(i)) / pick(mc.se)(i));
  return z;
}

double radial_worst(Index dim, double c, int sign, std::uint64_t seed) {
  std::mt19937_64 rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    Vec x(dim), s(dim);
    for (Index i = 0; i < dim; ++i) {
      x(i) = normal(rng);
      s(i) = normal(rng);
    }
    worst = std::max(worst, radial_family_check(x, s, c, sign));
  }
  return worst;
}

std::vector<Check> build_checks(std::uint64_t seed) {
  std::vector<Check> checks;
  auto add = [&](std::string module, std::string name, std::string rel, double thr, std::function<double()> f) {
    checks.push_back({std::move(module), std::move(name), std::move(rel), thr, std::move(f)});
  };

  // field
  add("field", "param_count_gradient_mode", "==", 33537, [] { return static_cast<double>(param_count(FieldConfig{})); });
  add("field", "param_count_direct_mode", "==", 33795, [] {
    FieldConfig c;
    c.mode = FieldMode::direct;
    return static_cast<double>(param_count(c));
  });
  add("field", "v_is_input_gradient_of_u", "<", 1e-6, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::gradient, seed));
    const PairBatch p = small_pairs(seed);
    double worst = 0.0;
    for (Index j = 0; j < p.size(); ++j) {
      const Vec x = p.x.col(j);
      const FieldOutput o = eval(m, x);
      for (Index i = 0; i < 2; ++i) {
        Vec a = x, b = x;
        a(i) += 1e-6;
        b(i) -= 1e-6;
        const double fd = (eval(m, a).u - eval(m, b).u) / 2e-6;
        worst = std::max(worst, std::abs(fd - o.v(i)) / std::max(1.0, std::abs(o.v(i))));
      }
    }
    return worst;
  });
  add("field", "batch_equals_single_point", "==", 0.0, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::direct, seed));
    const PairBatch p = small_pairs(seed, 40);
    const BatchOutput b = m.eval_batch(p.x);
    double diff = 0.0;
    for (Index j = 0; j < p.size(); ++j) {
      const FieldOutput o = eval(m, p.x.col(j));
      diff = std::max({diff, std::abs(o.u - b.u(j)), (o.v - b.v.col(j)).cwiseAbs().maxCoeff()});
    }
    return diff;
  });
  add("field", "eval_serial_vs_omp", "<", 1e-12, [seed] {
    const FieldModel m = init_field(FieldConfig{});
    const PairBatch p = small_pairs(seed, 100);
    const BatchOutput a = kernels::eval_serial(m, p.x), b = kernels::eval_omp(m, p.x);
    return std::max((a.u - b.u).cwiseAbs().maxCoeff(), (a.v - b.v).cwiseAbs().maxCoeff());
  });
  add("field", "loss_gradient_serial_vs_omp", "<", 1e-10, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::gradient, seed));
    const PairBatch p = small_pairs(seed, 100);
    const CombinedLoss loss(p, LossConfig{});
    const LossGradients a = kernels::loss_gradients_serial(m, p.x, loss);
    const LossGradients b = kernels::loss_gradients_omp(m, p.x, loss);
    return (a.grad - b.grad).cwiseAbs().maxCoeff() / std::max(1.0, a.grad.cwiseAbs().maxCoeff());
  });

  // losses
  add("losses", "osl_gradient_vs_fd", "<", 1e-4, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::gradient, seed));
    const PairBatch p = small_pairs(seed);
    return loss_grad_error(m, p.x, OslLoss(p, 0.01));
  });
  add("losses", "del_gradient_vs_fd", "<", 1e-4, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::gradient, seed + 1));
    const PairBatch p = small_pairs(seed + 1);
    return loss_grad_error(m, p.x, DelLoss(p, 0.01));
  });
  add("losses", "fm_gradient_vs_fd", "<", 1e-4, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::direct, seed + 2));
    const PairBatch p = small_pairs(seed + 2);
    return loss_grad_error(m, p.x, FmLoss(p, FmWeight::inverse_one_minus_t_sq));
  });
  add("losses", "combined_gradient_vs_fd_gradient_mode", "<", 1e-4, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::gradient, seed + 3));
    const PairBatch p = small_pairs(seed + 3);
    return loss_grad_error(m, p.x, CombinedLoss(p, LossConfig{}));
  });
  add("losses", "combined_gradient_vs_fd_direct_mode", "<", 1e-4, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::direct, seed + 4));
    const PairBatch p = small_pairs(seed + 4);
    return loss_grad_error(m, p.x, CombinedLoss(p, LossConfig{}));
  });
  add("losses", "del_target_norm", "<", 1e-14, [] {
    Vec x(3), s(3);
    x << 1.0, 2.0, -1.0;
    s << 0.5, -1.0, 2.0;
    const double r = (x - s).norm();
    return std::abs(del_target(x, s, 0.3).norm() - r / std::sqrt(r * r + 0.3));
  });

  // oracles and quadrature
  add("oracles", "radial_family_D1_C0", "<", 1e-10, [seed] { return radial_worst(1, 0.0, 1, seed); });
  add("oracles", "radial_family_D2_C1_negative", "<", 1e-10, [seed] { return radial_worst(2, 1.0, -1, seed); });
  add("oracles", "radial_family_D8_C7", "<", 1e-10, [seed] { return radial_worst(8, 7.0, 1, seed); });
  add("oracles", "posterior_index_sums_to_one", "<", 1e-12, [] {
    Vec x(2);
    x << 0.1, -0.3;
    return std::abs(posterior_index(x, eight_point_dataset(), OracleConfig{}).sum() - 1.0);
  });
  add("quadrature", "gauss_legendre_degree_15_exact", "<", 1e-13, [] {
    std::vector<double> n, w;
    gauss_legendre(8, n, w);
    double s = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) s += w[i] * std::pow(n[i], 14);
    return std::abs(s - 2.0 / 15.0);
  });
  add("quadrature", "posterior_64_vs_128_nodes", "<", 1e-6, [] {
    Vec x(2);
    x << 0.4, 0.2;
    OracleConfig a, b;
    b.quad.nodes = 128;
    const Vec pa = posterior_index(x, eight_point_dataset(), a);
    const Vec pb = posterior_index(x, eight_point_dataset(), b);
    double worst = 0.0;
    for (Index i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa(i) - pb(i)) / std::max(pb(i), 1e-300));
    return worst;
  });
  add("oracles", "fm_minimizer_vs_monte_carlo_se", "<", 4.0, [] { return mc_z(MinimizerKind::fm); });
  add("oracles", "rfm_minimizer_vs_monte_carlo_se", "<", 4.0, [] { return mc_z(MinimizerKind::rfm); });
  add("oracles", "osl_minimizer_vs_monte_carlo_se", "<", 4.0, [] { return mc_z(MinimizerKind::osl); });
  add("oracles", "del_minimizer_vs_monte_carlo_se", "<", 4.0, [] { return mc_z(MinimizerKind::del); });
  add("oracles", "angle_ratio_at_most_one", "<=", 1.0 + 1e-12, [] {
    const PointCloud data = eight_point_dataset();
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) {
      Vec x(2);
      x << -1.5 + 0.4 * k, 0.8 - 0.25 * k;
      const AngleReport a = angle_analysis(minimizer_report(x, data, OracleConfig{}));
      if (!a.degenerate) worst = std::max(worst, a.additivity_ratio);
    }
    return worst;
  });
  add("oracles", "outlierness_matches_chi2_in_2d", "<", 1e-12, [] {
    GmmSpec t;
    t.components.push_back({Vec::Zero(2), 1.0, 1.0});
    Vec x(2);
    x << 1.5, -2.0;
    return std::abs(outlierness(x, t) - 0.5 * x.squaredNorm());
  });

  // samplers
  add("samplers", "st_then_hmc_nfe", "==", 97, [seed] {
    const AnalyticDistanceField f(two_moons(32, 0.0, seed).points, 0.01);
    HmcConfig h;
    h.seed = seed;
    return static_cast<double>(st_then_hmc(f, Vec::Constant(2, 2.0), 1.0, h).nfe);
  });
  add("samplers", "hmc_acceptance_small_eps", ">", 0.999, [seed] {
    const AnalyticDistanceField f(two_moons(32, 0.0, seed).points, 0.01);
    SamplerPlan plan;
    plan.sampler.max_steps = 1;
    plan.then_hmc = true;
    plan.hmc.leapfrog_eps = 1e-4;
    plan.hmc.n_proposals = 16;
    const Mat x0 = gaussian_noise(2, 63, seed).points;
    const ChainBatch b = run_chains(f, x0, plan, seed, false);
    return static_cast<double>(b.accepted) / static_cast<double>(b.proposals);
  });
  add("samplers", "sphere_trace_projects_onto_point", "<", 1e-12, [] {
    Mat pts(2, 3);
    pts << 0.0, 3.0, -2.0, 0.0, 1.0, 4.0;
    const AnalyticDistanceField f(pts, 0.0);
    SamplerConfig c;
    c.max_steps = 1;
    c.stop_threshold = 0.0;
    Vec x(2);
    x << 0.7, -0.4;
    return sphere_trace(f, x, c).final_state().norm();
  });
  add("samplers", "adaptive_gd_stops_after_patience", "==", 10, [] {
    const OutwardField f;
    SamplerConfig c;
    c.kind = SamplerKind::adaptive_gd;
    c.eta = 0.1;
    c.stop_threshold = 0.0;
    Vec x(2);
    x << 1.0, 0.0;
    return static_cast<double>(adaptive_gd(f, x, c).states.size() - 1);
  });

  // metrics
  add("metrics", "w2_matches_permutation_brute_force", "<", 1e-12, [seed] {
    const Mat a = gaussian_noise(2, 3, seed).points, b = gaussian_noise(2, 3, seed + 1).points;
    std::vector<Index> perm{0, 1, 2};
    double best = INFINITY;
    do {
      double c = 0.0;
      for (Index i = 0; i < 3; ++i) c += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).squaredNorm();
      best = std::min(best, c / 3.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::abs(w2(a, b).value - std::sqrt(best));
  });
  add("metrics", "identical_clouds_score_zero", "==", 0.0, [seed] {
    const Mat a = gaussian_noise(3, 50, seed).points;
    const MetricReport m = cloud_metrics(a, a);
    return m.w2 + m.hausdorff + m.chamfer;
  });
  add("metrics", "nearest_serial_vs_omp", "==", 0.0, [seed] {
    const Mat q = gaussian_noise(5, 300, seed).points, r = gaussian_noise(5, 200, seed + 1).points;
    const NearestResult a = kernels::nearest_serial(q, r), b = kernels::nearest_omp(q, r);
    double diff = (a.dist2 - b.dist2).cwiseAbs().maxCoeff();
    if (a.index != b.index) diff += 1.0;
    return diff;
  });
  add("metrics", "assignment_optimal_on_5x5", "<", 1e-12, [seed] {
    const Mat a = gaussian_noise(2, 5, seed).points, b = gaussian_noise(2, 5, seed + 2).points;
    const Mat c = squared_distances(a, b);
    const auto match = solve_assignment(c);
    double got = 0.0;
    for (Index i = 0; i < 5; ++i) got += c(i, match[static_cast<std::size_t>(i)]);
    std::vector<Index> perm{0, 1, 2, 3, 4};
    double best = INFINITY;
    do {
      double s = 0.0;
      for (Index i = 0; i < 5; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::abs(got - best);
  });

  // data
  add("data", "closest_without_replacement_uses_distinct_targets", "==", 0.0, [seed] {
    const PointCloud t = two_moons(128, 0.05, seed);
    const PairBatch p = sample_pairs(t, 64, TimeDistribution{}, CouplingStrategy{}, seed);
    std::vector<Index> idx = p.target_index;
    std::sort(idx.begin(), idx.end());
    return static_cast<double>(idx.size() - static_cast<std::size_t>(std::unique(idx.begin(), idx.end()) - idx.begin()));
  });

  // trainer and io
  add("trainer", "adam_first_step_is_lr_times_sign", "<", 1e-12, [] {
    Adam adam(3, 0.01, 0.9, 0.999, 0.0, 0.0);
    Vec p = Vec::Zero(3), g(3);
    g << 2.0, -0.5, 1e-3;
    adam.step(p, g);
    return (p + 0.01 * g.cwiseSign()).cwiseAbs().maxCoeff();
  });
  add("trainer", "training_is_deterministic", "==", 0.0, [seed] {
    const PointCloud t = two_moons(64, 0.05, seed);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.seed = seed;
    const FieldModel m0 = init_field(small_config(FieldMode::gradient, seed));
    const TrainResult a = train(m0, t, tc), b = train(m0, t, tc);
    return (a.model.params() - b.model.params()).cwiseAbs().maxCoeff();
  });
  add("io", "checkpoint_round_trip_bitwise", "==", 0.0, [seed] {
    const FieldModel m = init_field(small_config(FieldMode::direct, seed));
    const auto path = std::filesystem::temp_directory_path() / ("dmarch_verify_" + std::to_string(seed) + ".json");
    save_checkpoint(path, m);
    const Checkpoint c = load_checkpoint(path);
    std::filesystem::remove(path);
    return (c.model.params() - m.params()).cwiseAbs().maxCoeff();
  });
  return checks;
}

bool passes(const Check& c, double v) {
  if (!std::isfinite(v)) return false;
  if (c.relation == "==") return v == c.threshold;
  if (c.relation == "<") return v < c.threshold;
  if (c.relation == "<=") return v <= c.threshold;
  if (c.relation == ">") return v > c.threshold;
  return false;
}

}  // namespace

int cmd_verify(Reader& cfg, Common& common, const Overrides& ov) {
  common.seed = cfg.seed("seed", 7);
  common.out = cfg.string("out", "runs/verify");
  if (ov.seed) common.seed = *ov.seed;
  if (ov.out) common.out = *ov.out;
  cfg.integer("schema_version", kSchemaVersion);
  cfg.finish();
  std::filesystem::create_directories(common.out);

  const auto checks = build_checks(common.seed);
  CsvWriter w(common.out / "verify.csv");
  w.header({"module", "check", "value", "relation", "threshold", "status"});
  Index failed = 0;
  for (const auto& c : checks) {
    double v = NAN;
    std::string error;
    try {
      v = c.value();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const bool ok = error.empty() && passes(c, v);
    failed += ok ? 0 : 1;
    w.field(c.module).field(c.name).field(v).field(c.relation).field(c.threshold);
    w.field(std::string(ok ? "PASS" : "FAIL"));
    w.end_row();
    std::cout << (ok ? "PASS " : "FAIL ") << c.module << "/" << c.name << " value " << format_double(v) << " "
              << c.relation << " " << format_double(c.threshold);
    if (!error.empty()) std::cout << " error: " << error;
    std::cout << "\n";
  }
  write_manifest(common, "verify", json{{"schema_version", kSchemaVersion}, {"seed", common.seed}}, {"verify.csv"});
  std::cout << "verify: " << checks.size() << " checks, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace dmarch::cli
