// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [WORK_DIR]
// The lines are also written to WORK_DIR/acceptance.txt.
// Criteria 5, 10, 11 and 15 run the two-moons recipe script twice under
// WORK_DIR; expect about 15 minutes on one core.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dmarch/io.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/samplers.hpp"

using namespace dmarch;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = DMARCH_SOURCE_DIR;
const fs::path kConfigs = kSource / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
  };
  std::string line;
  std::getline(in, line);
  const auto names = split(line);
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    Row r;
    for (std::size_t i = 0; i < names.size() && i < cells.size(); ++i) r[names[i]] = cells[i];
    rows.push_back(r);
  }
  return rows;
}

double num(const Row& r, const std::string& key) { return std::stod(r.at(key)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::vector<std::string>& args) { return dmarch::cli::run(args); }

PointCloud eight_point_dataset() {
  PointCloud c;
  c.points.resize(2, 8);
  c.points << -1.0, -0.5, 0.0, 0.5, 1.0, 0.3, -0.7, 1.2,  //
      0.4, -0.8, 0.9, -0.2, 0.6, 1.1, 0.1, -0.9;
  return c;
}

// ---------------------------------------------------------------------------

Outcome c1_projection_invariance() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (Index d : {1, 2, 8})
    for (double c : {0.0, 1.0, 7.0})
      for (int sign : {1, -1})
        for (int k = 0; k < 1000; ++k) {
          Vec x(d), s(d);
          for (Index i = 0; i < d; ++i) {
            x(i) = 3.0 * g(rng);
            s(i) = g(rng);
          }
          worst = std::max(worst, radial_family_check(x, s, c, sign));
        }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 5.0,
          "max residual " + fmt(worst) + " (< 1e-10) over 18000 cases, " + fmt(secs, 3) + " s (< 5 s)"};
}

Outcome c2_oracle_equivalence() {
  const auto t0 = Clock::now();
  const PointCloud data = eight_point_dataset();
  const OracleConfig oc;
  Mat q(2, 5);
  q << 0.2, -1.2, 0.9, 0.0, -0.4,  //
      0.3, 0.5, -1.0, 0.0, -0.35;
  double worst = 0.0;
  for (Index j = 0; j < q.cols(); ++j) {
    const Vec x = q.col(j);
    const MinimizerReport e = minimizer_report(x, data, oc);
    const McEstimate mc = mc_minimizers(x, data, oc, 1000000, 100 + static_cast<std::uint64_t>(j));
    auto z = [&](const Vec& a, const Vec& m, const Vec& se) {
      for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a(i) - m(i)) / se(i));
    };
    z(e.g_fm, mc.mean.g_fm, mc.se.g_fm);
    z(e.g_rfm, mc.mean.g_rfm, mc.se.g_rfm);
    z(e.f_os, mc.mean.f_os, mc.se.f_os);
    z(e.h_de, mc.mean.h_de, mc.se.h_de);
  }
  const double secs = seconds_since(t0);
  return {worst < 3.0 && secs < 120.0, "FM/RFM/OSL/DEL at 5 queries, 1e6 samples: max |closed - MC| = " + fmt(worst, 3) +
                                           " SE (< 3), " + fmt(secs, 3) + " s (< 120 s)"};
}

Outcome c3_quadrature() {
  const PointCloud data = eight_point_dataset();
  OracleConfig a, b;
  b.quad.nodes = 128;
  double worst = 0.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Vec x(2);
    x << g(rng), g(rng);
    const Vec pa = posterior_index(x, data, a), pb = posterior_index(x, data, b);
    for (Index i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa(i) - pb(i)) / pb(i));
  }
  return {worst < 1e-6, "max relative pi difference 64 vs 128 nodes over 20 queries: " + fmt(worst) + " (< 1e-6)"};
}

Outcome c4_gradients() {
  double worst = 0.0;
  Index checked = 0;
  const PointCloud target = two_moons(64, 0.05, 1);
  for (FieldMode mode : {FieldMode::gradient, FieldMode::direct}) {
    for (std::uint64_t ms = 1; ms <= 5; ++ms) {
      FieldConfig fc;
      fc.hidden_widths = {16, 16};
      fc.mode = mode;
      fc.seed = ms;
      FieldModel base = init_field(fc);
      std::mt19937_64 prng(ms + 17);
      std::normal_distribution<double> pn(0.0, 0.1);
      Vec p0 = base.params();
      for (Index i = 0; i < p0.size(); ++i) p0(i) += pn(prng);
      const FieldModel m = base.with_params(p0);
      const PairBatch b = sample_pairs(target, 32, TimeDistribution{}, CouplingStrategy{CouplingKind::random}, ms, nullptr);
      const OslLoss lo(b, 0.01);
      const DelLoss ld(b, 0.01);
      const FmLoss lf(b, FmWeight::none);
      const FmLoss lr(b, FmWeight::inverse_one_minus_t_sq);
      const CombinedLoss lc(b, LossConfig{});
      for (const PointLoss* loss : std::vector<const PointLoss*>{&lo, &ld, &lf, &lr, &lc}) {
        const LossGradients gr = loss_gradients(m, b.x, *loss);
        std::mt19937_64 rng(ms * 1000 + static_cast<std::uint64_t>(checked));
        std::uniform_int_distribution<Index> pick(0, m.param_count() - 1);
        for (int r = 0; r < 20; ++r) {
          const Index k = pick(rng);
          const double h = 1e-5 * std::max(1.0, std::abs(p0(k)));
          Vec p = p0;
          p(k) += h;
          const double up = loss_value(m.with_params(p), b.x, *loss);
          p(k) = p0(k) - h;
          const double dn = loss_value(m.with_params(p), b.x, *loss);
          const double fd = (up - dn) / (2 * h);
          const double rel = std::abs(fd - gr.grad(k)) / std::max({std::abs(fd), std::abs(gr.grad(k)), 1e-6});
          worst = std::max(worst, rel);
          ++checked;
        }
      }
    }
  }
  return {worst < 1e-4, "OSL/DEL/FM/RFM/combined, both modes, 20 coords x 5 models: max rel err " + fmt(worst) +
                            " (< 1e-4) over " + std::to_string(checked) + " checks"};
}

Outcome c6_hmc(const FieldModel& model) {
  const PointCloud x0 = eight_gaussians(200, 2.0, 0.2, 9);
  SamplerPlan plan;
  plan.sampler.kind = SamplerKind::sphere_tracing;
  plan.sampler.eta = 1.0;
  plan.sampler.max_steps = 1;
  plan.then_hmc = true;
  const ChainBatch b = run_chains(model, x0.points, plan, 3, false);
  const bool all97 = std::all_of(b.nfe.begin(), b.nfe.end(), [](Index n) { return n == 97; });
  HmcConfig h;
  h.leapfrog_eps = 1e-4;
  h.n_proposals = 1000;
  h.seed = 4;
  const Trajectory t = hmc_refine(model, b.final_states.col(0), h);
  const double acc = static_cast<double>(t.accept_count) / static_cast<double>(t.proposals);
  return {all97 && t.proposals == 1000 && acc > 0.999,
          std::string("ST jump + default HMC: ") + (all97 ? "97" : "not 97") + " NFE on all 200 chains; eps 1e-4: acceptance " +
              fmt(acc, 6) + " over " + std::to_string(t.proposals) + " proposals (> 0.999)"};
}

Outcome c7_locality(const fs::path& work) {
  const PointCloud data = two_moons(64, 0.05, 1);
  OracleConfig oc;
  oc.source = eight_gaussians_spec(2.0, 0.2);
  const PointCloud xs = eight_gaussians(256, 2.0, 0.2, 2);
  const auto reps = minimizer_reports(xs.points, data, oc);
  double fm_rfm = 0, fm_os = 0;
  for (const auto& r : reps) {
    fm_rfm += angle_between(r.g_fm, r.g_rfm);
    fm_os += angle_between(r.g_fm, r.f_os);
  }
  const double deg = 180.0 / 3.14159265358979323846 / static_cast<double>(reps.size());
  fm_rfm *= deg;
  fm_os *= deg;

  const fs::path out = work / "oracle_8d";
  if (run_cli({"oracle", "--config", (kConfigs / "oracle_8d.json").string(), "--out", out.string(), "--deterministic-svg"}) != 0)
    return {false, "oracle command failed"};
  std::map<std::string, std::vector<double>> turning;
  for (const Row& r : read_csv(out / "oracle_summary.csv")) turning[r.at("kind")].push_back(num(r, "mean_turning_deg"));
  const auto& osl = turning["osl"];
  const auto& rfm = turning["rfm"];
  const bool both = osl.size() == 2 && rfm.size() == 2 && osl[0] < rfm[0] && osl[1] < rfm[1];
  return {fm_rfm < fm_os && both, "2D: angle(g_fm, g_rfm) " + fmt(fm_rfm, 3) + " deg < angle(g_fm, f_os) " + fmt(fm_os, 3) +
                                      " deg; 8D turning OSL " + fmt(osl.at(0), 3) + "/" + fmt(osl.at(1), 3) + " < RFM " +
                                      fmt(rfm.at(0), 3) + "/" + fmt(rfm.at(1), 3) + " deg"};
}

double mean_additivity(double c) {
  const PointCloud data = two_moons(64, 0.05, 1);
  const PointCloud xs = gaussian_noise(2, 2048, 8);
  OracleConfig oc;
  oc.epsilon = oc.c0 = c;
  oc.t_dist.t_max = 1e-6;
  oc.quad.t_max = 1e-6;
  double s = 0;
  Index n = 0;
  for (const auto& r : minimizer_reports(xs.points, data, oc)) {
    const AngleReport a = angle_analysis(r);
    if (a.degenerate || std::isnan(a.additivity_ratio)) continue;
    s += a.additivity_ratio;
    ++n;
  }
  return s / static_cast<double>(n);
}

Outcome c8_additivity() {
  const double r = mean_additivity(4.0);
  const double r_small = mean_additivity(0.01);
  return {r >= 0.98 && r <= 1.05, "mean ratio over 2048 draws at t = 0, eps = c0 = 4: " + fmt(r) +
                                      " (in [0.98, 1.05]); at eps = c0 = 0.01: " + fmt(r_small)};
}

Outcome c9_step_size(const fs::path& work) {
  const fs::path out = work / "sweep";
  if (run_cli({"sweep", "--config", (kConfigs / "sweep.json").string(), "--out", out.string(), "--deterministic-svg"}) != 0)
    return {false, "sweep command failed"};
  // The sweep runs {eta/2, eta, 2 eta, 4 eta} from eta = 0.25; the 4x range is {0.25, 0.5, 1}.
  double osl_worst = 0.0;
  bool rfm_fails = false;
  std::string rfm_detail;
  for (const Row& r : read_csv(out / "sweep.csv")) {
    const double eta = num(r, "eta");
    if (eta < 0.25 - 1e-12) continue;
    const double o = num(r, "final_outlierness");
    if (r.at("kind") == "osl") osl_worst = std::max(osl_worst, o);
    if (r.at("kind") == "rfm" && !(o < 3.0)) {
      rfm_fails = true;
      if (rfm_detail.empty()) rfm_detail = "eta " + fmt(eta, 3) + " gives " + fmt(o, 3);
    }
  }
  return {osl_worst < 3.0 && rfm_fails, "eta in [0.25, 1]: OSL worst final outlierness " + fmt(osl_worst, 3) +
                                            " (< 3); RFM " + (rfm_fails ? "fails, " + rfm_detail : "never fails")};
}

Outcome c10_mape(const fs::path& recipe) {
  double med = NAN;
  for (const Row& r : read_csv(recipe / "mape" / "mape_summary.csv"))
    if (r.at("key") == "median_ape_u") med = std::stod(r.at("value"));
  return {med <= 10.0, "held-out median APE of u vs sqrt(d^2 + c0): " + fmt(med, 4) + "% (<= 10%)"};
}

Outcome c11_adaptive(const FieldModel& model) {
  const PointCloud x0 = eight_gaussians(2000, 2.0, 0.2, 5);
  const PointCloud ref = two_moons(2000, 0.05, 6);
  auto run = [&](SamplerKind kind) {
    SamplerPlan p;
    p.sampler.kind = kind;
    p.sampler.eta = 0.64;
    p.sampler.max_steps = 100;
    p.sampler.stop_threshold = 0.0;
    p.sampler.patience = 10;
    const ChainBatch b = run_chains(model, x0.points, p, 7, false);
    const double steps = std::accumulate(b.steps.begin(), b.steps.end(), 0.0) / static_cast<double>(b.steps.size());
    return std::array<double, 3>{steps, hausdorff(b.final_states, ref.points), chamfer(b.final_states, ref.points)};
  };
  const auto fixed = run(SamplerKind::gradient_descent);
  const auto adaptive = run(SamplerKind::adaptive_gd);
  const bool pass = adaptive[0] <= 0.85 * fixed[0] && adaptive[1] <= 1.2 * fixed[1] && adaptive[2] <= 1.2 * fixed[2];
  return {pass, "mean steps " + fmt(adaptive[0], 4) + " vs " + fmt(fixed[0], 4) + " (" +
                    fmt(100.0 * (1.0 - adaptive[0] / fixed[0]), 3) + "% fewer, >= 15%); HD " + fmt(adaptive[1]) + " vs " +
                    fmt(fixed[1]) + ", CD " + fmt(adaptive[2]) + " vs " + fmt(fixed[2]) + " (<= +20%)"};
}

Outcome c12_c13_hubness(const fs::path& work, Outcome& c13) {
  const fs::path out = work / "coverage";
  if (run_cli({"coverage", "--config", (kConfigs / "coverage.json").string(), "--out", out.string(), "--deterministic-svg"}) !=
      0) {
    c13 = {false, "coverage command failed"};
    return {false, "coverage command failed"};
  }
  const auto bins = read_csv(out / "coverage.csv");
  const double low = num(bins.front(), "coverage"), high = num(bins.back(), "coverage");
  const double topk = num(bins.front(), "topk_mass");
  std::map<std::string, double> mass;
  for (const Row& r : read_csv(out / "coupling.csv")) mass[r.at("coupling")] = num(r, "topk_mass");
  const double closest = mass["minibatch_closest_with_replacement"], random = mass["random"];
  c13 = {closest > random, "top-8 share of training targets: closest with replacement " + fmt(closest, 3) + " > random " +
                               fmt(random, 3)};
  return {low < 0.05 && high > 0.9 && topk > 0.5, "256-d, 1024 points: coverage lowest-t bin " + fmt(low, 3) +
                                                      " (< 0.05), highest-t bin " + fmt(high, 3) +
                                                      " (> 0.9); topk_mass(8) at low t " + fmt(topk, 3) + " (> 0.5)"};
}

Outcome c14_metric_oracles() {
  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Mat a(2, 3), b(2, 3);
    for (Index i = 0; i < 6; ++i) {
      a.data()[i] = g(rng);
      b.data()[i] = g(rng);
    }
    std::vector<Index> perm{0, 1, 2};
    double best = 1e300;
    do {
      double c = 0;
      for (Index i = 0; i < 3; ++i) c += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).squaredNorm();
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    double hd = 0, cd_ab = 0, cd_ba = 0, hab = 0, hba = 0;
    for (Index i = 0; i < 3; ++i) {
      double ma = 1e300, mb = 1e300;
      for (Index j = 0; j < 3; ++j) {
        ma = std::min(ma, (a.col(i) - b.col(j)).squaredNorm());
        mb = std::min(mb, (b.col(i) - a.col(j)).squaredNorm());
      }
      cd_ab += ma / 3.0;
      cd_ba += mb / 3.0;
      hab = std::max(hab, std::sqrt(ma));
      hba = std::max(hba, std::sqrt(mb));
    }
    hd = std::max(hab, hba);
    worst = std::max({worst, std::abs(w2(a, b).value - std::sqrt(best / 3.0)), std::abs(hausdorff(a, b) - hd),
                      std::abs(chamfer(a, b) - (cd_ab + cd_ba))});
  }
  const Mat same = gaussian_noise(2, 100, 3).points;
  const MetricReport z = cloud_metrics(same, same);
  const bool zeros = z.w2 == 0.0 && z.hausdorff == 0.0 && z.chamfer == 0.0;
  return {worst < 1e-12 && zeros, "50 random 3-point pairs: max |metric - brute force| " + fmt(worst) +
                                      (zeros ? "; identical clouds give 0/0/0" : "; identical clouds not zero")};
}

// Every CSV under a, compared byte for byte with its twin under b.
std::string compare_csvs(const fs::path& a, const fs::path& b, Index& count) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const fs::path twin = b / fs::relative(e.path(), a);
    ++count;
    if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) return fs::relative(e.path(), a).string();
  }
  return "";
}

int run_recipe(const fs::path& out) {
  fs::remove_all(out);
  fs::create_directories(out);
  const std::string cmd = "cd '" + out.string() + "' && '" + (kSource / "tools" / "moons_recipe.sh").string() + "' '" +
                          std::string(DMARCH_BIN) + "' run > recipe.log 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dmarch_acceptance";
  fs::create_directories(work);
  std::ofstream log(work / "acceptance.txt");

  std::map<int, Outcome> results;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    results[id] = o;
    const std::string line = std::string(o.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + " " + name + ": " + o.detail;
    std::cout << line << std::endl;
    log << line << std::endl;
  };

  report(1, "projection invariance", c1_projection_invariance);
  report(2, "oracle equivalence", c2_oracle_equivalence);
  report(3, "quadrature convergence", c3_quadrature);
  report(4, "gradient correctness", c4_gradients);

  const fs::path recipe_a = work / "recipe_a", recipe_b = work / "recipe_b";
  const auto t0 = Clock::now();
  const int rc_a = run_recipe(recipe_a);
  const double recipe_secs = seconds_since(t0);
  const fs::path run_a = recipe_a / "run";
  std::optional<FieldModel> model;
  if (rc_a == 0) model = load_checkpoint(run_a / "train" / "model.json").model;

  report(5, "two-moons sample quality", [&]() -> Outcome {
    if (rc_a != 0) return {false, "recipe failed, see " + (recipe_a / "recipe.log").string()};
    std::map<std::string, double> m;
    for (const Row& r : read_csv(run_a / "metrics" / "metrics.csv")) m[r.at("metric")] = num(r, "value");
    double acc = NAN;
    for (const Row& r : read_csv(run_a / "sample" / "sample_summary.csv"))
      if (r.at("key") == "acceptance") acc = std::stod(r.at("value"));
    const double hd = m.at("hausdorff"), cd = m.at("chamfer");
    return {hd <= 0.9 && cd <= 0.02 && recipe_secs < 1200.0,
            "HD " + fmt(hd) + " (<= 0.9), CD " + fmt(cd) + " (<= 0.02), W2 " + fmt(m.at("w2")) + " (reported), HMC acceptance " +
                fmt(acc, 3) + ", recipe " + fmt(recipe_secs, 4) + " s (< 1200 s)"};
  });
  report(6, "HMC NFE accounting", [&]() -> Outcome {
    if (!model) return {false, "no trained model"};
    return c6_hmc(*model);
  });
  report(7, "locality ordering", [&] { return c7_locality(work); });
  report(8, "angle additivity", c8_additivity);
  report(9, "step-size robustness", [&] { return c9_step_size(work); });
  report(10, "distance MAPE", [&]() -> Outcome {
    if (rc_a != 0) return {false, "recipe failed"};
    return c10_mape(run_a);
  });
  report(11, "adaptive stopping", [&]() -> Outcome {
    if (!model) return {false, "no trained model"};
    return c11_adaptive(*model);
  });
  Outcome c13;
  report(12, "hubness coverage", [&] { return c12_c13_hubness(work, c13); });
  report(13, "coupling ablation", [&] { return c13; });
  report(14, "metric oracles", c14_metric_oracles);
  report(15, "determinism", [&]() -> Outcome {
    const fs::path va = work / "verify_a", vb = work / "verify_b";
    fs::remove_all(va);
    fs::remove_all(vb);
    if (run_cli({"verify", "--out", va.string()}) != 0 || run_cli({"verify", "--out", vb.string()}) != 0)
      return {false, "verify reported failures"};
    if (rc_a != 0 || run_recipe(recipe_b) != 0) return {false, "recipe failed"};
    Index n_verify = 0, n_recipe = 0;
    const std::string dv = compare_csvs(va, vb, n_verify);
    const std::string dr = compare_csvs(run_a, recipe_b / "run", n_recipe);
    if (!dv.empty()) return {false, "verify CSV differs: " + dv};
    if (!dr.empty()) return {false, "recipe CSV differs: " + dr};
    return {n_verify > 0 && n_recipe > 0, std::to_string(n_verify) + " verify CSV and " + std::to_string(n_recipe) +
                                              " recipe CSVs byte-identical across two runs"};
  });

  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& kv) { return !kv.second.pass; });
  const std::string summary = "acceptance: " + std::to_string(results.size() - static_cast<std::size_t>(failed)) + "/" +
                              std::to_string(results.size()) + " passed";
  std::cout << summary << std::endl;
  log << summary << std::endl;
  return failed == 0 ? 0 : 1;
}
