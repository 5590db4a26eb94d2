#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "dmarch/io.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/plots.hpp"
#include "dmarch/samplers.hpp"
#include "dmarch/trainer.hpp"

namespace dmarch::cli {

namespace fs = std::filesystem;

namespace {

// Seed and output directory, shared by every command.
void read_common(Reader& cfg, Common& common, const Overrides& ov, const std::string& default_out) {
  common.seed = cfg.seed("seed", 0);
  common.out = cfg.string("out", default_out);
  if (ov.seed) common.seed = *ov.seed;
  if (ov.out) common.out = *ov.out;
  cfg.integer("schema_version", kSchemaVersion);
}

void prepare_out(const Common& common) { fs::create_directories(common.out); }

std::string path_string(const fs::path& p) { return p.generic_string(); }

std::string indexed(const std::string& stem, Index i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(i));
  return stem + buf + ext;
}

void write_kv_csv(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& rows) {
  CsvWriter w(path);
  w.header({"key", "value"});
  for (const auto& [k, v] : rows) {
    w.field(k).field(v);
    w.end_row();
  }
}

LossConfig read_loss(Reader r) {
  LossConfig l;
  l.epsilon = r.number("epsilon", l.epsilon);
  l.c0 = r.number("c0", l.c0);
  l.lambda1 = r.number("lambda1", l.lambda1);
  l.lambda2 = r.number("lambda2", l.lambda2);
  l.fm_weight_mode = r.choice("fm_weight_mode", std::string(to_string(l.fm_weight_mode)),
                              [](const std::string& s) { return parse_fm_weight(s); });
  l.unnormalized_osl = r.boolean("unnormalized_osl", l.unnormalized_osl);
  r.finish();
  try {
    l.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return l;
}

json loss_json(const LossConfig& l) {
  return {{"epsilon", l.epsilon},
          {"c0", l.c0},
          {"lambda1", l.lambda1},
          {"lambda2", l.lambda2},
          {"fm_weight_mode", std::string(to_string(l.fm_weight_mode))},
          {"unnormalized_osl", l.unnormalized_osl}};
}

TimeDistribution read_t_dist(Reader r) {
  TimeDistribution t;
  t.t_min = r.number("t_min", t.t_min);
  t.t_max = r.number("t_max", t.t_max);
  r.finish();
  try {
    t.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return t;
}

json t_json(const TimeDistribution& t) { return {{"t_min", t.t_min}, {"t_max", t.t_max}}; }

SamplerConfig read_sampler(Reader r, const Overrides& ov) {
  SamplerConfig s;
  s.kind = r.choice("kind", std::string(to_string(s.kind)), [](const std::string& k) { return parse_sampler_kind(k); });
  if (ov.kind) {
    try {
      s.kind = parse_sampler_kind(*ov.kind);
    } catch (const Error& e) {
      fail("--kind", e.what());
    }
  }
  s.eta = r.number("eta", s.eta);
  s.max_steps = r.integer("max_steps", s.max_steps);
  s.stop_threshold = r.number("stop_threshold", s.stop_threshold);
  s.patience = r.integer("patience", s.patience);
  s.sigma = r.number("sigma", s.sigma);
  s.noise_scale = r.number("noise_scale", s.noise_scale);
  r.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return s;
}

json sampler_json(const SamplerConfig& s) {
  return {{"kind", std::string(to_string(s.kind))}, {"eta", s.eta},           {"max_steps", s.max_steps},
          {"stop_threshold", s.stop_threshold},     {"patience", s.patience}, {"sigma", s.sigma},
          {"noise_scale", s.noise_scale}};
}

HmcConfig read_hmc(Reader r) {
  HmcConfig h;
  h.mass = r.number("mass", h.mass);
  h.sigma = r.number("sigma", h.sigma);
  h.leapfrog_steps = r.integer("leapfrog_steps", h.leapfrog_steps);
  h.leapfrog_eps = r.number("leapfrog_eps", h.leapfrog_eps);
  h.n_proposals = r.integer("n_proposals", h.n_proposals);
  r.finish();
  try {
    h.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return h;
}

json hmc_json(const HmcConfig& h) {
  return {{"mass", h.mass},
          {"sigma", h.sigma},
          {"leapfrog_steps", h.leapfrog_steps},
          {"leapfrog_eps", h.leapfrog_eps},
          {"n_proposals", h.n_proposals}};
}

GmmOracleConfig read_gmm_oracle(Reader r, std::uint64_t seed) {
  GmmOracleConfig g;
  g.source = gmm8d_source();
  g.target = gmm8d_target();
  g.epsilon = r.number("epsilon", g.epsilon);
  g.c0 = r.number("c0", g.c0);
  g.samples = r.integer("samples", g.samples);
  g.seed = r.seed("seed", seed);
  g.ess_floor = r.number("ess_floor", g.ess_floor);
  g.t_dist = read_t_dist(r.object("t_dist"));
  r.finish();
  try {
    g.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return g;
}

json gmm_oracle_json(const GmmOracleConfig& g) {
  return {{"epsilon", g.epsilon}, {"c0", g.c0},
          {"samples", g.samples}, {"seed", g.seed},
          {"ess_floor", g.ess_floor}, {"t_dist", t_json(g.t_dist)}};
}

std::string model_path(Reader& cfg, const Overrides& ov) {
  std::string p = cfg.string("model", "");
  if (ov.model) p = *ov.model;
  if (p.empty()) fail(cfg.key_path("model"), "required (or pass --model)");
  return p;
}

svg::Box read_box(Reader& cfg, const std::string& key, const svg::Box& def) {
  const auto b = cfg.numbers(key, {def.x_min, def.x_max, def.y_min, def.y_max});
  if (b.size() != 4 || !(b[1] > b[0]) || !(b[3] > b[2])) {
    fail(cfg.key_path(key), "expected [x_min, x_max, y_min, y_max] with min < max");
  }
  return {b[0], b[1], b[2], b[3]};
}

json box_json(const svg::Box& b) { return json::array({b.x_min, b.x_max, b.y_min, b.y_max}); }

// One seeded draw from each component of the 8D source.
std::vector<Vec> gmm_starts(std::uint64_t seed) {
  const GmmSpec src = gmm8d_source();
  std::vector<Index> comp;
  const PointCloud draws = gmm_sample(src, 256, seed, &comp);
  std::vector<Vec> starts(src.components.size());
  for (Index j = 0; j < draws.size(); ++j) {
    auto& s = starts[static_cast<std::size_t>(comp[static_cast<std::size_t>(j)])];
    if (s.size() == 0) s = draws.points.col(j);
  }
  for (const auto& s : starts)
    if (s.size() == 0) throw NumericError("gmm starts: a source component received no draw");
  return starts;
}

void write_oracle_path_csv(const fs::path& path, const OracleTrajectory& t) {
  CsvWriter w(path);
  const Index d = t.path.states.front().size();
  std::vector<std::string> names{"step", "log_density", "outlierness", "turning_deg"};
  for (Index k = 0; k < d; ++k) names.push_back("x" + std::to_string(k));
  w.header(names);
  for (std::size_t i = 0; i < t.path.states.size(); ++i) {
    w.field(static_cast<Index>(i));
    w.field(i < t.log_density.size() ? t.log_density[i] : 0.0);
    w.field(i < t.outlierness.size() ? t.outlierness[i] : 0.0);
    w.field(i >= 1 && i - 1 < t.turning_angles_deg.size() ? t.turning_angles_deg[i - 1] : 0.0);
    for (Index k = 0; k < d; ++k) w.field(t.path.states[i](k));
    w.end_row();
  }
}

}  // namespace

int cmd_train(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/train");
  DataSpec target_spec = read_data_spec(cfg.object("target"), DataSpec{});
  const bool source_given = cfg.has("source");
  SourceSpec source_spec = read_source_spec(cfg.object("source"), SourceSpec{});

  FieldConfig fc;
  {
    Reader f = cfg.object("field");
    fc.hidden_widths = f.integers("hidden_widths", fc.hidden_widths);
    fc.activation = f.choice("activation", std::string(to_string(fc.activation)),
                             [](const std::string& s) { return parse_activation(s); });
    fc.mode = f.choice("mode", std::string(to_string(fc.mode)), [](const std::string& s) { return parse_field_mode(s); });
    fc.seed = f.seed("seed", common.seed);
    fc.output_scale = f.number("output_scale", fc.output_scale);
    f.finish();
  }
  TrainConfig tc;
  tc.seed = common.seed;
  tc.epochs = cfg.integer("epochs", tc.epochs);
  tc.batch_size = cfg.integer("batch_size", tc.batch_size);
  tc.checkpoint_every = cfg.integer("checkpoint_every", tc.checkpoint_every);
  tc.coupling.kind = cfg.choice("coupling", std::string(to_string(tc.coupling.kind)),
                                [](const std::string& s) { return parse_coupling(s); });
  tc.t_dist = read_t_dist(cfg.object("t_dist"));
  tc.loss = read_loss(cfg.object("loss"));
  {
    Reader o = cfg.object("optimizer");
    tc.optimizer = o.choice("kind", std::string(to_string(tc.optimizer)),
                            [](const std::string& s) { return parse_optimizer(s); });
    tc.lr = o.number("lr", tc.lr);
    const auto betas = o.numbers("betas", {tc.beta1, tc.beta2});
    if (betas.size() != 2) fail(o.key_path("betas"), "expected two numbers");
    tc.beta1 = betas[0];
    tc.beta2 = betas[1];
    tc.adam_eps = o.number("eps", tc.adam_eps);
    tc.weight_decay = o.number("weight_decay", tc.weight_decay);
    tc.grad_clip = o.number("grad_clip", tc.grad_clip);
    o.finish();
  }
  cfg.finish();

  const PointCloud target = target_spec.load(".");
  if (!source_given || (source_spec.kind == "standard_normal" && !cfg.object("source").has("dim"))) {
    source_spec.dim = target.dim();
  }
  tc.source = source_spec.build();
  fc.input_dim = target.dim();
  try {
    fc.validate();
  } catch (const Error& e) {
    fail("field", e.what());
  }
  try {
    tc.validate();
  } catch (const Error& e) {
    fail("<root>", e.what());
  }

  json eff;
  eff["schema_version"] = kSchemaVersion;
  eff["seed"] = common.seed;
  eff["target"] = target_spec.to_json();
  eff["source"] = source_spec.to_json();
  eff["field"] = {{"hidden_widths", fc.hidden_widths},
                  {"activation", std::string(to_string(fc.activation))},
                  {"mode", std::string(to_string(fc.mode))},
                  {"seed", fc.seed},
                  {"output_scale", fc.output_scale}};
  eff["epochs"] = tc.epochs;
  eff["batch_size"] = tc.batch_size;
  eff["checkpoint_every"] = tc.checkpoint_every;
  eff["coupling"] = std::string(to_string(tc.coupling.kind));
  eff["t_dist"] = t_json(tc.t_dist);
  eff["loss"] = loss_json(tc.loss);
  eff["optimizer"] = {{"kind", std::string(to_string(tc.optimizer))},
                      {"lr", tc.lr},
                      {"betas", {tc.beta1, tc.beta2}},
                      {"eps", tc.adam_eps},
                      {"weight_decay", tc.weight_decay},
                      {"grad_clip", tc.grad_clip}};

  prepare_out(common);
  std::vector<std::string> outputs{"model.json", "train_log.csv", "target.csv"};
  CheckpointHook hook;
  if (tc.checkpoint_every > 0) {
    fs::create_directories(common.out / "checkpoints");
    hook = [&](Index step, const FieldModel& m) {
      const std::string name = "checkpoints/" + indexed("step_", step, ".json");
      save_checkpoint(common.out / name, m, tc.loss);
      outputs.push_back(name);
    };
  }
  write_cloud_csv(common.out / "target.csv", target.points);
  const TrainResult r = train(init_field(fc), target, tc, hook);
  save_checkpoint(common.out / "model.json", r.model, tc.loss);
  write_train_log_csv(common.out / "train_log.csv", r.log);
  write_manifest(common, "train", eff, outputs);
  if (r.aborted) throw NumericError("trainer: " + r.abort_reason + " (last good model saved)");
  const auto& last = r.log.back();
  std::cout << "train: " << r.log.size() << " steps, final total loss " << format_double(last.total) << ", wrote "
            << path_string(common.out / "model.json") << "\n";
  return 0;
}

int cmd_sample(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/sample");
  const std::string model_file = model_path(cfg, ov);
  Reader init = cfg.object("init");
  const bool init_source_given = init.has("source");
  SourceSpec src = read_source_spec(init.object("source"), SourceSpec{});
  const Index n = init.integer("n", 10000);
  if (n < 1) fail(init.key_path("n"), "must be >= 1");
  const std::uint64_t init_seed = init.seed("seed", common.seed + 1);
  init.finish();
  SamplerPlan plan;
  plan.sampler = read_sampler(cfg.object("sampler"), ov);
  plan.then_hmc = cfg.boolean("then_hmc", false) || ov.then_hmc;
  plan.hmc = read_hmc(cfg.object("hmc"));
  plan.hmc.seed = common.seed;
  const Index record = cfg.integer("record", 0);
  if (record < 0) fail(cfg.key_path("record"), "must be >= 0");
  if (plan.then_hmc && plan.sampler.kind != SamplerKind::sphere_tracing) {
    fail(cfg.key_path("then_hmc"), "requires sampler.kind sphere_tracing");
  }
  cfg.finish();

  const Checkpoint ck = load_checkpoint(model_file);
  const FieldModel& model = ck.model;
  if (!init_source_given || (src.kind == "standard_normal" && !cfg.object("init").object("source").has("dim"))) {
    src.dim = model.dim();
  }
  const GmmSpec source = src.build();
  if (source.dim() != model.dim()) fail("init.source", "dimension does not match the model");
  const PointCloud x0 = gmm_sample(source, n, init_seed);

  json eff;
  eff["schema_version"] = kSchemaVersion;
  eff["seed"] = common.seed;
  eff["model"] = model_file;
  eff["init"] = {{"source", src.to_json()}, {"n", n}, {"seed", init_seed}};
  eff["sampler"] = sampler_json(plan.sampler);
  eff["then_hmc"] = plan.then_hmc;
  eff["hmc"] = hmc_json(plan.hmc);
  eff["record"] = record;

  prepare_out(common);
  const ChainBatch batch = run_chains(model, x0.points, plan, common.seed, false);
  std::vector<std::string> outputs{"samples.csv", "sample_summary.csv"};
  write_cloud_csv(common.out / "samples.csv", batch.final_states);

  double mean_nfe = 0.0, mean_steps = 0.0;
  Index max_nfe = 0;
  for (std::size_t j = 0; j < batch.nfe.size(); ++j) {
    mean_nfe += static_cast<double>(batch.nfe[j]);
    mean_steps += static_cast<double>(batch.steps[j]);
    max_nfe = std::max(max_nfe, batch.nfe[j]);
  }
  mean_nfe /= static_cast<double>(n);
  mean_steps /= static_cast<double>(n);
  const double acc = batch.proposals > 0 ? static_cast<double>(batch.accepted) / static_cast<double>(batch.proposals) : 0.0;
  write_kv_csv(common.out / "sample_summary.csv", {{"chains", std::to_string(n)},
                                                   {"mean_nfe", format_double(mean_nfe)},
                                                   {"max_nfe", std::to_string(max_nfe)},
                                                   {"mean_steps", format_double(mean_steps)},
                                                   {"accepted", std::to_string(batch.accepted)},
                                                   {"proposals", std::to_string(batch.proposals)},
                                                   {"acceptance", format_double(acc)}});

  std::vector<Trajectory> trajs;
  if (record > 0) {
    const Index k = std::min(record, n);
    const ChainBatch rec = run_chains(model, x0.points.leftCols(k), plan, common.seed, true);
    for (Index j = 0; j < k; ++j) {
      const std::string name = indexed("traj_", j, ".csv");
      write_trajectory_csv(common.out / name, rec.trajectories[static_cast<std::size_t>(j)]);
      outputs.push_back(name);
    }
    trajs = rec.trajectories;
  }
  if (model.dim() == 2) {
    const svg::Box box = plots::bounding_box(x0.points, 0.05);
    plots::scatter({&x0.points, &batch.final_states}, {"#000000", "#1f4fff"}, box, "init (black) and samples (blue)")
        .save(common.out / "samples.svg", common.deterministic_svg);
    outputs.push_back("samples.svg");
    if (!trajs.empty()) {
      plots::trajectories(trajs, box, nullptr, "trajectories").save(common.out / "trajectories.svg",
                                                                     common.deterministic_svg);
      outputs.push_back("trajectories.svg");
    }
  }
  write_manifest(common, "sample", eff, outputs);
  std::cout << "sample: " << n << " chains, mean NFE " << format_double(mean_nfe) << ", acceptance "
            << format_double(acc) << ", wrote " << path_string(common.out / "samples.csv") << "\n";
  return 0;
}

int cmd_metrics(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/metrics");
  DataSpec a_def;
  a_def.kind = "csv";
  DataSpec a;
  if (ov.samples) {
    a = a_def;
    a.path = *ov.samples;
    cfg.object("a");
  } else {
    if (!cfg.has("a")) fail(cfg.key_path("a"), "required (or pass --samples)");
    a = read_data_spec(cfg.object("a"), a_def);
  }
  DataSpec b_def;
  b_def.n = 10000;
  b_def.seed = 6;
  const DataSpec b = read_data_spec(cfg.object("b"), b_def);
  const Index cap = cfg.integer("w2_cap", 2048);
  if (cap < 1) fail(cfg.key_path("w2_cap"), "must be >= 1");
  cfg.finish();

  const PointCloud ca = a.load("."), cb = b.load(".");
  if (ca.dim() != cb.dim()) fail("b", "dimension differs from a");
  json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed}, {"a", a.to_json()}, {"b", b.to_json()},
           {"w2_cap", cap}};
  prepare_out(common);
  const MetricReport m = cloud_metrics(ca.points, cb.points, cap, common.seed);
  write_metrics_csv(common.out / "metrics.csv", m);
  write_manifest(common, "metrics", eff, {"metrics.csv"});
  std::cout << "metrics: W2 " << format_double(m.w2) << " (" << m.w2_method << "), Hausdorff "
            << format_double(m.hausdorff) << ", Chamfer " << format_double(m.chamfer) << "\n";
  return 0;
}

int cmd_oracle(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/oracle");
  const std::string mode = cfg.string("mode", "dataset");
  if (mode != "dataset" && mode != "gmm8d") fail(cfg.key_path("mode"), "expected dataset or gmm8d");

  if (mode == "gmm8d") {
    const GmmOracleConfig g = read_gmm_oracle(cfg.object("gmm"), common.seed);
    const double eta = cfg.number("eta", 0.1);
    if (!(eta > 0.0)) fail(cfg.key_path("eta"), "must be > 0");
    const Index steps = cfg.integer("steps", 10);
    if (steps < 1) fail(cfg.key_path("steps"), "must be >= 1");
    std::vector<MinimizerKind> kinds;
    const auto names = cfg.strings("kinds", {"fm", "rfm", "osl", "del"});
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        kinds.push_back(parse_minimizer_kind(names[i]));
      } catch (const Error& e) {
        fail(cfg.key_path("kinds") + "[" + std::to_string(i) + "]", e.what());
      }
    }
    const std::uint64_t start_seed = cfg.seed("start_seed", 21);
    cfg.finish();

    json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed}, {"mode", mode},
             {"gmm", gmm_oracle_json(g)},        {"eta", eta},          {"steps", steps},
             {"kinds", names},                   {"start_seed", start_seed}};
    prepare_out(common);
    const auto starts = gmm_starts(start_seed);
    std::vector<std::string> outputs{"oracle_summary.csv"};
    CsvWriter sum(common.out / "oracle_summary.csv");
    sum.header({"kind", "start", "mean_turning_deg", "final_log_density", "final_outlierness", "min_ess", "ess_warning"});
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      for (std::size_t s = 0; s < starts.size(); ++s) {
        const OracleTrajectory t = oracle_trajectory(starts[s], kinds[k], g, eta, steps);
        const std::string name = "oracle_traj_" + names[k] + "_" + std::to_string(s) + ".csv";
        write_oracle_path_csv(common.out / name, t);
        outputs.push_back(name);
        sum.field(names[k]).field(static_cast<Index>(s)).field(t.mean_turning_deg());
        sum.field(t.log_density.back()).field(t.outlierness.back()).field(t.min_ess);
        sum.field(std::string(t.ess_warning ? "1" : "0"));
        sum.end_row();
        std::cout << "oracle: " << names[k] << " from source component " << s << ": mean turning "
                  << format_double(t.mean_turning_deg()) << " deg, final outlierness "
                  << format_double(t.outlierness.back()) << "\n";
      }
    }
    write_manifest(common, "oracle", eff, outputs);
    return 0;
  }

  DataSpec ds_def;
  ds_def.n = 64;
  const DataSpec ds = read_data_spec(cfg.object("dataset"), ds_def);
  SourceSpec src_def;
  src_def.kind = "eight_gaussians";
  const SourceSpec src = read_source_spec(cfg.object("source"), src_def);
  OracleConfig oc;
  oc.epsilon = cfg.number("epsilon", oc.epsilon);
  oc.c0 = cfg.number("c0", oc.c0);
  oc.t_dist = read_t_dist(cfg.object("t_dist"));
  {
    Reader q = cfg.object("quad");
    oc.quad.nodes = q.integer("nodes", oc.quad.nodes);
    oc.quad.scheme = q.choice("scheme", std::string(to_string(oc.quad.scheme)),
                              [](const std::string& s) { return parse_quad_scheme(s); });
    q.finish();
  }
  oc.quad.t_min = oc.t_dist.t_min;
  oc.quad.t_max = oc.t_dist.t_max;
  Reader q = cfg.object("queries");
  std::optional<Mat> points = q.points("points");
  const Index nq = q.integer("n", 16);
  if (nq < 1) fail(q.key_path("n"), "must be >= 1");
  const std::uint64_t q_seed = q.seed("seed", common.seed + 1);
  q.finish();
  cfg.finish();

  const PointCloud data = ds.load(".");
  SourceSpec src_eff = src;
  if (src.kind == "standard_normal") src_eff.dim = data.dim();
  oc.source = src_eff.build();
  try {
    oc.validate(data.dim());
  } catch (const Error& e) {
    fail("<root>", e.what());
  }
  const Mat xs = points ? *points : gmm_sample(oc.source, nq, q_seed).points;
  if (xs.rows() != data.dim()) fail(q.key_path("points"), "dimension differs from the dataset");

  json eff{{"schema_version", kSchemaVersion},
           {"seed", common.seed},
           {"mode", mode},
           {"dataset", ds.to_json()},
           {"source", src_eff.to_json()},
           {"epsilon", oc.epsilon},
           {"c0", oc.c0},
           {"t_dist", t_json(oc.t_dist)},
           {"quad", {{"nodes", oc.quad.nodes}, {"scheme", std::string(to_string(oc.quad.scheme))}}}};
  if (points) {
    json pts = json::array();
    for (Index j = 0; j < xs.cols(); ++j) pts.push_back(std::vector<double>(xs.col(j).data(), xs.col(j).data() + xs.rows()));
    eff["queries"] = {{"points", pts}};
  } else {
    eff["queries"] = {{"n", nq}, {"seed", q_seed}};
  }
  prepare_out(common);
  const auto reports = minimizer_reports(xs, data, oc);
  write_oracle_csv(common.out / "oracle.csv", xs, reports);
  std::vector<std::string> outputs{"oracle.csv", "angles.csv"};
  CsvWriter w(common.out / "angles.csv");
  w.header({"query", "angle_os_fm", "angle_os_de", "angle_fm_de", "additivity_ratio", "degenerate"});
  double ratio_sum = 0.0;
  Index ratio_n = 0;
  for (std::size_t j = 0; j < reports.size(); ++j) {
    const AngleReport a = angle_analysis(reports[j]);
    w.field(static_cast<Index>(j)).field(a.angle_os_fm).field(a.angle_os_de).field(a.angle_fm_de);
    w.field(a.additivity_ratio).field(std::string(a.degenerate ? "1" : "0"));
    w.end_row();
    if (!a.degenerate) {
      ratio_sum += a.additivity_ratio;
      ++ratio_n;
    }
  }
  if (data.dim() == 2) {
    Mat both(2, data.size() + xs.cols());
    both << data.points, xs;
    plots::oracle_arrows(xs, reports, data.points, plots::bounding_box(both, 0.15),
                         "minimizers: FM red, RFM green, OSL orange, DEL blue")
        .save(common.out / "oracle.svg", common.deterministic_svg);
    outputs.push_back("oracle.svg");
  }
  write_manifest(common, "oracle", eff, outputs);
  std::cout << "oracle: " << xs.cols() << " queries";
  if (ratio_n > 0) std::cout << ", mean additivity ratio " << format_double(ratio_sum / static_cast<double>(ratio_n));
  std::cout << "\n";
  return 0;
}

int cmd_coverage(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/coverage");
  DataSpec ds_def;
  ds_def.kind = "hubness";
  ds_def.dim = 256;
  ds_def.n = 1024;
  const DataSpec ds = read_data_spec(cfg.object("dataset"), ds_def);
  const Index n_per_bin = cfg.integer("n_per_bin", 4096);
  const Index n_bins = cfg.integer("n_bins", 10);
  const Index k = cfg.integer("k", 8);
  if (n_per_bin < 1) fail(cfg.key_path("n_per_bin"), "must be >= 1");
  if (n_bins < 1) fail(cfg.key_path("n_bins"), "must be >= 1");
  if (k < 1) fail(cfg.key_path("k"), "must be >= 1");
  Reader cc = cfg.object("coupling_check");
  const Index batch = cc.integer("batch", 256);
  const Index n_batches = cc.integer("n_batches", 16);
  if (batch < 1) fail(cc.key_path("batch"), "must be >= 1");
  if (n_batches < 1) fail(cc.key_path("n_batches"), "must be >= 1");
  cc.finish();
  cfg.finish();

  const PointCloud data = ds.load(".");
  std::vector<double> edges;
  for (Index i = 0; i <= n_bins; ++i) edges.push_back(static_cast<double>(i) / static_cast<double>(n_bins));
  json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed}, {"dataset", ds.to_json()},
           {"n_per_bin", n_per_bin}, {"n_bins", n_bins}, {"k", k},
           {"coupling_check", {{"batch", batch}, {"n_batches", n_batches}}}};
  prepare_out(common);
  const CoverageCurve curve = coverage_curve(data, n_per_bin, edges, k, common.seed);
  write_coverage_csv(common.out / "coverage.csv", curve);
  plots::coverage_plot(curve).save(common.out / "coverage.svg", common.deterministic_svg);
  CsvWriter w(common.out / "coupling.csv");
  w.header({"coupling", "topk_mass", "k", "batch", "n_batches"});
  for (CouplingKind kind : {CouplingKind::random, CouplingKind::minibatch_closest_with_replacement}) {
    const double m = coupling_topk_mass(data, batch, kind, n_batches, k, common.seed);
    w.field(std::string(to_string(kind))).field(m).field(k).field(batch).field(n_batches);
    w.end_row();
  }
  write_manifest(common, "coverage", eff, {"coverage.csv", "coverage.svg", "coupling.csv"});
  std::cout << "coverage: lowest-t bin " << format_double(curve.coverage.front()) << ", highest-t bin "
            << format_double(curve.coverage.back()) << "\n";
  return 0;
}

int cmd_mape(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/mape");
  const std::string model_file = model_path(cfg, ov);
  DataSpec ds_def;
  ds_def.seed = 11;
  const DataSpec ds = read_data_spec(cfg.object("dataset"), ds_def);
  const bool source_given = cfg.has("source");
  SourceSpec src = read_source_spec(cfg.object("source"), SourceSpec{});
  const CouplingKind coupling = cfg.choice("coupling", "random", [](const std::string& s) { return parse_coupling(s); });
  const Index n_pairs = cfg.integer("n_pairs", 4096);
  if (n_pairs < 1) fail(cfg.key_path("n_pairs"), "must be >= 1");
  const bool c0_given = cfg.has("c0");
  double c0 = cfg.number("c0", 0.01);
  const Index n_bins = cfg.integer("n_bins", 10);
  if (n_bins < 1) fail(cfg.key_path("n_bins"), "must be >= 1");
  const TimeDistribution t_dist = read_t_dist(cfg.object("t_dist"));
  cfg.finish();

  const Checkpoint ck = load_checkpoint(model_file);
  if (!c0_given) c0 = ck.loss.c0;
  const PointCloud data = ds.load(".");
  if (data.dim() != ck.model.dim()) fail("dataset", "dimension does not match the model");
  if (!source_given || src.kind == "standard_normal") src.dim = data.dim();
  const GmmSpec source = src.build();
  CouplingStrategy cs;
  cs.kind = coupling;
  json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed},   {"model", model_file},
           {"dataset", ds.to_json()},          {"source", src.to_json()}, {"coupling", std::string(to_string(coupling))},
           {"n_pairs", n_pairs},               {"c0", c0},               {"n_bins", n_bins},
           {"t_dist", t_json(t_dist)}};
  prepare_out(common);
  const PairBatch pairs = sample_pairs(data, n_pairs, t_dist, cs, common.seed, &source);
  const MapeReport rep = distance_mape(ck.model, pairs, c0, n_bins);
  write_mape_csv(common.out / "mape.csv", rep);
  write_kv_csv(common.out / "mape_summary.csv", {{"pairs", std::to_string(n_pairs)},
                                                 {"median_ape_u", format_double(rep.median_ape_u)},
                                                 {"median_ape_uv", format_double(rep.median_ape_uv)}});
  plots::Series su{{}, {}, "#1f77b4", "u vs sqrt(d^2 + c0)"};
  plots::Series suv{{}, {}, "#ff7f0e", "|u v| vs d"};
  for (const auto& b : rep.bins) {
    if (b.omitted) continue;
    su.x.push_back(0.5 * (b.lo + b.hi));
    su.y.push_back(b.mape_u);
    suv.x.push_back(0.5 * (b.lo + b.hi));
    suv.y.push_back(b.mape_uv);
  }
  plots::curves({su, suv}, "distance MAPE (%) by distance bin").save(common.out / "mape.svg", common.deterministic_svg);
  write_manifest(common, "mape", eff, {"mape.csv", "mape_summary.csv", "mape.svg"});
  std::cout << "mape: median APE of u " << format_double(rep.median_ape_u) << "%, of |u v| "
            << format_double(rep.median_ape_uv) << "%\n";
  return 0;
}

int cmd_sweep(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/sweep");
  const GmmOracleConfig g = read_gmm_oracle(cfg.object("gmm"), common.seed);
  const double eta = cfg.number("eta", 0.25);
  if (!(eta > 0.0)) fail(cfg.key_path("eta"), "must be > 0");
  const Index steps = cfg.integer("steps", 10);
  if (steps < 1) fail(cfg.key_path("steps"), "must be >= 1");
  const double threshold = cfg.number("threshold", 3.0);
  const auto names = cfg.strings("kinds", {"osl", "rfm"});
  std::vector<MinimizerKind> kinds;
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      kinds.push_back(parse_minimizer_kind(names[i]));
    } catch (const Error& e) {
      fail(cfg.key_path("kinds") + "[" + std::to_string(i) + "]", e.what());
    }
  }
  const std::uint64_t start_seed = cfg.seed("start_seed", 21);
  cfg.finish();

  json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed},     {"gmm", gmm_oracle_json(g)},
           {"eta", eta},                       {"steps", steps},          {"threshold", threshold},
           {"kinds", names},                   {"start_seed", start_seed}};
  prepare_out(common);
  const auto starts = gmm_starts(start_seed);
  const auto etas = sweep_etas(eta);
  CsvWriter sum(common.out / "sweep.csv");
  sum.header({"eta", "kind", "start", "final_outlierness", "mean_turning_deg", "min_ess", "below_threshold"});
  CsvWriter curves(common.out / "sweep_curves.csv");
  curves.header({"eta", "kind", "start", "step", "outlierness", "log_density"});
  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  std::vector<std::string> outputs{"sweep.csv", "sweep_curves.csv"};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::vector<plots::Series> series;
    for (std::size_t e = 0; e < etas.size(); ++e) {
      for (std::size_t s = 0; s < starts.size(); ++s) {
        const OracleTrajectory t = oracle_trajectory(starts[s], kinds[k], g, etas[e], steps);
        const double fin = t.outlierness.back();
        sum.field(etas[e]).field(names[k]).field(static_cast<Index>(s)).field(fin).field(t.mean_turning_deg());
        sum.field(t.min_ess).field(std::string(fin < threshold ? "1" : "0"));
        sum.end_row();
        plots::Series ser{{}, {}, palette[e % 6], s == 0 ? "eta " + format_double(etas[e]) : ""};
        for (std::size_t i = 0; i < t.outlierness.size(); ++i) {
          curves.field(etas[e]).field(names[k]).field(static_cast<Index>(s)).field(static_cast<Index>(i));
          curves.field(t.outlierness[i]).field(t.log_density[i]);
          curves.end_row();
          ser.x.push_back(static_cast<double>(i));
          ser.y.push_back(std::log10(1.0 + t.outlierness[i]));
        }
        series.push_back(ser);
      }
    }
    const std::string name = "sweep_" + names[k] + ".svg";
    plots::curves(series, names[k] + ": log10(1 + outlierness) vs step").save(common.out / name,
                                                                               common.deterministic_svg);
    outputs.push_back(name);
  }
  write_manifest(common, "sweep", eff, outputs);
  std::cout << "sweep: " << etas.size() << " step sizes x " << kinds.size() << " minimizers, wrote "
            << path_string(common.out / "sweep.csv") << "\n";
  return 0;
}

int cmd_plot(Reader& cfg, Common& common, const Overrides& ov) {
  read_common(cfg, common, ov, "runs/plot");
  const std::string model_file = model_path(cfg, ov);
  plots::LevelSetOptions opts;
  opts.box = read_box(cfg, "box", opts.box);
  opts.grid = static_cast<int>(cfg.integer("grid", opts.grid));
  if (opts.grid < 2) fail(cfg.key_path("grid"), "must be >= 2");
  opts.n_levels = static_cast<int>(cfg.integer("levels", opts.n_levels));
  if (opts.n_levels < 1) fail(cfg.key_path("levels"), "must be >= 1");
  opts.arrows = static_cast<int>(cfg.integer("arrows", opts.arrows));
  if (opts.arrows < 0) fail(cfg.key_path("arrows"), "must be >= 0");
  const bool overlay_given = cfg.has("overlay");
  const DataSpec overlay = read_data_spec(cfg.object("overlay"), DataSpec{});
  std::string samples = cfg.string("samples", "");
  if (ov.samples) samples = *ov.samples;
  const auto traj_files = cfg.strings("trajectories", {});
  cfg.finish();

  const Checkpoint ck = load_checkpoint(model_file);
  if (ck.model.dim() != 2) fail("model", "plot needs a 2D model");
  json eff{{"schema_version", kSchemaVersion}, {"seed", common.seed}, {"model", model_file},
           {"box", box_json(opts.box)}, {"grid", opts.grid}, {"levels", opts.n_levels}, {"arrows", opts.arrows},
           {"trajectories", traj_files}};
  if (overlay_given) eff["overlay"] = overlay.to_json();
  if (!samples.empty()) eff["samples"] = samples;

  PointCloud over;
  if (overlay_given) {
    over = overlay.load(".");
    opts.overlay = &over.points;
  }
  prepare_out(common);
  opts.title = "level sets of u and arrows of -v";
  plots::level_set(ck.model, opts).save(common.out / "levelset.svg", common.deterministic_svg);
  std::vector<std::string> outputs{"levelset.svg"};
  if (!samples.empty()) {
    const Mat pts = read_cloud_csv(samples);
    std::vector<const Mat*> clouds{&pts};
    std::vector<std::string> colors{"#1f4fff"};
    if (overlay_given) {
      clouds.insert(clouds.begin(), &over.points);
      colors.insert(colors.begin(), "#fa7f57");
    }
    plots::scatter(clouds, colors, opts.box, "samples").save(common.out / "samples.svg", common.deterministic_svg);
    outputs.push_back("samples.svg");
  }
  if (!traj_files.empty()) {
    std::vector<Trajectory> trajs;
    for (const auto& f : traj_files) {
      const Mat m = read_cloud_csv(f);  // step, u, step_norm, x0, x1
      if (m.rows() != 5) fail("trajectories", f + ": expected a 2D trajectory CSV");
      Trajectory t;
      for (Index j = 0; j < m.cols(); ++j) t.states.push_back(m.block(3, j, 2, 1));
      trajs.push_back(t);
    }
    plots::trajectories(trajs, opts.box, opts.overlay, "trajectories: init black, mid yellow, final blue")
        .save(common.out / "trajectories.svg", common.deterministic_svg);
    outputs.push_back("trajectories.svg");
  }
  write_manifest(common, "plot", eff, outputs);
  std::cout << "plot: wrote " << path_string(common.out / "levelset.svg") << "\n";
  return 0;
}

}  // namespace dmarch::cli
