#include "dmarch/io.hpp"

#include <charconv>
#include <sstream>

#include "json.hpp"

namespace dmarch {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(n);
  end_row();
}

CsvWriter& CsvWriter::field(const std::string& s) {
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(format_double(v)); }
CsvWriter& CsvWriter::field(Index v) { return field(std::to_string(v)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
  if (!out_) throw Error("write failed: " + path_.string());
}

namespace {

std::vector<std::string> coord_names(const std::string& prefix, Index d) {
  std::vector<std::string> names;
  for (Index k = 0; k < d; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

void write_vec(CsvWriter& w, const Vec& v) {
  for (Index k = 0; k < v.size(); ++k) w.field(v(k));
}

double parse_double(const std::string& s, const fs::path& path, Index line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    throw ShapeError(path.string() + ":" + std::to_string(line) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_cloud_csv(const fs::path& path, const Mat& points) {
  CsvWriter w(path);
  w.header(coord_names("x", points.rows()));
  for (Index j = 0; j < points.cols(); ++j) {
    write_vec(w, points.col(j));
    w.end_row();
  }
}

Mat read_cloud_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ShapeError(path.string() + ": empty file");
  Index dim = 1;
  for (char c : line) dim += c == ',';
  std::vector<double> vals;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index count = 0;
    while (std::getline(ss, cell, ',')) {
      vals.push_back(parse_double(cell, path, lineno));
      ++count;
    }
    if (count != dim) {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                       " columns, got " + std::to_string(count));
    }
  }
  Mat m(dim, static_cast<Index>(vals.size()) / dim);
  std::copy(vals.begin(), vals.end(), m.data());
  return m;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
  CsvWriter w(path);
  std::vector<std::string> names{"step", "u", "step_norm"};
  const Index d = traj.states.empty() ? 0 : traj.states.front().size();
  append(names, coord_names("x", d));
  w.header(names);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    w.field(static_cast<Index>(i));
    w.field(i < traj.u_values.size() ? traj.u_values[i] : 0.0);
    w.field(i < traj.step_norms.size() ? traj.step_norms[i] : 0.0);
    write_vec(w, traj.states[i]);
    w.end_row();
  }
}

void write_train_log_csv(const fs::path& path, const std::vector<TrainLogRow>& rows) {
  CsvWriter w(path);
  w.header({"step", "osl", "del", "total", "grad_norm"});
  for (const auto& r : rows) {
    w.field(r.step).field(r.osl).field(r.del).field(r.total).field(r.grad_norm);
    w.end_row();
  }
}

void write_oracle_csv(const fs::path& path, const Mat& xs, const std::vector<MinimizerReport>& reports) {
  if (static_cast<Index>(reports.size()) != xs.cols()) throw ShapeError("oracle csv: one report per query required");
  CsvWriter w(path);
  const Index d = xs.rows();
  const Index n = reports.empty() ? 0 : reports.front().pi.size();
  std::vector<std::string> names = coord_names("x", d);
  append(names, coord_names("pi", n));
  for (const char* p : {"g_fm", "g_rfm", "f_os", "h_de"}) append(names, coord_names(std::string(p) + "_", d));
  w.header(names);
  for (Index j = 0; j < xs.cols(); ++j) {
    const auto& r = reports[static_cast<std::size_t>(j)];
    write_vec(w, xs.col(j));
    write_vec(w, r.pi);
    write_vec(w, r.g_fm);
    write_vec(w, r.g_rfm);
    write_vec(w, r.f_os);
    write_vec(w, r.h_de);
    w.end_row();
  }
}

void write_metrics_csv(const fs::path& path, const MetricReport& report) {
  CsvWriter w(path);
  w.header({"metric", "value", "method", "n_a", "n_b"});
  auto row = [&](const std::string& name, double v, const std::string& method) {
    w.field(name).field(v).field(method).field(report.n_a).field(report.n_b);
    w.end_row();
  };
  row("w2", report.w2, report.w2_method);
  row("hausdorff", report.hausdorff, "exact");
  row("chamfer", report.chamfer, "exact");
}

void write_coverage_csv(const fs::path& path, const CoverageCurve& curve) {
  CsvWriter w(path);
  w.header({"t_lo", "t_hi", "coverage", "topk_mass", "k"});
  for (std::size_t i = 0; i < curve.coverage.size(); ++i) {
    w.field(curve.t_lo[i]).field(curve.t_hi[i]).field(curve.coverage[i]).field(curve.topk_mass[i]).field(curve.k);
    w.end_row();
  }
}

void write_mape_csv(const fs::path& path, const MapeReport& report) {
  CsvWriter w(path);
  w.header({"d_lo", "d_hi", "count", "mape_u", "std_u", "mape_uv", "std_uv", "omitted"});
  for (const auto& b : report.bins) {
    w.field(b.lo).field(b.hi).field(b.count).field(b.mape_u).field(b.std_u).field(b.mape_uv).field(b.std_uv);
    w.field(b.omitted ? std::string("1") : std::string("0"));
    w.end_row();
  }
}

namespace {

// Doubles are stored as shortest round-trip strings so the JSON reader cannot
// perturb them.
json params_to_json(const Vec& p) {
  json arr = json::array();
  for (Index i = 0; i < p.size(); ++i) arr.push_back(format_double(p(i)));
  return arr;
}

Vec params_from_json(const json& arr, const fs::path& path) {
  if (!arr.is_array()) throw ShapeError(path.string() + ": params must be an array");
  Vec p(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) throw ShapeError(path.string() + ": params/" + std::to_string(i) + " must be a string");
    p(static_cast<Index>(i)) = parse_double(arr[i].get<std::string>(), path, 0);
  }
  return p;
}

}  // namespace

void save_checkpoint(const fs::path& path, const FieldModel& model, const LossConfig& loss) {
  const auto& c = model.config();
  json j;
  j["format_version"] = kCheckpointFormat;
  j["field"] = {{"input_dim", c.input_dim},
                {"hidden_widths", c.hidden_widths},
                {"activation", std::string(to_string(c.activation))},
                {"mode", std::string(to_string(c.mode))},
                {"seed", c.seed},
                {"output_scale", format_double(c.output_scale)}};
  j["loss"] = {{"epsilon", format_double(loss.epsilon)},
               {"c0", format_double(loss.c0)},
               {"lambda1", format_double(loss.lambda1)},
               {"lambda2", format_double(loss.lambda2)},
               {"fm_weight_mode", std::string(to_string(loss.fm_weight_mode))},
               {"unnormalized_osl", loss.unnormalized_osl}};
  j["params"] = params_to_json(model.params());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << j.dump(1) << '\n';
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormat) {
      throw ConfigError(path.string() + ": unsupported format_version");
    }
    const json& f = j.at("field");
    FieldConfig c;
    c.input_dim = f.at("input_dim").get<Index>();
    c.hidden_widths = f.at("hidden_widths").get<std::vector<Index>>();
    c.activation = parse_activation(f.at("activation").get<std::string>());
    c.mode = parse_field_mode(f.at("mode").get<std::string>());
    c.seed = f.at("seed").get<std::uint64_t>();
    c.output_scale = parse_double(f.at("output_scale").get<std::string>(), path, 0);
    LossConfig loss;
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      loss.epsilon = parse_double(l.at("epsilon").get<std::string>(), path, 0);
      loss.c0 = parse_double(l.at("c0").get<std::string>(), path, 0);
      loss.lambda1 = parse_double(l.at("lambda1").get<std::string>(), path, 0);
      loss.lambda2 = parse_double(l.at("lambda2").get<std::string>(), path, 0);
      loss.fm_weight_mode = parse_fm_weight(l.at("fm_weight_mode").get<std::string>());
      loss.unnormalized_osl = l.at("unnormalized_osl").get<bool>();
    }
    return Checkpoint{FieldModel(c, params_from_json(j.at("params"), path)), loss};
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace dmarch
