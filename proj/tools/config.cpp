#include "config.hpp"

#include <fstream>

#include <Eigen/Core>

#include "dmarch/io.hpp"

#ifndef DMARCH_VERSION
#define DMARCH_VERSION "0.0.0"
#endif

namespace dmarch::cli {

namespace fs = std::filesystem;

void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

Reader::Reader(const json& j, std::string path) : j_(j.is_null() ? json::object() : j), path_(std::move(path)) {
  if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
}

std::string Reader::key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Reader::has(const std::string& key) const { return j_.contains(key); }

const json* Reader::find(const std::string& key) {
  used_.insert(key);
  auto it = j_.find(key);
  if (it == j_.end() || it->is_null()) return nullptr;
  return &*it;
}

double Reader::number(const std::string& key, double def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_number()) fail(key_path(key), "expected a number");
  return v->get<double>();
}

Index Reader::integer(const std::string& key, Index def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_number_integer()) fail(key_path(key), "expected an integer");
  return v->get<Index>();
}

std::uint64_t Reader::seed(const std::string& key, std::uint64_t def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
    fail(key_path(key), "expected a non-negative integer");
  }
  return v->get<std::uint64_t>();
}

bool Reader::boolean(const std::string& key, bool def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_boolean()) fail(key_path(key), "expected true or false");
  return v->get<bool>();
}

std::string Reader::string(const std::string& key, const std::string& def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_string()) fail(key_path(key), "expected a string");
  return v->get<std::string>();
}

std::vector<double> Reader::numbers(const std::string& key, const std::vector<double>& def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_array()) fail(key_path(key), "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) fail(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

std::vector<Index> Reader::integers(const std::string& key, const std::vector<Index>& def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_array()) fail(key_path(key), "expected a list of integers");
  std::vector<Index> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number_integer()) fail(key_path(key) + "[" + std::to_string(i) + "]", "expected an integer");
    out.push_back((*v)[i].get<Index>());
  }
  return out;
}

std::vector<std::string> Reader::strings(const std::string& key, const std::vector<std::string>& def) {
  const json* v = find(key);
  if (!v) return def;
  if (!v->is_array()) fail(key_path(key), "expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_string()) fail(key_path(key) + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back((*v)[i].get<std::string>());
  }
  return out;
}

std::optional<Mat> Reader::points(const std::string& key) {
  const json* v = find(key);
  if (!v) return std::nullopt;
  if (!v->is_array() || v->empty()) fail(key_path(key), "expected a non-empty list of points");
  const std::size_t d = (*v)[0].is_array() ? (*v)[0].size() : 0;
  if (d == 0) fail(key_path(key) + "[0]", "expected a non-empty list of coordinates");
  Mat m(static_cast<Index>(d), static_cast<Index>(v->size()));
  for (std::size_t j = 0; j < v->size(); ++j) {
    const json& p = (*v)[j];
    const std::string pj = key_path(key) + "[" + std::to_string(j) + "]";
    if (!p.is_array() || p.size() != d) fail(pj, "expected " + std::to_string(d) + " coordinates");
    for (std::size_t i = 0; i < d; ++i) {
      if (!p[i].is_number()) fail(pj + "[" + std::to_string(i) + "]", "expected a number");
      m(static_cast<Index>(i), static_cast<Index>(j)) = p[i].get<double>();
    }
  }
  return m;
}

Reader Reader::object(const std::string& key) {
  const json* v = find(key);
  if (!v) return Reader(json::object(), key_path(key));
  if (!v->is_object()) fail(key_path(key), "expected an object");
  return Reader(*v, key_path(key));
}

void Reader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (!used_.count(it.key())) fail(key_path(it.key()), "unknown key");
  }
}

PointCloud DataSpec::load(const fs::path& base) const {
  if (kind == "two_moons") return two_moons(n, noise, seed);
  if (kind == "eight_gaussians") return eight_gaussians(n, radius, std, seed);
  if (kind == "gmm") {
    const GmmSpec spec = gmm == "gmm8d_source" ? gmm8d_source() : gmm8d_target();
    return gmm_sample(spec, n, seed);
  }
  if (kind == "gaussian") return gaussian_noise(dim, n, seed);
  if (kind == "hubness") return hubness_dataset(dim, n, spread, seed);
  if (kind == "csv") {
    const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : base / path;
    PointCloud c;
    c.points = read_cloud_csv(p);
    c.validate();
    return c;
  }
  throw ConfigError("unknown dataset kind '" + kind + "'");
}

json DataSpec::to_json() const {
  if (kind == "csv") return {{"kind", kind}, {"path", path}};
  json j{{"kind", kind}, {"n", n}, {"seed", seed}};
  if (kind == "two_moons") j["noise"] = noise;
  if (kind == "eight_gaussians") {
    j["radius"] = radius;
    j["std"] = std;
  }
  if (kind == "gmm") j["gmm"] = gmm;
  if (kind == "gaussian" || kind == "hubness") j["dim"] = dim;
  if (kind == "hubness") j["spread"] = spread;
  return j;
}

DataSpec read_data_spec(Reader r, const DataSpec& def) {
  DataSpec s = def;
  s.kind = r.string("kind", def.kind);
  static const std::set<std::string> kinds{"two_moons", "eight_gaussians", "gmm", "gaussian", "hubness", "csv"};
  if (!kinds.count(s.kind)) fail(r.key_path("kind"), "unknown dataset kind '" + s.kind + "'");
  s.n = r.integer("n", def.n);
  if (s.n < 1) fail(r.key_path("n"), "must be >= 1");
  s.noise = r.number("noise", def.noise);
  if (s.noise < 0.0) fail(r.key_path("noise"), "must be >= 0");
  s.radius = r.number("radius", def.radius);
  s.std = r.number("std", def.std);
  if (!(s.std > 0.0)) fail(r.key_path("std"), "must be > 0");
  s.gmm = r.string("gmm", def.gmm);
  if (s.gmm != "gmm8d_source" && s.gmm != "gmm8d_target") fail(r.key_path("gmm"), "expected gmm8d_source or gmm8d_target");
  s.dim = r.integer("dim", def.dim);
  if (s.dim < 1) fail(r.key_path("dim"), "must be >= 1");
  s.spread = r.number("spread", def.spread);
  if (s.spread < 0.0) fail(r.key_path("spread"), "must be >= 0");
  s.seed = r.seed("seed", def.seed);
  s.path = r.string("path", def.path);
  if (s.kind == "csv" && s.path.empty()) fail(r.key_path("path"), "required for kind csv");
  r.finish();
  return s;
}

GmmSpec SourceSpec::build() const {
  if (kind == "standard_normal") return standard_normal(dim);
  if (kind == "eight_gaussians") return eight_gaussians_spec(radius, std);
  if (kind == "gmm8d_source") return gmm8d_source();
  if (kind == "gmm8d_target") return gmm8d_target();
  throw ConfigError("unknown source kind '" + kind + "'");
}

json SourceSpec::to_json() const {
  json j{{"kind", kind}};
  if (kind == "standard_normal") j["dim"] = dim;
  if (kind == "eight_gaussians") {
    j["radius"] = radius;
    j["std"] = std;
  }
  return j;
}

SourceSpec read_source_spec(Reader r, const SourceSpec& def) {
  SourceSpec s = def;
  s.kind = r.string("kind", def.kind);
  static const std::set<std::string> kinds{"standard_normal", "eight_gaussians", "gmm8d_source", "gmm8d_target"};
  if (!kinds.count(s.kind)) fail(r.key_path("kind"), "unknown source kind '" + s.kind + "'");
  s.radius = r.number("radius", def.radius);
  s.std = r.number("std", def.std);
  if (!(s.std > 0.0)) fail(r.key_path("std"), "must be > 0");
  s.dim = r.integer("dim", def.dim);
  if (s.dim < 1) fail(r.key_path("dim"), "must be >= 1");
  r.finish();
  return s;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string version_string() { return DMARCH_VERSION; }

void write_manifest(const Common& common, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
  const std::string text = config.dump(2);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  {
    std::ofstream out(common.out / "config.json", std::ios::binary);
    out << text << '\n';
    if (!out) throw Error("cannot write " + (common.out / "config.json").string());
  }
  json m;
  m["command"] = command;
  m["config_file"] = "config.json";
  m["config_hash"] = std::string("fnv1a64:") + hash;
  m["seed"] = common.seed;
  m["rerun"] = "dmarch " + command + " --config config.json --out <dir>";
  m["versions"] = {{"dmarch", DMARCH_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__},
                   {"schema_version", kSchemaVersion},
                   {"checkpoint_format", kCheckpointFormat}};
  m["outputs"] = outputs;
  std::ofstream out(common.out / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (common.out / "manifest.json").string());
}

}  // namespace dmarch::cli
