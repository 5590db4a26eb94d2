#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmarch/data.hpp"

namespace dmarch::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Read access to one JSON object that remembers which keys were consumed.
// Errors carry the dotted path of the offending key.
class Reader {
 public:
  Reader(const json& j, std::string path);

  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const;
  bool has(const std::string& key) const;

  double number(const std::string& key, double def);
  Index integer(const std::string& key, Index def);
  std::uint64_t seed(const std::string& key, std::uint64_t def);
  bool boolean(const std::string& key, bool def);
  std::string string(const std::string& key, const std::string& def);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& def);
  std::vector<Index> integers(const std::string& key, const std::vector<Index>& def);
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def);
  // Points given as a list of equal-length coordinate lists.
  std::optional<Mat> points(const std::string& key);

  // Nested object; an absent key yields an empty object.
  Reader object(const std::string& key);

  // Parses a string through `parse`, re-labelling its error with the key path.
  template <class F>
  auto choice(const std::string& key, const std::string& def, F parse) {
    const std::string s = string(key, def);
    try {
      return parse(s);
    } catch (const Error& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  // Throws ConfigError naming the first key that was never read.
  void finish() const;

 private:
  const json* find(const std::string& key);

  json j_;
  std::string path_;
  std::set<std::string> used_;
};

[[noreturn]] void fail(const std::string& path, const std::string& what);

// A point cloud described in a config: a named generator or a CSV file.
struct DataSpec {
  std::string kind = "two_moons";  // two_moons, eight_gaussians, gmm, gaussian, hubness, csv
  Index n = 4096;
  double noise = 0.05;
  double radius = 2.0;
  double std = 0.2;
  std::string gmm = "gmm8d_target";  // gmm8d_source or gmm8d_target
  Index dim = 2;
  double spread = 0.5;
  std::uint64_t seed = 1;
  std::string path;

  PointCloud load(const std::filesystem::path& base) const;
  json to_json() const;
};

DataSpec read_data_spec(Reader r, const DataSpec& def);

// A source law for x0.
struct SourceSpec {
  std::string kind = "standard_normal";  // standard_normal, eight_gaussians, gmm8d_source, gmm8d_target
  double radius = 2.0;
  double std = 0.2;
  Index dim = 2;

  GmmSpec build() const;
  json to_json() const;
};

SourceSpec read_source_spec(Reader r, const SourceSpec& def);

// Settings shared by every subcommand.
struct Common {
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic_svg = false;
  std::filesystem::path config_dir = ".";
};

std::uint64_t fnv1a(const std::string& bytes);

// Writes the effective config as config.json and a manifest.json with the
// config hash, seed and versions. Both are deterministic.
void write_manifest(const Common& common, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs);

std::string version_string();

}  // namespace dmarch::cli
