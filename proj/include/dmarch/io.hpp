#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dmarch/field.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/samplers.hpp"
#include "dmarch/trainer.hpp"

namespace dmarch {

inline constexpr int kCheckpointFormat = 1;

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Minimal CSV writer: rows are written as given, fields joined by commas.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void header(const std::vector<std::string>& names);
  CsvWriter& field(const std::string& s);
  CsvWriter& field(double v);
  CsvWriter& field(Index v);
  void end_row();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  bool first_ = true;
};

void write_cloud_csv(const std::filesystem::path& path, const Mat& points);
Mat read_cloud_csv(const std::filesystem::path& path);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows);
void write_oracle_csv(const std::filesystem::path& path, const Mat& xs, const std::vector<MinimizerReport>& reports);
void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report);
void write_coverage_csv(const std::filesystem::path& path, const CoverageCurve& curve);
void write_mape_csv(const std::filesystem::path& path, const MapeReport& report);

// Checkpoint: JSON with format_version, field config, loss config and the
// flat parameter vector. Doubles round-trip exactly.
struct Checkpoint {
  FieldModel model;
  LossConfig loss;
};

void save_checkpoint(const std::filesystem::path& path, const FieldModel& model, const LossConfig& loss = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmarch
