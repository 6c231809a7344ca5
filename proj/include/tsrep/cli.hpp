#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tsrep/data.hpp"
#include "tsrep/forecast.hpp"
#include "tsrep/trainer.hpp"

namespace tsrep {

inline constexpr int kConfigVersion = 1;

struct SyntheticSource {
  std::uint64_t seed = 0;
  Index instances = 1;
  Index length = 2000;
  Index channels = 1;
  SynthSpec spec;
};

/// Exactly one of `path` (an ETT-style CSV) and `synthetic` is set.
struct DataSource {
  std::optional<std::string> path;
  std::string date_column = "date";
  std::optional<SyntheticSource> synthetic;
};

struct ForecastSettings {
  Index lookback = 48;
  std::vector<Index> horizons{24};
  std::vector<double> alpha_grid = kDefaultAlphaGrid;
};

struct RunConfig {
  DataSource data;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  TrainConfig train;
  ForecastSettings forecast;
  std::string output_dir = "out";
};

/// Parses a config document. Relative paths are resolved against
/// `base_dir`. Unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the key.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

/// Range checks that need no data.
void validate_run_config(const RunConfig& cfg);

/// Loads or generates the series, then splits and normalises it. The
/// model's input width is taken from the data.
SeriesDataset prepare_dataset(RunConfig& cfg);

/// Throws SizingError naming the first horizon that leaves some split
/// without a single (look-back, horizon) pair.
void check_horizons(const SeriesDataset& ds, Index lookback, const std::vector<Index>& horizons);

struct PretrainArtifacts {
  std::string checkpoint;
  std::string trace;
  TrainTrace result;
};

/// Writes checkpoint.json and trace.csv under the output directory.
PretrainArtifacts cmd_pretrain(RunConfig cfg);

/// Writes metrics_h{P}.json per horizon and summary.csv.
std::vector<MetricsReport> cmd_forecast(RunConfig cfg, const std::string& checkpoint);

enum class SweepParam { lambda, momentum };

/// "lambda" or "m".
SweepParam parse_sweep_param(const std::string& name);
const char* sweep_param_name(SweepParam p);

struct SweepRow {
  double value = 0.0;
  MetricsReport metrics;
};

/// One fresh pretrain + forecast run per value, all with the configured
/// seed. Writes sweep_{param}.csv with columns param,value,horizon,mse,mae.
std::vector<SweepRow> cmd_sweep(RunConfig cfg, SweepParam param, const std::vector<double>& values);

/// Writes the configured synthetic series as synthetic.csv.
std::string cmd_synth(RunConfig cfg);

/// Header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv_table(const std::string& path);

/// Full command-line entry point. Returns 0 on success, 1 on any library
/// error or failed selftest, 2 on malformed arguments.
int cli_main(int argc, const char* const* argv);

}  // namespace tsrep
