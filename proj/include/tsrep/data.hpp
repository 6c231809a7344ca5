#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsrep/tensor.hpp"

namespace tsrep {

enum class Split { train, val, test };

const char* split_name(Split s);

/// Contiguous temporal boundaries: train [0, train_end), val
/// [train_end, val_end), test [val_end, T_total).
struct SplitBounds {
  Index train_end = 0;
  Index val_end = 0;
};

/// Per-channel z-score statistics estimated on the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

struct SeriesDataset {
  Tensor values;  // [N, T_total, C]
  std::vector<std::string> feature_names;
  std::vector<std::string> timestamps;  // one per time step; may be empty
  std::optional<SplitBounds> split;
  std::optional<NormStats> norm;

  Index instances() const { return values.dim(0); }
  Index length() const { return values.dim(1); }
  Index channels() const { return values.dim(2); }

  /// Half-open time range of a split. Requires `split` to be set.
  std::pair<Index, Index> range(Split s) const;
};

/// Reads a header-first CSV whose `date_column` holds strictly increasing
/// timestamps and whose other columns are numeric features. Produces N = 1.
SeriesDataset load_csv(const std::string& path, const std::string& date_column = "date");

/// Writes a single-instance dataset in the format load_csv reads.
void write_csv(const SeriesDataset& ds, const std::string& path, const std::string& date_column = "date");

/// Boundaries at floor(r0 * T) and floor((r0 + r1) * T).
SeriesDataset split(SeriesDataset ds, std::array<double, 3> ratios = {0.6, 0.2, 0.2});

/// Z-scores every split with training-split statistics.
SeriesDataset normalize(SeriesDataset ds);

/// Undo normalize on a tensor whose trailing axis is the channel axis.
Tensor denormalize(const NormStats& stats, const Tensor& x);

struct ForecastSample {
  Tensor window;  // [T, C]
  Tensor target;  // [P, C]
  Index instance = 0;
  Index time = 0;  // index of window[0] in the full series
};

/// Stride-1 (look-back, horizon) pairs lying entirely inside one split.
std::vector<ForecastSample> make_forecast_samples(const SeriesDataset& ds, Index lookback, Index horizon,
                                                  Split which);

struct SynthSpec {
  std::vector<double> periods{24.0, 50.0};
  std::vector<double> amplitudes{1.0, 0.5};
  double noise_std = 0.1;
  double ar_coef = 0.5;
};

/// Sum of sinusoids plus AR(1) noise per channel. Channel c uses phase
/// offset 0.7 * c * (k + 1) on sinusoid k. Deterministic in `seed`.
SeriesDataset synth_generate(std::uint64_t seed, Index instances, Index length, Index channels,
                             const SynthSpec& spec);

}  // namespace tsrep
