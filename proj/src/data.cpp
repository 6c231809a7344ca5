#include "tsrep/data.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace tsrep {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  const auto e = s.find_last_not_of(" \t\r\"");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Ordering key for a timestamp cell: seconds since epoch for calendar
// formats, or the value itself for numeric stamps.
std::optional<double> timestamp_key(const std::string& s) {
  static const char* formats[] = {"%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M",
                                  "%Y/%m/%d %H:%M:%S", "%Y/%m/%d %H:%M", "%Y-%m-%d", "%Y/%m/%d"};
  for (const char* fmt : formats) {
    std::tm tm{};
    std::istringstream is(s);
    is >> std::get_time(&tm, fmt);
    if (!is.fail() && is.peek() == std::char_traits<char>::eof()) {
      return static_cast<double>(timegm(&tm));
    }
  }
  return parse_number(s);
}

std::string hourly_stamp(Index t) {
  std::tm tm{};
  tm.tm_year = 2016 - 1900;
  tm.tm_mon = 6;
  tm.tm_mday = 1;
  std::time_t base = timegm(&tm) + static_cast<std::time_t>(t) * 3600;
  std::tm out{};
  gmtime_r(&base, &out);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &out);
  return buf;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::pair<Index, Index> SeriesDataset::range(Split s) const {
  if (!split) throw UsageError("dataset has no split boundaries");
  switch (s) {
    case Split::train: return {0, split->train_end};
    case Split::val: return {split->train_end, split->val_end};
    case Split::test: return {split->val_end, length()};
  }
  throw UsageError("unknown split");
}

SeriesDataset load_csv(const std::string& path, const std::string& date_column) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path + ": missing header row");
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);

  Index date_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == date_column) date_col = static_cast<Index>(i);
  }
  if (date_col < 0) throw IngestionError(path + ": no column named '" + date_column + "'");

  SeriesDataset ds;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (static_cast<Index>(i) != date_col) ds.feature_names.push_back(header[i]);
  }
  if (ds.feature_names.empty()) throw IngestionError(path + ": no feature columns");
  const Index channels = static_cast<Index>(ds.feature_names.size());

  std::vector<double> cells;
  std::optional<double> prev_key;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw IngestionError(path + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                           " cells, header has " + std::to_string(header.size()));
    }
    const std::string stamp = trim(fields[date_col]);
    const auto key = timestamp_key(stamp);
    if (!key) {
      throw IngestionError(path + ": row " + std::to_string(row) + ", column '" + date_column +
                           "': unparsable timestamp '" + stamp + "'");
    }
    if (prev_key && !(*key > *prev_key)) {
      throw IngestionError(path + ": row " + std::to_string(row) + ": timestamps are not strictly increasing");
    }
    prev_key = key;
    ds.timestamps.push_back(stamp);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<Index>(i) == date_col) continue;
      const auto v = parse_number(trim(fields[i]));
      if (!v || !std::isfinite(*v)) {
        throw IngestionError(path + ": row " + std::to_string(row) + ", column '" + header[i] +
                             "': missing or non-numeric value '" + trim(fields[i]) + "'");
      }
      cells.push_back(*v);
    }
  }
  if (row == 0) throw IngestionError(path + ": no data rows");
  ds.values = Tensor(Shape{1, row, channels}, std::move(cells));
  return ds;
}

void write_csv(const SeriesDataset& ds, const std::string& path, const std::string& date_column) {
  if (ds.instances() != 1) throw UsageError("write_csv supports single-instance datasets only");
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  out << date_column;
  for (const auto& name : ds.feature_names) out << ',' << name;
  out << '\n';
  out << std::setprecision(17);
  for (Index t = 0; t < ds.length(); ++t) {
    out << (t < static_cast<Index>(ds.timestamps.size()) ? ds.timestamps[t] : hourly_stamp(t));
    for (Index c = 0; c < ds.channels(); ++c) out << ',' << ds.values.at({0, t, c});
    out << '\n';
  }
}

SeriesDataset split(SeriesDataset ds, std::array<double, 3> ratios) {
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("split ratios must all be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ParameterError("split ratios must sum to 1");
  }
  const double total = static_cast<double>(ds.length());
  SplitBounds b;
  b.train_end = static_cast<Index>(std::floor(ratios[0] * total));
  b.val_end = static_cast<Index>(std::floor((ratios[0] + ratios[1]) * total));
  if (!(0 < b.train_end && b.train_end < b.val_end && b.val_end < ds.length())) {
    throw SizingError("series of length " + std::to_string(ds.length()) + " is too short to split");
  }
  ds.split = b;
  ds.norm.reset();
  return ds;
}

SeriesDataset normalize(SeriesDataset ds) {
  auto [begin, end] = ds.range(Split::train);
  const Index n = ds.instances(), len = ds.length(), channels = ds.channels();
  NormStats stats;
  const double count = static_cast<double>(n * (end - begin));
  for (Index c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index t = begin; t < end; ++t) mean += ds.values.at({i, t, c});
    mean /= count;
    double var = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index t = begin; t < end; ++t) {
        const double d = ds.values.at({i, t, c}) - mean;
        var += d * d;
      }
    const double sd = std::sqrt(var / count);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      const std::string name = c < static_cast<Index>(ds.feature_names.size()) ? ds.feature_names[c]
                                                                                : std::to_string(c);
      throw NumericError("channel '" + name + "' has zero variance on the training split");
    }
    stats.mean.push_back(mean);
    stats.std.push_back(sd);
  }
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < len; ++t)
      for (Index c = 0; c < channels; ++c) {
        double& v = ds.values.at({i, t, c});
        v = (v - stats.mean[c]) / stats.std[c];
      }
  ds.norm = std::move(stats);
  return ds;
}

Tensor denormalize(const NormStats& stats, const Tensor& x) {
  const Index channels = x.dim(-1);
  if (static_cast<Index>(stats.mean.size()) != channels) {
    throw DimensionError("denormalize: " + std::to_string(stats.mean.size()) + " channel statistics for " +
                         shape_str(x.shape()));
  }
  Tensor out = x;
  for (Index k = 0; k < out.size(); ++k) {
    const Index c = k % channels;
    out[k] = out[k] * stats.std[c] + stats.mean[c];
  }
  return out;
}

std::vector<ForecastSample> make_forecast_samples(const SeriesDataset& ds, Index lookback, Index horizon,
                                                  Split which) {
  if (lookback < 1 || horizon < 1) throw ParameterError("look-back and horizon must be >= 1");
  auto [begin, end] = ds.range(which);
  const Index len = end - begin;
  if (len < lookback + horizon) {
    throw SizingError(std::string(split_name(which)) + " split has length " + std::to_string(len) +
                      "; look-back " + std::to_string(lookback) + " + horizon " + std::to_string(horizon) +
                      " needs at least " + std::to_string(lookback + horizon));
  }
  const Index channels = ds.channels();
  std::vector<ForecastSample> out;
  out.reserve(static_cast<std::size_t>(ds.instances() * (len - lookback - horizon + 1)));
  for (Index i = 0; i < ds.instances(); ++i) {
    for (Index t = begin; t + lookback + horizon <= end; ++t) {
      ForecastSample s;
      s.instance = i;
      s.time = t;
      s.window = Tensor(Shape{lookback, channels});
      s.target = Tensor(Shape{horizon, channels});
      const double* src = ds.values.data() + (i * ds.length() + t) * channels;
      std::copy_n(src, lookback * channels, s.window.data());
      std::copy_n(src + lookback * channels, horizon * channels, s.target.data());
      out.push_back(std::move(s));
    }
  }
  return out;
}

SeriesDataset synth_generate(std::uint64_t seed, Index instances, Index length, Index channels,
                             const SynthSpec& spec) {
  if (instances < 1 || length < 1 || channels < 1) throw ParameterError("synthetic extents must be >= 1");
  if (spec.periods.size() != spec.amplitudes.size()) {
    throw ParameterError("synthetic spec needs one amplitude per period");
  }
  for (double p : spec.periods) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ParameterError("sinusoid periods must be positive");
  }
  for (double a : spec.amplitudes) {
    if (!std::isfinite(a)) throw ParameterError("amplitudes must be finite");
  }
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
    throw ParameterError("noise std must be finite and >= 0");
  }
  if (!(std::abs(spec.ar_coef) < 1.0)) throw ParameterError("AR coefficient must satisfy |phi| < 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SeriesDataset ds;
  ds.values = Tensor(Shape{instances, length, channels});
  for (Index c = 0; c < channels; ++c) ds.feature_names.push_back("x" + std::to_string(c));
  for (Index t = 0; t < length; ++t) ds.timestamps.push_back(hourly_stamp(t));

  const double stationary_sd = spec.noise_std / std::sqrt(1.0 - spec.ar_coef * spec.ar_coef);
  for (Index i = 0; i < instances; ++i) {
    for (Index c = 0; c < channels; ++c) {
      double noise = stationary_sd * normal(rng);
      for (Index t = 0; t < length; ++t) {
        if (t > 0) noise = spec.ar_coef * noise + spec.noise_std * normal(rng);
        double v = spec.noise_std > 0.0 ? noise : 0.0;
        for (std::size_t k = 0; k < spec.periods.size(); ++k) {
          const double phase = 0.7 * static_cast<double>(c) * static_cast<double>(k + 1);
          v += spec.amplitudes[k] *
               std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.periods[k] + phase);
        }
        ds.values.at({i, t, c}) = v;
      }
    }
  }
  return ds;
}

}  // namespace tsrep
