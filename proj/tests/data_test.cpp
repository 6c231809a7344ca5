#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tsrep/data.hpp"

namespace tsrep {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("tsrep_data_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

TEST(LoadCsv, ToyFilePassesCellsThrough) {
  TempDir dir;
  write_text(dir.file("toy.csv"),
             "date,a,b,OT\n"
             "2016-07-01 00:00:00,1.5,2,-3\n"
             "2016-07-01 01:00:00,4,5.25,6\n"
             "2016-07-01 02:00:00,7,8,9e-3\n");
  SeriesDataset ds = load_csv(dir.file("toy.csv"));
  EXPECT_EQ(ds.values.shape(), (Shape{1, 3, 3}));
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b", "OT"}));
  EXPECT_EQ(ds.values, Tensor({1, 3, 3}, {1.5, 2, -3, 4, 5.25, 6, 7, 8, 9e-3}));
}

TEST(LoadCsv, EttShapedFile) {
  TempDir dir;
  SeriesDataset synth = synth_generate(1, 1, 17420, 7, {});
  write_csv(synth, dir.file("etth1.csv"));
  SeriesDataset ds = load_csv(dir.file("etth1.csv"));
  EXPECT_EQ(ds.values.shape(), (Shape{1, 17420, 7}));
  EXPECT_EQ(ds.values, synth.values);  // 17 significant digits round-trip exactly
  SeriesDataset again = load_csv(dir.file("etth1.csv"));
  EXPECT_EQ(again.values, ds.values);
}

TEST(LoadCsv, NanCellIsRejectedWithCoordinates) {
  TempDir dir;
  write_text(dir.file("nan.csv"), "date,a,b\n2020-01-01,1,2\n2020-01-02,nan,3\n");
  try {
    load_csv(dir.file("nan.csv"));
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos) << e.what();
  }
  write_text(dir.file("empty.csv"), "date,a\n2020-01-01,\n");
  EXPECT_THROW(load_csv(dir.file("empty.csv")), IngestionError);
}

TEST(LoadCsv, NonMonotoneDatesAreRejected) {
  TempDir dir;
  write_text(dir.file("order.csv"), "date,a\n2020-01-02,1\n2020-01-01,2\n");
  EXPECT_THROW(load_csv(dir.file("order.csv")), IngestionError);
  EXPECT_THROW(load_csv(dir.file("missing.csv")), IngestionError);
}

TEST(Split, Boundaries) {
  SeriesDataset ds = synth_generate(1, 1, 100, 1, {});
  auto s = split(ds);
  EXPECT_EQ(s.split->train_end, 60);
  EXPECT_EQ(s.split->val_end, 80);
  // floor(0.6 * 17420) = 10452, floor(0.8 * 17420) = 13936
  auto big = split(synth_generate(1, 1, 17420, 1, {}));
  EXPECT_EQ(big.split->train_end, 10452);
  EXPECT_EQ(big.split->val_end, 13936);
  EXPECT_THROW(split(ds, {1.0, 0.0, 0.0}), ParameterError);
  EXPECT_THROW(split(ds, {0.5, 0.2, 0.2}), ParameterError);
}

TEST(Normalize, TrainingSplitIsStandardised) {
  SynthSpec spec;
  spec.periods = {};
  spec.amplitudes = {};
  spec.noise_std = 0.3;
  SeriesDataset ds = synth_generate(5, 1, 500, 3, spec);
  for (Index t = 0; t < ds.length(); ++t) ds.values.at({0, t, 1}) += 40.0;  // constant plus noise
  SeriesDataset n = normalize(split(ds));
  auto [b, e] = n.range(Split::train);
  for (Index c = 0; c < 3; ++c) {
    double mean = 0.0, sq = 0.0;
    for (Index t = b; t < e; ++t) mean += n.values.at({0, t, c});
    mean /= static_cast<double>(e - b);
    for (Index t = b; t < e; ++t) sq += std::pow(n.values.at({0, t, c}) - mean, 2);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(e - b)), 1.0, 1e-9);
  }
  // Re-normalising is an identity up to re-estimation.
  SeriesDataset twice = normalize(n);
  for (Index c = 0; c < 3; ++c) {
    EXPECT_NEAR(twice.norm->mean[c], 0.0, 1e-9);
    EXPECT_NEAR(twice.norm->std[c], 1.0, 1e-9);
  }
  EXPECT_LT(max_abs_diff(twice.values, n.values), 1e-9);
  // Inverse transform round trip.
  Tensor back = denormalize(*n.norm, n.values);
  EXPECT_LT(max_abs_diff(back, ds.values), 1e-12);
}

TEST(Normalize, ConstantChannelIsNamed) {
  SeriesDataset ds = synth_generate(5, 1, 100, 2, {});
  for (Index t = 0; t < 100; ++t) ds.values.at({0, t, 1}) = 3.0;
  try {
    normalize(split(ds));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'x1'"), std::string::npos) << e.what();
  }
}

TEST(Normalize, StatisticsIgnoreValidationAndTest) {
  SeriesDataset ds = split(synth_generate(9, 1, 300, 2, {}));
  SeriesDataset perturbed = ds;
  for (Index t = ds.split->train_end; t < ds.length(); ++t) perturbed.values.at({0, t, 0}) *= 5.0;
  EXPECT_EQ(normalize(ds).norm->mean, normalize(perturbed).norm->mean);
  EXPECT_EQ(normalize(ds).norm->std, normalize(perturbed).norm->std);
}

TEST(ForecastSamples, CountsAndSizing) {
  SeriesDataset ds = synth_generate(1, 1, 50, 2, {});
  ds.split = SplitBounds{10, 30};
  auto s = make_forecast_samples(ds, 3, 2, Split::train);
  EXPECT_EQ(s.size(), 6u);
  EXPECT_THROW(make_forecast_samples(ds, 3, 11, Split::train), SizingError);

  SeriesDataset ett = split(synth_generate(1, 1, 17420, 1, {}));
  for (Index h : {24, 48, 168, 336, 720})
    for (Split sp : {Split::train, Split::val, Split::test})
      EXPECT_NO_THROW(make_forecast_samples(ett, 24, h, sp));
}

TEST(ForecastSamples, TileBackToTheSeriesWithinTheirSplit) {
  SeriesDataset ds = split(synth_generate(2, 1, 200, 3, {}));
  for (Split sp : {Split::train, Split::val, Split::test}) {
    auto [b, e] = ds.range(sp);
    for (const auto& s : make_forecast_samples(ds, 7, 4, sp)) {
      EXPECT_GE(s.time, b);
      EXPECT_LE(s.time + 11, e);
      for (Index t = 0; t < 7; ++t)
        for (Index c = 0; c < 3; ++c) EXPECT_EQ(s.window.at({t, c}), ds.values.at({0, s.time + t, c}));
      for (Index t = 0; t < 4; ++t)
        for (Index c = 0; c < 3; ++c) EXPECT_EQ(s.target.at({t, c}), ds.values.at({0, s.time + 7 + t, c}));
    }
  }
}

TEST(Synth, PeriodicWithoutNoise) {
  SynthSpec spec;
  spec.periods = {24};
  spec.amplitudes = {1.3};
  spec.noise_std = 0.0;
  SeriesDataset ds = synth_generate(3, 1, 500, 2, spec);
  for (Index c = 0; c < 2; ++c)
    for (Index t = 0; t + 24 < 500; ++t) EXPECT_NEAR(ds.values.at({0, t, c}), ds.values.at({0, t + 24, c}), 1e-12);
}

TEST(Synth, SeedDeterminism) {
  SynthSpec spec;
  auto a = synth_generate(42, 2, 300, 3, spec);
  auto b = synth_generate(42, 2, 300, 3, spec);
  auto c = synth_generate(43, 2, 300, 3, spec);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values.vec().sum(), c.values.vec().sum());
}

TEST(Synth, RejectsNonStationaryNoise) {
  SynthSpec spec;
  spec.ar_coef = 1.0;
  EXPECT_THROW(synth_generate(1, 1, 10, 1, spec), ParameterError);
  spec.ar_coef = 0.2;
  spec.noise_std = -1.0;
  EXPECT_THROW(synth_generate(1, 1, 10, 1, spec), ParameterError);
}

}  // namespace
}  // namespace tsrep
