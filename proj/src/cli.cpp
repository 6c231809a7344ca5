#include "tsrep/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "tsrep/checkpoint.hpp"
#include "tsrep/selftest.hpp"

namespace tsrep {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw ConfigError("config key '" + key + "': " + msg);
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
    if (!known) fail(join(path, it.key()), "unknown key");
  }
}

template <class T>
T convert(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<T>();
  } else {
    if (!v.is_array()) fail(key, "expected an array");
    T out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(convert<typename T::value_type>(v[i], key + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (obj.contains(key)) out = convert<T>(obj.at(key), join(path, key));
}

template <class E>
void read_enum(const json& obj, const std::string& path, const char* key, E& out,
               std::initializer_list<std::pair<const char*, E>> names) {
  if (!obj.contains(key)) return;
  const std::string v = convert<std::string>(obj.at(key), join(path, key));
  for (const auto& [n, e] : names) {
    if (v == n) {
      out = e;
      return;
    }
  }
  std::string list;
  for (const auto& [n, e] : names) list += (list.empty() ? "" : ", ") + std::string(n);
  fail(join(path, key), "'" + v + "' is not one of " + list);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
  if (!out) throw UsageError("write to '" + path + "' failed");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void make_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw UsageError("empty entry in value list '" + text + "'");
    const std::string tok = item.substr(b, e - b + 1);
    double v = 0.0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size()) throw UsageError("'" + tok + "' is not a number");
    out.push_back(v);
  }
  return out;
}

const char* objective_name(TrainObjective o) {
  switch (o) {
    case TrainObjective::joint: return "joint";
    case TrainObjective::ssl_only: return "ssl_only";
    case TrainObjective::sl_only: return "sl_only";
  }
  return "?";
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "", {"version", "data", "split", "model", "train", "forecast", "output_dir"});
  if (!root.contains("version")) fail("version", "required");
  const int version = convert<int>(root.at("version"), "version");
  if (version != kConfigVersion) {
    fail("version", "unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kConfigVersion) + ")");
  }

  RunConfig cfg;
  if (!root.contains("data")) fail("data", "required");
  const json& data = root.at("data");
  only_keys(data, "data", {"path", "date_column", "synthetic"});
  if (data.contains("path") == data.contains("synthetic")) fail("data", "give exactly one of 'path' and 'synthetic'");
  if (data.contains("path")) cfg.data.path = resolve(base_dir, convert<std::string>(data.at("path"), "data.path"));
  read(data, "data", "date_column", cfg.data.date_column);
  if (data.contains("synthetic")) {
    const json& s = data.at("synthetic");
    only_keys(s, "data.synthetic",
              {"seed", "instances", "length", "channels", "periods", "amplitudes", "noise_std", "ar_coef"});
    SyntheticSource src;
    read(s, "data.synthetic", "seed", src.seed);
    read(s, "data.synthetic", "instances", src.instances);
    read(s, "data.synthetic", "length", src.length);
    read(s, "data.synthetic", "channels", src.channels);
    read(s, "data.synthetic", "periods", src.spec.periods);
    read(s, "data.synthetic", "amplitudes", src.spec.amplitudes);
    read(s, "data.synthetic", "noise_std", src.spec.noise_std);
    read(s, "data.synthetic", "ar_coef", src.spec.ar_coef);
    cfg.data.synthetic = src;
  }

  if (root.contains("split")) {
    const auto r = convert<std::vector<double>>(root.at("split"), "split");
    if (r.size() != 3) fail("split", "expected three ratios [train, val, test]");
    std::copy(r.begin(), r.end(), cfg.split_ratios.begin());
  }

  if (root.contains("model")) {
    const json& m = root.at("model");
    only_keys(m, "model", {"hidden", "repr", "width", "blocks", "kernel"});
    ModelDims& d = cfg.train.dims;
    read(m, "model", "hidden", d.hidden);
    read(m, "model", "repr", d.repr);
    read(m, "model", "width", d.width);
    read(m, "model", "blocks", d.blocks);
    read(m, "model", "kernel", d.kernel);
  }

  if (root.contains("train")) {
    const json& t = root.at("train");
    only_keys(t, "train",
              {"iterations", "batch_size", "learning_rate", "lambda", "momentum", "keep_prob", "temperature",
               "crop_window", "seed", "checkpoint_every", "same_branch_negatives", "soft_label_axis", "objective",
               "optimizer", "record_timing"});
    TrainConfig& c = cfg.train;
    read(t, "train", "iterations", c.iterations);
    read(t, "train", "batch_size", c.batch_size);
    read(t, "train", "learning_rate", c.learning_rate);
    read(t, "train", "lambda", c.lambda);
    read(t, "train", "momentum", c.momentum);
    read(t, "train", "keep_prob", c.keep_prob);
    read(t, "train", "temperature", c.temperature);
    read(t, "train", "crop_window", c.crop_window);
    read(t, "train", "seed", c.seed);
    read(t, "train", "checkpoint_every", c.checkpoint_every);
    read(t, "train", "same_branch_negatives", c.same_branch_negatives);
    read(t, "train", "record_timing", c.record_timing);
    read_enum(t, "train", "soft_label_axis", c.soft_label_axis,
              {{"time", SoftLabelAxis::time}, {"feature", SoftLabelAxis::feature}});
    read_enum(t, "train", "objective", c.objective,
              {{"joint", TrainObjective::joint},
               {"ssl_only", TrainObjective::ssl_only},
               {"sl_only", TrainObjective::sl_only}});
    read_enum(t, "train", "optimizer", c.optimizer, {{"sgd", OptimizerKind::sgd}, {"adam", OptimizerKind::adam}});
  }

  if (root.contains("forecast")) {
    const json& f = root.at("forecast");
    only_keys(f, "forecast", {"lookback", "horizons", "alpha_grid"});
    read(f, "forecast", "lookback", cfg.forecast.lookback);
    read(f, "forecast", "horizons", cfg.forecast.horizons);
    read(f, "forecast", "alpha_grid", cfg.forecast.alpha_grid);
  }

  read(root, "", "output_dir", cfg.output_dir);
  cfg.output_dir = resolve(base_dir, cfg.output_dir);
  validate_run_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_run_config(os.str(), fs::path(path).parent_path().string());
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.data.path.has_value() == cfg.data.synthetic.has_value()) {
    fail("data", "give exactly one of 'path' and 'synthetic'");
  }
  if (cfg.data.synthetic) {
    const SyntheticSource& s = *cfg.data.synthetic;
    if (s.instances < 1) fail("data.synthetic.instances", "must be >= 1");
    if (s.length < 1) fail("data.synthetic.length", "must be >= 1");
    if (s.channels < 1) fail("data.synthetic.channels", "must be >= 1");
    if (s.spec.periods.size() != s.spec.amplitudes.size()) {
      fail("data.synthetic.amplitudes", "needs one entry per period");
    }
    for (double p : s.spec.periods) {
      if (!(p > 0.0) || !std::isfinite(p)) fail("data.synthetic.periods", "must be positive");
    }
    if (!(s.spec.noise_std >= 0.0) || !std::isfinite(s.spec.noise_std)) {
      fail("data.synthetic.noise_std", "must be finite and >= 0");
    }
    if (!(std::abs(s.spec.ar_coef) < 1.0)) fail("data.synthetic.ar_coef", "must satisfy |phi| < 1");
  }
  for (double r : cfg.split_ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) fail("split", "ratios must all be positive");
  }
  if (std::abs(cfg.split_ratios[0] + cfg.split_ratios[1] + cfg.split_ratios[2] - 1.0) > 1e-9) {
    fail("split", "ratios must sum to 1");
  }

  TrainConfig t = cfg.train;
  if (t.checkpoint_path.empty()) t.checkpoint_path = "checkpoint.json";
  try {
    t.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid train or model setting: ") + e.what());
  }

  if (cfg.forecast.lookback < 1) fail("forecast.lookback", "must be >= 1");
  if (cfg.forecast.horizons.empty()) fail("forecast.horizons", "must not be empty");
  for (Index h : cfg.forecast.horizons) {
    if (h < 1) fail("forecast.horizons", "every horizon must be >= 1");
  }
  if (cfg.forecast.alpha_grid.empty()) fail("forecast.alpha_grid", "must not be empty");
  for (double a : cfg.forecast.alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) fail("forecast.alpha_grid", "values must be finite and >= 0");
  }
  if (cfg.output_dir.empty()) fail("output_dir", "must not be empty");
}

SeriesDataset prepare_dataset(RunConfig& cfg) {
  SeriesDataset ds;
  if (cfg.data.path) {
    ds = load_csv(*cfg.data.path, cfg.data.date_column);
  } else {
    const SyntheticSource& s = *cfg.data.synthetic;
    ds = synth_generate(s.seed, s.instances, s.length, s.channels, s.spec);
  }
  ds = normalize(split(std::move(ds), cfg.split_ratios));
  cfg.train.dims.input_channels = ds.channels();
  return ds;
}

void check_horizons(const SeriesDataset& ds, Index lookback, const std::vector<Index>& horizons) {
  for (Index h : horizons) {
    for (Split s : {Split::train, Split::val, Split::test}) {
      const auto [b, e] = ds.range(s);
      if (e - b < lookback + h) {
        throw SizingError("horizon " + std::to_string(h) + ": " + split_name(s) + " split has length " +
                          std::to_string(e - b) + "; look-back " + std::to_string(lookback) + " + horizon " +
                          std::to_string(h) + " needs at least " + std::to_string(lookback + h));
      }
    }
  }
}

PretrainArtifacts cmd_pretrain(RunConfig cfg) {
  validate_run_config(cfg);
  const SeriesDataset ds = prepare_dataset(cfg);
  PretrainArtifacts a;
  a.checkpoint = out_path(cfg, "checkpoint.json");
  a.trace = out_path(cfg, "trace.csv");
  cfg.train.checkpoint_path = a.checkpoint;
  cfg.train.validate_against(ds);
  make_output_dir(cfg);
  Trainer trainer(cfg.train, ds);
  a.result = trainer.run();
  write_trace_csv(a.result, a.trace);
  return a;
}

std::vector<MetricsReport> cmd_forecast(RunConfig cfg, const std::string& checkpoint) {
  validate_run_config(cfg);
  const SeriesDataset ds = prepare_dataset(cfg);
  const TeacherStudentState state = load_checkpoint(checkpoint);
  if (state.dims.input_channels != ds.channels()) {
    throw DimensionError("dataset has " + std::to_string(ds.channels()) + " channels, checkpoint expects " +
                         std::to_string(state.dims.input_channels));
  }
  check_horizons(ds, cfg.forecast.lookback, cfg.forecast.horizons);
  make_output_dir(cfg);

  std::vector<MetricsReport> reports;
  std::ostringstream summary;
  summary << "horizon,mse,mae,alpha,ks_statistic,ks_p,baseline_mse,baseline_mae,n_train,n_val,n_test\n";
  for (Index h : cfg.forecast.horizons) {
    MetricsReport r = run_forecast(state, ds, cfg.forecast.lookback, h, cfg.forecast.alpha_grid);
    write_text(out_path(cfg, "metrics_h" + std::to_string(h) + ".json"), metrics_json(r) + "\n");
    summary << r.horizon << ',' << num(r.mse) << ',' << num(r.mae) << ',' << num(r.alpha) << ','
            << num(r.ks_statistic) << ',' << num(r.ks_p) << ',' << num(r.baseline_mse) << ','
            << num(r.baseline_mae) << ',' << r.n_train << ',' << r.n_val << ',' << r.n_test << '\n';
    reports.push_back(std::move(r));
  }
  write_text(out_path(cfg, "summary.csv"), summary.str());
  return reports;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda") return SweepParam::lambda;
  if (name == "m" || name == "momentum") return SweepParam::momentum;
  throw UsageError("unknown sweep parameter '" + name + "'; choose lambda or m");
}

const char* sweep_param_name(SweepParam p) { return p == SweepParam::lambda ? "lambda" : "m"; }

std::vector<SweepRow> cmd_sweep(RunConfig cfg, SweepParam param, const std::vector<double>& values) {
  if (values.empty()) throw UsageError("sweep needs at least one value");
  const char* name = sweep_param_name(param);
  auto with = [&](double v) {
    RunConfig c = cfg;
    (param == SweepParam::lambda ? c.train.lambda : c.train.momentum) = v;
    return c;
  };
  for (double v : values) {
    try {
      validate_run_config(with(v));
    } catch (const ConfigError& e) {
      throw ParameterError(std::string("sweep value ") + name + "=" + num(v) + " is out of range: " + e.what());
    }
  }
  validate_run_config(cfg);
  const SeriesDataset ds = prepare_dataset(cfg);
  cfg.train.validate_against(ds);
  check_horizons(ds, cfg.forecast.lookback, cfg.forecast.horizons);
  make_output_dir(cfg);

  std::vector<SweepRow> rows;
  std::ostringstream csv;
  csv << "param,value,horizon,mse,mae\n";
  for (double v : values) {
    RunConfig c = with(v);
    c.train.dims.input_channels = ds.channels();
    const auto [state, trace] = pretrain(c.train, ds);
    for (Index h : c.forecast.horizons) {
      SweepRow row{v, run_forecast(state, ds, c.forecast.lookback, h, c.forecast.alpha_grid)};
      csv << name << ',' << num(v) << ',' << h << ',' << num(row.metrics.mse) << ',' << num(row.metrics.mae)
          << '\n';
      rows.push_back(std::move(row));
    }
  }
  write_text(out_path(cfg, std::string("sweep_") + name + ".csv"), csv.str());
  return rows;
}

std::string cmd_synth(RunConfig cfg) {
  validate_run_config(cfg);
  if (!cfg.data.synthetic) fail("data.synthetic", "required by the synth command");
  const SyntheticSource& s = *cfg.data.synthetic;
  if (s.instances != 1) fail("data.synthetic.instances", "the CSV format holds a single instance");
  const SeriesDataset ds = synth_generate(s.seed, s.instances, s.length, s.channels, s.spec);
  make_output_dir(cfg);
  const std::string path = out_path(cfg, "synthetic.csv");
  write_csv(ds, path, cfg.data.date_column);
  return path;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  auto cells = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path + ": missing header row");
  t.header = cells(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(cells(line));
    if (t.rows.back().size() != t.header.size()) {
      throw IngestionError(path + ": row " + std::to_string(t.rows.size()) + " has " +
                           std::to_string(t.rows.back().size()) + " cells, header has " +
                           std::to_string(t.header.size()));
    }
  }
  return t;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Contrastive time-series representation learning and forecasting"};
  app.require_subcommand(1);
  std::string config, checkpoint, out, param, fault;
  std::optional<std::uint64_t> seed;
  std::string values;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config, "Run config JSON");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Seed override");
  };
  CLI::App* pre = app.add_subcommand("pretrain", "Pretrain the encoder; writes checkpoint.json and trace.csv");
  common(pre, true);
  CLI::App* fc = app.add_subcommand("forecast", "Fit ridge heads per horizon; writes metrics JSON and summary.csv");
  common(fc, true);
  fc->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.json)");
  CLI::App* sw = app.add_subcommand("sweep", "Pretrain and forecast once per value of lambda or m");
  common(sw, true);
  sw->add_option("--param", param, "lambda or m")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  CLI::App* st = app.add_subcommand("selftest", "Gradient checks and numerical oracles");
  st->add_option("--seed", seed, "Seed for the random test points");
  st->add_option("--inject-fault", fault)->group("");
  CLI::App* sy = app.add_subcommand("synth", "Write the configured synthetic series as CSV");
  common(sy, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (st->parsed()) {
      SelftestOptions o;
      if (seed) o.seed = *seed;
      o.inject_fault = fault;
      const auto results = run_selftest(o);
      std::cout << format_results(results);
      const bool ok = std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
      return ok ? 0 : 1;
    }

    RunConfig cfg = load_run_config(config);
    if (!out.empty()) cfg.output_dir = fs::absolute(out).lexically_normal().string();
    if (seed) {
      if (sy->parsed() && cfg.data.synthetic) {
        cfg.data.synthetic->seed = *seed;
      } else {
        cfg.train.seed = *seed;
      }
    }

    if (pre->parsed()) {
      const PretrainArtifacts a = cmd_pretrain(cfg);
      const LossReport& last = a.result.losses.back();
      std::cout << "pretrained " << a.result.losses.size() << " iterations (" << objective_name(cfg.train.objective)
                << ", final joint " << num(last.joint) << ")\n"
                << "wrote " << a.checkpoint << "\nwrote " << a.trace << "\n";
    } else if (fc->parsed()) {
      if (checkpoint.empty()) checkpoint = out_path(cfg, "checkpoint.json");
      for (const MetricsReport& r : cmd_forecast(cfg, checkpoint)) {
        std::cout << "horizon " << r.horizon << ": mse " << num(r.mse) << " mae " << num(r.mae) << " (persistence "
                  << num(r.baseline_mse) << "), alpha " << num(r.alpha) << ", ks p " << num(r.ks_p) << "\n";
      }
      std::cout << "wrote " << out_path(cfg, "summary.csv") << "\n";
    } else if (sw->parsed()) {
      const SweepParam p = parse_sweep_param(param);
      const std::vector<double> list = parse_value_list(values);
      const auto rows = cmd_sweep(cfg, p, list);
      std::cout << list.size() << " runs, " << rows.size() << " rows\nwrote "
                << out_path(cfg, std::string("sweep_") + sweep_param_name(p) + ".csv") << "\n";
    } else if (sy->parsed()) {
      std::cout << "wrote " << cmd_synth(cfg) << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tsrep
