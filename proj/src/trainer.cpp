#include "tsrep/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tsrep/ops.hpp"

namespace tsrep {

namespace {

Tensor draw_windows(const SeriesDataset& ds, Index batch, Index window, Rng& rng) {
  const auto [begin, end] = ds.range(Split::train);
  const Index C = ds.channels();
  std::uniform_int_distribution<Index> pick_instance(0, ds.instances() - 1);
  std::uniform_int_distribution<Index> pick_start(begin, end - window);
  Tensor out(Shape{batch, window, C});
  for (Index b = 0; b < batch; ++b) {
    const Index n = pick_instance(rng);
    const Index s = pick_start(rng);
    const double* src = ds.values.data() + (n * ds.length() + s) * C;
    std::copy(src, src + window * C, out.data() + b * window * C);
  }
  return out;
}

// Teacher and student overlap representations for one augmented batch.
struct OverlapPair {
  CropPair crop;
  Tensor teacher;  // [B, L, K]
  Tensor student_input;
};

OverlapPair teacher_overlap(const TeacherStudentState& state, const Tensor& windows, double keep, Rng& rng) {
  OverlapPair out;
  out.crop = sample_crop_pair(windows.dim(1), rng, 2);
  BranchInputs in = augment_for_branches(windows, out.crop, keep, rng);
  Tensor h = teacher_forward(state, in.teacher_raw, keep, rng);
  const Index off = out.crop.overlap_in_first();
  out.teacher = slice_time(h, off, off + out.crop.overlap_len());
  out.student_input = std::move(in.student_masked);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
  };
  need(iterations >= 1, "iterations must be at least 1");
  need(batch_size >= 1, "batch_size must be at least 1");
  need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive and finite");
  need(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  need(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  need(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must lie in (0, 1]");
  need(temperature > 0.0 && std::isfinite(temperature), "temperature must be positive and finite");
  need(crop_window >= 2, "crop_window must be at least 2");
  need(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  need(checkpoint_every == 0 || !checkpoint_path.empty(), "checkpoint_every needs a checkpoint path");
  dims.validate();
}

void TrainConfig::validate_against(const SeriesDataset& ds) const {
  validate();
  if (!ds.split) throw UsageError("dataset must be split before training");
  if (ds.channels() != dims.input_channels) {
    throw DimensionError("dataset has " + std::to_string(ds.channels()) + " channels but the model expects " +
                         std::to_string(dims.input_channels));
  }
  const auto [b, e] = ds.range(Split::train);
  if (e - b < crop_window) {
    throw SizingError("training split has " + std::to_string(e - b) + " steps, crop window needs " +
                      std::to_string(crop_window));
  }
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write trace to '" + path + "'");
  const bool timed = !trace.seconds.empty();
  out << "iteration,ssl,sl,joint" << (timed ? ",seconds" : "") << '\n';
  for (std::size_t i = 0; i < trace.losses.size(); ++i) {
    const LossReport& r = trace.losses[i];
    out << (i + 1) << ',' << fmt(r.ssl) << ',' << fmt(r.sl) << ',' << fmt(r.joint);
    if (timed) out << ',' << fmt(trace.seconds.at(i));
    out << '\n';
  }
  if (!out) throw UsageError("write to '" + path + "' failed");
}

Trainer::Trainer(TrainConfig cfg, const SeriesDataset& ds) : cfg_(std::move(cfg)), ds_(&ds), rng_(cfg_.seed) {
  cfg_.validate_against(ds);
  state_ = init_params(cfg_.seed, cfg_.dims, cfg_.momentum, cfg_.lambda);
  if (cfg_.optimizer == OptimizerKind::adam) adam_ = std::make_unique<Adam>(cfg_.learning_rate);
  // Separate stream from the initialiser's.
  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32), 0x7a11u};
  rng_.seed(seq);
}

Trainer Trainer::resume(TrainConfig cfg, const SeriesDataset& ds, const std::string& checkpoint) {
  Trainer t(std::move(cfg), ds);
  std::optional<ResumeState> rs;
  TeacherStudentState loaded = load_checkpoint(checkpoint, &rs);
  if (!rs) throw CheckpointError("checkpoint '" + checkpoint + "' has no resume state");
  if (!(loaded.dims == t.cfg_.dims)) throw ConfigError("checkpoint dims differ from the configured model");
  if (loaded.momentum != t.cfg_.momentum || loaded.lambda != t.cfg_.lambda) {
    throw ConfigError("checkpoint momentum/lambda differ from the configuration");
  }
  std::istringstream is(rs->rng);
  is >> t.rng_;
  if (!is) throw CheckpointError("checkpoint field 'resume.rng': unreadable generator state");
  if (t.adam_) {
    t.adam_->restore(rs->adam_steps, std::move(rs->adam_first), std::move(rs->adam_second));
  }
  t.state_ = std::move(loaded);
  return t;
}

Tensor Trainer::sample_windows() { return draw_windows(*ds_, cfg_.batch_size, cfg_.crop_window, rng_); }

StepRecord Trainer::step() {
  const long it = state_.iteration + 1;
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  LossReport& r = rec.report;
  try {
    Tensor windows = sample_windows();
    OverlapPair ov = teacher_overlap(state_, windows, cfg_.keep_prob, rng_);
    rec.crop = ov.crop;
    const Index L = ov.crop.overlap_len();
    update_center(state_, ov.teacher);
    Tensor centered = apply_center(state_, ov.teacher);

    Tape tape;
    Var hs = slice(student_forward(tape, state_, ov.student_input), 1, 0, L);
    Var ht = tape.constant(ov.teacher);
    Var htc = tape.constant(std::move(centered));
    const LossOptions lo{cfg_.temperature, cfg_.same_branch_negatives, cfg_.soft_label_axis};
    Tape off(false);
    auto detached = [&](const Var& v) { return off.constant(v.value()); };

    Var loss;
    switch (cfg_.objective) {
      case TrainObjective::joint: {
        Var ssl = ssl_loss(ht, hs, lo);
        Var sl = sl_loss(htc, hs, lo.soft_label_axis);
        loss = joint_loss(ssl, sl, state_.lambda);
        r.ssl = ssl.value().item();
        r.sl = sl.value().item();
        r.lambda = state_.lambda;
        break;
      }
      case TrainObjective::ssl_only:
        loss = ssl_loss(ht, hs, lo);
        r.ssl = loss.value().item();
        r.sl = sl_loss(detached(htc), detached(hs), lo.soft_label_axis).value().item();
        r.lambda = 0.0;
        break;
      case TrainObjective::sl_only:
        loss = sl_loss(htc, hs, lo.soft_label_axis);
        r.sl = loss.value().item();
        r.ssl = ssl_loss(detached(ht), detached(hs), lo).value().item();
        r.lambda = 1.0;
        break;
    }
    r.joint = loss.value().item();
    std::tie(r.positives, r.negatives) =
        contrastive_pair_counts(cfg_.batch_size, L, cfg_.same_branch_negatives);
    if (!std::isfinite(r.joint) || !std::isfinite(r.ssl) || !std::isfinite(r.sl)) {
      throw NumericError("non-finite loss");
    }

    rec.gradients = backward(tape, loss, state_.student);
    if (adam_) {
      adam_->step(state_.student, rec.gradients);
    } else {
      sgd_step(state_.student, rec.gradients, cfg_.learning_rate);
    }
    ema_update(state_);
  } catch (const NumericError& e) {
    throw NumericError("training diverged at iteration " + std::to_string(it) + " (ssl=" + fmt(r.ssl) +
                       ", sl=" + fmt(r.sl) + ", joint=" + fmt(r.joint) + "): " + e.what());
  }
  state_.iteration = it;
  trace_.losses.push_back(r);
  if (cfg_.record_timing) {
    trace_.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  if (cfg_.checkpoint_every > 0 && it % cfg_.checkpoint_every == 0) save(cfg_.checkpoint_path);
  return rec;
}

TrainTrace Trainer::run() {
  while (state_.iteration < cfg_.iterations) step();
  if (!cfg_.checkpoint_path.empty()) save(cfg_.checkpoint_path);
  return trace_;
}

void Trainer::save(const std::string& path) {
  ResumeState rs;
  std::ostringstream os;
  os << rng_;
  rs.rng = os.str();
  if (adam_) {
    rs.adam_steps = adam_->steps();
    rs.adam_first = adam_->first_moment();
    rs.adam_second = adam_->second_moment();
  }
  save_checkpoint(state_, path, rs);
  trace_.checkpoint_path = path;
}

std::pair<TeacherStudentState, TrainTrace> pretrain(const TrainConfig& cfg, const SeriesDataset& ds) {
  Trainer t(cfg, ds);
  TrainTrace trace = t.run();
  return {t.state(), std::move(trace)};
}

CosineDiagnostic cross_branch_cosine(const TeacherStudentState& state, const TrainConfig& cfg,
                                     const SeriesDataset& ds, int batches, std::uint64_t seed) {
  cfg.validate_against(ds);
  if (batches < 1) throw ParameterError("need at least one batch");
  Rng rng(seed);
  double matched = 0.0, mismatched = 0.0;
  long n_matched = 0, n_mismatched = 0;
  for (int rep = 0; rep < batches; ++rep) {
    Tensor windows = draw_windows(ds, cfg.batch_size, cfg.crop_window, rng);
    OverlapPair ov = teacher_overlap(state, windows, cfg.keep_prob, rng);
    const Index L = ov.crop.overlap_len();
    Tape off(false);
    Tensor hs = slice_time(student_forward(off, state, ov.student_input).value(), 0, L);
    const Index B = hs.dim(0), K = hs.dim(2);
    for (Index i = 0; i < B; ++i) {
      auto T = ov.teacher.matrix(B * L, K).middleRows(i * L, L).rowwise().normalized();
      auto S = hs.matrix(B * L, K).middleRows(i * L, L).rowwise().normalized();
      Eigen::MatrixXd cos = T * S.transpose();
      matched += cos.diagonal().sum();
      mismatched += cos.sum() - cos.diagonal().sum();
      n_matched += L;
      n_mismatched += L * (L - 1);
    }
  }
  return {matched / static_cast<double>(n_matched), mismatched / static_cast<double>(n_mismatched)};
}

}  // namespace tsrep
