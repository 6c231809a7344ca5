#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsrep/augment.hpp"
#include "tsrep/checkpoint.hpp"
#include "tsrep/data.hpp"
#include "tsrep/loss.hpp"
#include "tsrep/model.hpp"
#include "tsrep/optim.hpp"

namespace tsrep {

/// Which loss drives the student update. `joint` is the normal mode; the
/// other two exist for boundary comparisons.
enum class TrainObjective { joint, ssl_only, sl_only };
enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  long iterations = 200;
  Index batch_size = 4;
  double learning_rate = 1e-3;
  double lambda = 0.5;
  double momentum = 0.999;
  double keep_prob = 0.5;
  double temperature = 1.0;
  Index crop_window = 64;
  ModelDims dims;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;
  bool same_branch_negatives = false;
  SoftLabelAxis soft_label_axis = SoftLabelAxis::time;
  TrainObjective objective = TrainObjective::joint;
  OptimizerKind optimizer = OptimizerKind::sgd;
  bool record_timing = false;

  void validate() const;
  /// validate() plus consistency with the dataset.
  void validate_against(const SeriesDataset& ds) const;
};

struct TrainTrace {
  std::vector<LossReport> losses;
  std::vector<double> seconds;  // empty unless timing was recorded
  std::string checkpoint_path;
};

/// iteration,ssl,sl,joint[,seconds]. Iterations are 1-based.
void write_trace_csv(const TrainTrace& trace, const std::string& path);

/// One optimisation step's intermediate values, kept for inspection.
struct StepRecord {
  CropPair crop;
  LossReport report;
  Gradients gradients;
};

class Trainer {
 public:
  /// Fresh run: parameters initialised from cfg.seed. The dataset must be
  /// split (and usually normalised) and outlive the trainer.
  Trainer(TrainConfig cfg, const SeriesDataset& ds);
  /// Continue from a checkpoint written with resume state.
  static Trainer resume(TrainConfig cfg, const SeriesDataset& ds, const std::string& checkpoint);

  StepRecord step();
  /// Run until cfg.iterations steps have been taken in total.
  TrainTrace run();

  /// Checkpoint including the sampling generator and optimiser state.
  void save(const std::string& path);

  const TeacherStudentState& state() const noexcept { return state_; }
  TeacherStudentState& state() noexcept { return state_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  const TrainTrace& trace() const noexcept { return trace_; }

 private:
  Tensor sample_windows();

  TrainConfig cfg_;
  const SeriesDataset* ds_;
  TeacherStudentState state_;
  Rng rng_;
  std::unique_ptr<Adam> adam_;
  TrainTrace trace_;
};

/// Pretrain for cfg.iterations steps from a fresh state.
std::pair<TeacherStudentState, TrainTrace> pretrain(const TrainConfig& cfg, const SeriesDataset& ds);

/// Mean cosine similarity between teacher and student outputs at the same
/// overlap timestamp versus at different timestamps of the same instance,
/// over `batches` freshly sampled training batches.
struct CosineDiagnostic {
  double matched = 0.0;
  double mismatched = 0.0;
};
CosineDiagnostic cross_branch_cosine(const TeacherStudentState& state, const TrainConfig& cfg,
                                     const SeriesDataset& ds, int batches, std::uint64_t seed);

}  // namespace tsrep
