#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tsrep/trainer.hpp"

namespace tsrep {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("tsrep_trainer_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

SeriesDataset fixture() { return normalize(split(synth_generate(3, 1, 600, 2, {}))); }

TrainConfig small_config() {
  TrainConfig c;
  c.iterations = 6;
  c.batch_size = 3;
  c.learning_rate = 1e-2;
  c.crop_window = 24;
  c.seed = 5;
  c.dims.input_channels = 2;
  c.dims.hidden = 8;
  c.dims.repr = 16;
  c.dims.width = 8;
  c.dims.blocks = 3;
  return c;
}

TEST(Trainer, SameSeedSameTrace) {
  TempDir dir;
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  auto [s1, t1] = pretrain(c, ds);
  auto [s2, t2] = pretrain(c, ds);
  ASSERT_EQ(t1.losses.size(), 6u);
  EXPECT_TRUE(t1.seconds.empty());
  write_trace_csv(t1, dir.file("a.csv"));
  write_trace_csv(t2, dir.file("b.csv"));
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
  EXPECT_EQ(s1.student, s2.student);
  EXPECT_EQ(s1.teacher, s2.teacher);
  EXPECT_EQ(s1.iteration, 6);
  c.seed = 6;
  auto [s3, t3] = pretrain(c, ds);
  EXPECT_NE(t3.losses[0].joint, t1.losses[0].joint);
}

TEST(Trainer, TraceCsvLayout) {
  TempDir dir;
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  c.iterations = 2;
  c.record_timing = true;
  auto [s, t] = pretrain(c, ds);
  ASSERT_EQ(t.seconds.size(), 2u);
  write_trace_csv(t, dir.file("t.csv"));
  std::istringstream in(slurp(dir.file("t.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,ssl,sl,joint,seconds");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  t.seconds.clear();
  write_trace_csv(t, dir.file("u.csv"));
  EXPECT_EQ(slurp(dir.file("u.csv")).substr(0, 23), "iteration,ssl,sl,joint\n");
}

TEST(Trainer, LossesIdentityAndFinite) {
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  c.lambda = 0.3;
  auto [s, t] = pretrain(c, ds);
  for (const auto& r : t.losses) {
    EXPECT_TRUE(std::isfinite(r.joint));
    EXPECT_NEAR(r.joint, 0.3 * r.sl + 0.7 * r.ssl, 1e-12);
    EXPECT_GT(r.positives, 0);
  }
  c.lambda = 0.0;
  Trainer tr(c, ds);
  LossReport first = tr.step().report;
  EXPECT_EQ(first.joint, first.ssl);
}

void expect_same_trajectory(TrainConfig a, TrainConfig b, const SeriesDataset& ds) {
  Trainer ta(a, ds), tb(b, ds);
  for (int i = 0; i < 5; ++i) {
    StepRecord ra = ta.step();
    StepRecord rb = tb.step();
    ASSERT_EQ(ra.crop, rb.crop);
    ASSERT_EQ(ra.gradients, rb.gradients) << "iteration " << i + 1;
    ASSERT_EQ(ta.state().student, tb.state().student);
    ASSERT_EQ(ta.state().teacher, tb.state().teacher);
  }
}

TEST(Trainer, LambdaBoundariesMatchSingleObjective) {
  SeriesDataset ds = fixture();
  TrainConfig joint = small_config();
  TrainConfig single = small_config();
  joint.lambda = 0.0;
  single.lambda = 0.0;
  single.objective = TrainObjective::ssl_only;
  expect_same_trajectory(joint, single, ds);
  joint.lambda = 1.0;
  single.lambda = 1.0;
  single.objective = TrainObjective::sl_only;
  expect_same_trajectory(joint, single, ds);
}

TEST(Trainer, ResumedRunReproducesContinuousRun) {
  TempDir dir;
  SeriesDataset ds = fixture();
  for (OptimizerKind opt : {OptimizerKind::sgd, OptimizerKind::adam}) {
    TrainConfig c = small_config();
    c.optimizer = opt;
    auto [full_state, full] = pretrain(c, ds);

    TrainConfig head = c;
    head.iterations = 3;
    Trainer first(head, ds);
    TrainTrace t1 = first.run();
    first.save(dir.file("mid.json"));
    Trainer second = Trainer::resume(c, ds, dir.file("mid.json"));
    EXPECT_EQ(second.state().iteration, 3);
    TrainTrace t2 = second.run();
    ASSERT_EQ(t1.losses.size() + t2.losses.size(), full.losses.size());
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(t1.losses[i].joint, full.losses[i].joint);
      EXPECT_EQ(t2.losses[i].joint, full.losses[i + 3].joint);
    }
    EXPECT_EQ(second.state().student, full_state.student);
    EXPECT_EQ(second.state().teacher, full_state.teacher);
    EXPECT_EQ(second.state().center, full_state.center);
  }
}

TEST(Trainer, TeacherFollowsEmaOfRecordedStudents) {
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  c.momentum = 0.9;
  Trainer tr(c, ds);
  TeacherStudentState offline = tr.state();
  for (int i = 0; i < 6; ++i) {
    const ParamSet teacher_before = tr.state().teacher;
    const ParamSet student_before = tr.state().student;
    tr.step();
    const auto& st = tr.state();
    EXPECT_FALSE(st.student == student_before) << "student did not move at step " << i + 1;
    offline.student = st.student;
    ema_update(offline);
    double drift = 0.0, gap = 0.0;
    for (const auto& [name, t] : st.teacher) {
      const Tensor& o = offline.teacher.at(name);
      for (Index k = 0; k < t.size(); ++k) {
        ASSERT_NEAR(t[k], o[k], 1e-12);
        drift = std::max(drift, std::abs(t[k] - teacher_before.at(name)[k]));
        gap = std::max(gap, std::abs(teacher_before.at(name)[k] - st.student.at(name)[k]));
      }
    }
    EXPECT_LE(drift, (1.0 - c.momentum) * gap + 1e-15);
  }
}

TEST(Trainer, NonFiniteInputAbortsWithIteration) {
  SeriesDataset ds = fixture();
  for (Index t = 0; t < ds.length(); ++t) ds.values.at({0, t, 0}) = std::numeric_limits<double>::quiet_NaN();
  try {
    pretrain(small_config(), ds);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(Trainer, ConfigChecks) {
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  c.crop_window = 1000;
  EXPECT_THROW(Trainer(c, ds), SizingError);
  c = small_config();
  c.dims.input_channels = 3;
  EXPECT_THROW(Trainer(c, ds), DimensionError);
  c = small_config();
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config();
  c.keep_prob = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config();
  c.iterations = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = small_config();
  c.checkpoint_every = 2;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir;
  SeriesDataset ds = fixture();
  auto [s, t] = pretrain(small_config(), ds);
  save_checkpoint(s, dir.file("c.json"));
  TeacherStudentState back = load_checkpoint(dir.file("c.json"));
  EXPECT_EQ(back.student, s.student);
  EXPECT_EQ(back.teacher, s.teacher);
  EXPECT_EQ(back.center, s.center);
  EXPECT_EQ(back.dims, s.dims);
  EXPECT_EQ(back.momentum, s.momentum);
  EXPECT_EQ(back.lambda, s.lambda);
  EXPECT_EQ(back.iteration, 6);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  TempDir dir;
  auto s = init_params(1, small_config().dims);
  save_checkpoint(s, dir.file("c.json"));
  const std::string text = slurp(dir.file("c.json"));
  std::ofstream(dir.file("trunc.json")) << text.substr(0, text.size() / 2);
  EXPECT_THROW(load_checkpoint(dir.file("trunc.json")), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir.file("absent.json")), CheckpointError);

  std::string bumped = text;
  bumped.replace(bumped.find("\"version\":1"), 11, "\"version\":9");
  std::ofstream(dir.file("v.json")) << bumped;
  try {
    load_checkpoint(dir.file("v.json"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("'version'"), std::string::npos) << e.what();
  }
  std::string nodims = text;
  nodims.replace(nodims.find("\"hidden\""), 8, "\"hiddem\"");
  std::ofstream(dir.file("d.json")) << nodims;
  try {
    load_checkpoint(dir.file("d.json"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("dims.hidden"), std::string::npos) << e.what();
  }
}

TEST(Diagnostics, CosineIsBounded) {
  SeriesDataset ds = fixture();
  TrainConfig c = small_config();
  auto s = init_params(1, c.dims);
  CosineDiagnostic d = cross_branch_cosine(s, c, ds, 3, 9);
  EXPECT_LE(std::abs(d.matched), 1.0);
  EXPECT_LE(std::abs(d.mismatched), 1.0);
  CosineDiagnostic again = cross_branch_cosine(s, c, ds, 3, 9);
  EXPECT_EQ(d.matched, again.matched);
}

}  // namespace
}  // namespace tsrep
