#pragma once

#include <optional>
#include <string>

#include "tsrep/model.hpp"

namespace tsrep {

inline constexpr int kCheckpointVersion = 1;

/// Trainer-side state needed to continue a run exactly where it stopped.
struct ResumeState {
  std::string rng;  // textual mt19937_64 state
  long adam_steps = 0;
  ParamSet adam_first;
  ParamSet adam_second;
};

/// JSON document holding dims, m, lambda, the iteration count, the center,
/// and both parameter sets as {shape, data}. Doubles are written in
/// shortest round-trip form, so a reload is value-exact.
void save_checkpoint(const TeacherStudentState& state, const std::string& path,
                     const std::optional<ResumeState>& resume = std::nullopt);

/// Throws CheckpointError naming the offending field on malformed input or
/// a version mismatch.
TeacherStudentState load_checkpoint(const std::string& path, std::optional<ResumeState>* resume = nullptr);

}  // namespace tsrep
