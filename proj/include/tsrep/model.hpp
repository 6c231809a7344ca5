#pragma once

#include <string>

#include "tsrep/augment.hpp"
#include "tsrep/autodiff.hpp"

namespace tsrep {

/// Architecture extents. The projection head is
/// C -> hidden -> hidden -> hidden (ReLU between), L2 normalisation, then a
/// weight-normalised linear map to `repr`. The encoder maps repr -> width,
/// runs `blocks` residual blocks (GELU, conv, GELU, conv; dilation 2^p in
/// block p) and maps width -> repr per timestamp.
struct ModelDims {
  Index input_channels = 1;
  Index hidden = 64;
  Index repr = 320;
  Index width = 64;
  Index blocks = 10;
  Index kernel = 3;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Receptive field, in time steps, of the encoder's first `blocks_used`
/// blocks: 2 (k - 1)(2^blocks_used - 1) + 1.
Index receptive_field(const ModelDims& dims, Index blocks_used);

struct TeacherStudentState {
  ModelDims dims;
  ParamSet teacher;
  ParamSet student;
  Tensor center;  // [repr]
  double momentum = 0.999;
  double lambda = 0.5;
  long iteration = 0;
};

/// Kaiming-normal weights (variance 2 / fan_in), biases uniform on
/// +-1/sqrt(fan_in), weight-norm gains set to the initial column norms,
/// teacher copied from student, zero center.
TeacherStudentState init_params(std::uint64_t seed, const ModelDims& dims, double momentum = 0.999,
                                double lambda = 0.5);

/// Projection up to and including the L2 normalisation (unit norm per
/// timestamp). x is [B, L, C].
Var project_normalized(Tape& tape, const ParamSet& params, Var x);
/// Full projection head, [B, L, C] -> [B, L, repr].
Var project(Tape& tape, const ParamSet& params, Var x);

/// One residual block on [B, width, L]: z + conv(gelu(conv(gelu(z)))).
Var encoder_block(Tape& tape, const ParamSet& params, Var z, Index block, Index dilation);
/// Encoder, [B, L, repr] -> [B, L, repr].
Var encode(Tape& tape, const ParamSet& params, const ModelDims& dims, Var z);

/// Projection then encoder; the forward pass of either branch without masks.
Var represent(Tape& tape, const ParamSet& params, const ModelDims& dims, Var x);

/// Teacher branch run off the gradient tape: project, mask in latent space
/// with keep probability `keep_prob`, encode.
Tensor teacher_forward(const TeacherStudentState& state, const Tensor& raw_crop, double keep_prob, Rng& rng);

/// Student branch recorded on `tape`; input is already masked.
Var student_forward(Tape& tape, const TeacherStudentState& state, const Tensor& masked_crop);

/// c <- mean of h_t over batch and time. h_t is [B, L, repr].
void update_center(TeacherStudentState& state, const Tensor& h_t);
/// h_t - c broadcast over batch and time.
Tensor apply_center(const TeacherStudentState& state, const Tensor& h_t);

/// theta_t <- m * theta_t + (1 - m) * theta_s.
void ema_update(TeacherStudentState& state);

namespace param_names {
std::string proj_fc(Index layer, const char* leaf);
std::string block_conv(Index block, Index conv, const char* leaf);
}  // namespace param_names

}  // namespace tsrep
