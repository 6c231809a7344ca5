#include "tsrep/model.hpp"

#include <cmath>
#include <cstdio>

#include "tsrep/ops.hpp"

namespace tsrep {

namespace param_names {

std::string proj_fc(Index layer, const char* leaf) {
  return "proj.fc" + std::to_string(layer) + "." + leaf;
}

std::string block_conv(Index block, Index conv, const char* leaf) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "enc.block%02lld.conv%lld.%s", static_cast<long long>(block),
                static_cast<long long>(conv), leaf);
  return buf;
}

}  // namespace param_names

void ModelDims::validate() const {
  if (input_channels < 1 || hidden < 1 || repr < 1 || width < 1 || blocks < 0 || kernel < 1) {
    throw ParameterError("model dimensions must be positive (blocks may be 0)");
  }
  if (blocks > 40) throw ParameterError("at most 40 encoder blocks are supported");
}

Index receptive_field(const ModelDims& dims, Index blocks_used) {
  return 2 * (dims.kernel - 1) * ((Index{1} << blocks_used) - 1) + 1;
}

namespace {

Tensor kaiming(Rng& rng, Shape shape, Index fan_in) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor uniform_bias(Rng& rng, Index n, Index fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(Shape{n});
  for (Index i = 0; i < n; ++i) t[i] = dist(rng);
  return t;
}

Var param(Tape& tape, const ParamSet& params, const std::string& name) {
  return tape.parameter(name, params.at(name));
}

}  // namespace

TeacherStudentState init_params(std::uint64_t seed, const ModelDims& dims, double momentum, double lambda) {
  dims.validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
  Rng rng(seed);
  ParamSet p;

  Index fan = dims.input_channels;
  for (Index layer = 0; layer < 3; ++layer) {
    p.add(param_names::proj_fc(layer, "weight"), kaiming(rng, {fan, dims.hidden}, fan));
    p.add(param_names::proj_fc(layer, "bias"), uniform_bias(rng, dims.hidden, fan));
    fan = dims.hidden;
  }
  Tensor direction = kaiming(rng, {dims.hidden, dims.repr}, dims.hidden);
  Tensor gain(Shape{dims.repr});
  gain.vec() = direction.matrix(dims.hidden, dims.repr).colwise().norm().transpose();
  p.add("proj.out.direction", std::move(direction));
  p.add("proj.out.gain", std::move(gain));
  p.add("proj.out.bias", uniform_bias(rng, dims.repr, dims.hidden));

  p.add("enc.input.weight", kaiming(rng, {dims.repr, dims.width}, dims.repr));
  p.add("enc.input.bias", uniform_bias(rng, dims.width, dims.repr));
  const Index conv_fan = dims.width * dims.kernel;
  for (Index b = 0; b < dims.blocks; ++b) {
    for (Index c = 0; c < 2; ++c) {
      p.add(param_names::block_conv(b, c, "kernel"), kaiming(rng, {dims.width, dims.width, dims.kernel}, conv_fan));
      p.add(param_names::block_conv(b, c, "bias"), uniform_bias(rng, dims.width, conv_fan));
    }
  }
  p.add("enc.output.weight", kaiming(rng, {dims.width, dims.repr}, dims.width));
  p.add("enc.output.bias", uniform_bias(rng, dims.repr, dims.width));

  TeacherStudentState state;
  state.dims = dims;
  state.student = std::move(p);
  state.teacher = state.student;
  state.center = Tensor(Shape{dims.repr});
  state.momentum = momentum;
  state.lambda = lambda;
  return state;
}

Var project_normalized(Tape& tape, const ParamSet& params, Var x) {
  const Index expected = params.at(param_names::proj_fc(0, "weight")).dim(0);
  if (x.value().rank() != 3 || x.dim(2) != expected) {
    throw DimensionError("projection expects [B, L, " + std::to_string(expected) + "], got " +
                         shape_str(x.shape()));
  }
  Var h = x;
  for (Index layer = 0; layer < 3; ++layer) {
    h = linear(h, param(tape, params, param_names::proj_fc(layer, "weight")),
               param(tape, params, param_names::proj_fc(layer, "bias")));
    if (layer < 2) h = relu(h);
  }
  return l2_normalize(h, 2);
}

Var project(Tape& tape, const ParamSet& params, Var x) {
  Var unit = project_normalized(tape, params, x);
  Var w = weight_norm(param(tape, params, "proj.out.direction"), param(tape, params, "proj.out.gain"));
  return linear(unit, w, param(tape, params, "proj.out.bias"));
}

Var encoder_block(Tape& tape, const ParamSet& params, Var z, Index block, Index dilation) {
  Var h = dilated_causal_conv1d(gelu(z), param(tape, params, param_names::block_conv(block, 0, "kernel")),
                                param(tape, params, param_names::block_conv(block, 0, "bias")), dilation);
  h = dilated_causal_conv1d(gelu(h), param(tape, params, param_names::block_conv(block, 1, "kernel")),
                            param(tape, params, param_names::block_conv(block, 1, "bias")), dilation);
  return add(z, h);
}

Var encode(Tape& tape, const ParamSet& params, const ModelDims& dims, Var z) {
  if (z.value().rank() != 3 || z.dim(2) != dims.repr) {
    throw DimensionError("encoder expects [B, L, " + std::to_string(dims.repr) + "], got " + shape_str(z.shape()));
  }
  Var h = linear(z, param(tape, params, "enc.input.weight"), param(tape, params, "enc.input.bias"));
  h = swap_last_axes(h);  // [B, width, L]
  for (Index b = 0; b < dims.blocks; ++b) h = encoder_block(tape, params, h, b, Index{1} << b);
  h = swap_last_axes(h);
  return linear(h, param(tape, params, "enc.output.weight"), param(tape, params, "enc.output.bias"));
}

Var represent(Tape& tape, const ParamSet& params, const ModelDims& dims, Var x) {
  return encode(tape, params, dims, project(tape, params, x));
}

Tensor teacher_forward(const TeacherStudentState& state, const Tensor& raw_crop, double keep_prob, Rng& rng) {
  Tape off(false);
  Var z = project(off, state.teacher, off.constant(raw_crop));
  Tensor masked = bernoulli_mask(z.value(), keep_prob, 1, rng);
  return encode(off, state.teacher, state.dims, off.constant(std::move(masked))).value();
}

Var student_forward(Tape& tape, const TeacherStudentState& state, const Tensor& masked_crop) {
  return represent(tape, state.student, state.dims, tape.constant(masked_crop));
}

void update_center(TeacherStudentState& state, const Tensor& h_t) {
  if (h_t.rank() != 3 || h_t.dim(2) != state.dims.repr) {
    throw DimensionError("teacher output must be [B, L, " + std::to_string(state.dims.repr) + "]");
  }
  const Index rows = h_t.dim(0) * h_t.dim(1);
  if (rows == 0) throw UsageError("cannot center an empty batch");
  state.center = Tensor(Shape{state.dims.repr});
  state.center.vec() = h_t.matrix(rows, state.dims.repr).colwise().mean().transpose();
}

Tensor apply_center(const TeacherStudentState& state, const Tensor& h_t) {
  if (h_t.rank() != 3 || h_t.dim(2) != state.center.size()) {
    throw DimensionError("teacher output does not match the center width");
  }
  const Index rows = h_t.dim(0) * h_t.dim(1);
  if (rows == 0) throw UsageError("cannot center an empty batch");
  Tensor out = h_t;
  out.matrix(rows, state.center.size()).rowwise() -= state.center.vec().transpose();
  return out;
}

void ema_update(TeacherStudentState& state) {
  const double m = state.momentum;
  if (!(m >= 0.0 && m < 1.0)) throw ParameterError("momentum must lie in [0, 1), got " + std::to_string(m));
  if (!state.teacher.same_layout(state.student)) throw UsageError("teacher and student layouts differ");
  for (const auto& [name, s] : state.student) {
    auto t = state.teacher.values(name);
    for (Index i = 0; i < s.size(); ++i) t[i] = m * t[i] + (1.0 - m) * s[i];
  }
}

}  // namespace tsrep
