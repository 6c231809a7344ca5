#include "tsrep/ops.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace tsrep {
namespace {

using Mat = RowMajorMatrix<double>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using StridedMap = Eigen::Map<Mat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedMap = Eigen::Map<const Mat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using Strides = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

Index normalize_axis(Index axis, Index rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  }
  return axis;
}

/// Decomposes a shape around `axis` into (outer, extent, inner) strides.
struct AxisView {
  Index outer = 1;
  Index extent = 1;
  Index inner = 1;

  AxisView(const Shape& shape, Index axis) {
    for (Index a = 0; a < static_cast<Index>(shape.size()); ++a) {
      if (a < axis) outer *= shape[a];
      else if (a == axis) extent = shape[a];
      else inner *= shape[a];
    }
  }
  Index at(Index o, Index j, Index i) const { return (o * extent + j) * inner + i; }
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), Tensor::Storage(a.value().vec() + b.value().vec()));
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) pg[0]->vec() += g.vec();
    if (pg[1]) pg[1]->vec() += g.vec();
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), Tensor::Storage(a.value().vec() - b.value().vec()));
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) pg[0]->vec() += g.vec();
    if (pg[1]) pg[1]->vec() -= g.vec();
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const Tensor* av = &a.value();
  const Tensor* bv = &b.value();
  Tensor out(a.shape(), Tensor::Storage(av->vec().cwiseProduct(bv->vec())));
  return a.tape().record(std::move(out), {a, b},
                         [av, bv](const Tensor& g, std::span<Tensor* const> pg) {
                           if (pg[0]) pg[0]->vec() += g.vec().cwiseProduct(bv->vec());
                           if (pg[1]) pg[1]->vec() += g.vec().cwiseProduct(av->vec());
                         });
}

Var scale(Var a, double s) {
  Tensor out(a.shape(), Tensor::Storage(a.value().vec() * s));
  return a.tape().record(std::move(out), {a}, [s](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) pg[0]->vec() += g.vec() * s;
  });
}

Var relu(Var x) {
  const Tensor* xv = &x.value();
  Tensor out(x.shape(), Tensor::Storage(xv->vec().cwiseMax(0.0)));
  return x.tape().record(std::move(out), {x}, [xv](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    pg[0]->vec().array() += (xv->vec().array() > 0.0).select(g.vec().array(), 0.0);
  });
}

Var gelu(Var x) {
  const Tensor* xv = &x.value();
  Tensor out(x.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = (*xv)[i] * normal_cdf((*xv)[i]);
  return x.tape().record(std::move(out), {x}, [xv](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (Index i = 0; i < g.size(); ++i) {
      const double v = (*xv)[i];
      (*pg[0])[i] += g[i] * (normal_cdf(v) + v * normal_pdf(v));
    }
  });
}

Var sum(Var x) {
  Tensor out = Tensor::scalar(x.value().vec().sum());
  return x.tape().record(std::move(out), {x}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) pg[0]->vec().array() += g[0];
  });
}

Var mean(Var x) {
  const Index n = x.value().size();
  if (n == 0) throw UsageError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var linear(Var x, Var weight) {
  const Tensor* xv = &x.value();
  const Tensor* wv = &weight.value();
  if (wv->rank() != 2 || xv->rank() < 1 || xv->dim(-1) != wv->dim(0)) {
    throw DimensionError("linear: input " + shape_str(xv->shape()) + " vs weight " +
                         shape_str(wv->shape()));
  }
  const Index din = wv->dim(0);
  const Index dout = wv->dim(1);
  const Index rows = xv->size() / std::max<Index>(din, 1);
  Shape out_shape = xv->shape();
  out_shape.back() = dout;
  Tensor out(out_shape);
  out.matrix(rows, dout).noalias() = xv->matrix(rows, din) * wv->matrix(din, dout);
  return x.tape().record(
      std::move(out), {x, weight},
      [xv, wv, rows, din, dout](const Tensor& g, std::span<Tensor* const> pg) {
        auto gm = g.matrix(rows, dout);
        if (pg[0]) pg[0]->matrix(rows, din).noalias() += gm * wv->matrix(din, dout).transpose();
        if (pg[1]) pg[1]->matrix(din, dout).noalias() += xv->matrix(rows, din).transpose() * gm;
      });
}

Var linear(Var x, Var weight, Var bias) {
  Var y = linear(x, weight);
  const Index dout = y.dim(-1);
  if (bias.value().rank() != 1 || bias.dim(0) != dout) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " for output width " +
                         std::to_string(dout));
  }
  const Index rows = y.value().size() / std::max<Index>(dout, 1);
  Tensor out = y.value();
  out.matrix(rows, dout).rowwise() += bias.value().vec().transpose();
  return x.tape().record(std::move(out), {y, bias},
                         [rows, dout](const Tensor& g, std::span<Tensor* const> pg) {
                           if (pg[0]) pg[0]->vec() += g.vec();
                           if (pg[1]) {
                             pg[1]->vec() += g.matrix(rows, dout).colwise().sum().transpose();
                           }
                         });
}

Var weight_norm(Var direction, Var gain) {
  const Tensor* vv = &direction.value();
  const Tensor* gv = &gain.value();
  if (vv->rank() != 2 || gv->rank() != 1 || gv->dim(0) != vv->dim(1)) {
    throw DimensionError("weight_norm: direction " + shape_str(vv->shape()) + " vs gain " +
                         shape_str(gv->shape()));
  }
  const Index din = vv->dim(0);
  const Index dout = vv->dim(1);
  auto vm = vv->matrix(din, dout);
  Eigen::VectorXd norms = vm.colwise().norm().transpose();
  if ((norms.array() <= 0.0).any()) throw NumericError("weight_norm: zero-norm direction column");
  Tensor out(vv->shape());
  out.matrix(din, dout) = vm * (gv->vec().cwiseQuotient(norms)).asDiagonal();
  return direction.tape().record(
      std::move(out), {direction, gain},
      [vv, gv, norms, din, dout](const Tensor& g, std::span<Tensor* const> pg) {
        auto vm = vv->matrix(din, dout);
        auto gm = g.matrix(din, dout);
        for (Index o = 0; o < dout; ++o) {
          const Eigen::VectorXd u = vm.col(o) / norms[o];
          const double proj = u.dot(gm.col(o));
          if (pg[1]) (*pg[1])[o] += proj;
          if (pg[0]) {
            pg[0]->matrix(din, dout).col(o) += ((*gv)[o] / norms[o]) * (gm.col(o) - proj * u);
          }
        }
      });
}

Var l2_normalize(Var x, Index axis) {
  constexpr double kEps = 1e-12;
  const Tensor* xv = &x.value();
  axis = normalize_axis(axis, xv->rank(), "l2_normalize");
  const AxisView view(xv->shape(), axis);
  Tensor out(xv->shape());
  // Per-fibre norm; negative marks a fibre clamped to kEps.
  Tensor norms(Shape{view.outer, view.inner});
  for (Index o = 0; o < view.outer; ++o) {
    for (Index i = 0; i < view.inner; ++i) {
      double ss = 0.0;
      for (Index j = 0; j < view.extent; ++j) ss += (*xv)[view.at(o, j, i)] * (*xv)[view.at(o, j, i)];
      const double n = std::sqrt(ss);
      const double d = std::max(n, kEps);
      norms[o * view.inner + i] = n < kEps ? -d : d;
      for (Index j = 0; j < view.extent; ++j) out[view.at(o, j, i)] = (*xv)[view.at(o, j, i)] / d;
    }
  }
  return x.tape().record(
      std::move(out), {x}, [xv, view, norms = std::move(norms)](const Tensor& g, std::span<Tensor* const> pg) {
        if (!pg[0]) return;
        for (Index o = 0; o < view.outer; ++o) {
          for (Index i = 0; i < view.inner; ++i) {
            const double signed_d = norms[o * view.inner + i];
            const double d = std::abs(signed_d);
            if (signed_d < 0.0) {
              for (Index j = 0; j < view.extent; ++j) (*pg[0])[view.at(o, j, i)] += g[view.at(o, j, i)] / d;
              continue;
            }
            double ydotg = 0.0;
            for (Index j = 0; j < view.extent; ++j) ydotg += (*xv)[view.at(o, j, i)] / d * g[view.at(o, j, i)];
            for (Index j = 0; j < view.extent; ++j) {
              const Index k = view.at(o, j, i);
              (*pg[0])[k] += (g[k] - ((*xv)[k] / d) * ydotg) / d;
            }
          }
        }
      });
}

Var softmax(Var x, Index axis) {
  const Tensor& xv = x.value();
  axis = normalize_axis(axis, xv.rank(), "softmax");
  const AxisView view(xv.shape(), axis);
  if (view.extent < 1) throw DimensionError("softmax over an empty axis");
  Tensor out(xv.shape());
  for (Index o = 0; o < view.outer; ++o) {
    for (Index i = 0; i < view.inner; ++i) {
      double mx = xv[view.at(o, 0, i)];
      for (Index j = 1; j < view.extent; ++j) mx = std::max(mx, xv[view.at(o, j, i)]);
      double z = 0.0;
      for (Index j = 0; j < view.extent; ++j) {
        const double e = std::exp(xv[view.at(o, j, i)] - mx);
        out[view.at(o, j, i)] = e;
        z += e;
      }
      for (Index j = 0; j < view.extent; ++j) out[view.at(o, j, i)] /= z;
    }
  }
  auto result = std::make_shared<Tensor>(out);
  return x.tape().record(std::move(out), {x},
                         [view, result](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           const Tensor& y = *result;
                           for (Index o = 0; o < view.outer; ++o) {
                             for (Index i = 0; i < view.inner; ++i) {
                               double dot = 0.0;
                               for (Index j = 0; j < view.extent; ++j) {
                                 dot += g[view.at(o, j, i)] * y[view.at(o, j, i)];
                               }
                               for (Index j = 0; j < view.extent; ++j) {
                                 const Index k = view.at(o, j, i);
                                 (*pg[0])[k] += y[k] * (g[k] - dot);
                               }
                             }
                           }
                         });
}

Var log_softmax(Var x, Index axis) {
  const Tensor& xv = x.value();
  axis = normalize_axis(axis, xv.rank(), "log_softmax");
  const AxisView view(xv.shape(), axis);
  if (view.extent < 1) throw DimensionError("log_softmax over an empty axis");
  Tensor out(xv.shape());
  auto probs = std::make_shared<Tensor>(xv.shape());
  for (Index o = 0; o < view.outer; ++o) {
    for (Index i = 0; i < view.inner; ++i) {
      double mx = xv[view.at(o, 0, i)];
      for (Index j = 1; j < view.extent; ++j) mx = std::max(mx, xv[view.at(o, j, i)]);
      double z = 0.0;
      for (Index j = 0; j < view.extent; ++j) z += std::exp(xv[view.at(o, j, i)] - mx);
      const double lse = mx + std::log(z);
      for (Index j = 0; j < view.extent; ++j) {
        const Index k = view.at(o, j, i);
        out[k] = xv[k] - lse;
        (*probs)[k] = std::exp(out[k]);
      }
    }
  }
  return x.tape().record(std::move(out), {x},
                         [view, probs](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           for (Index o = 0; o < view.outer; ++o) {
                             for (Index i = 0; i < view.inner; ++i) {
                               double gs = 0.0;
                               for (Index j = 0; j < view.extent; ++j) gs += g[view.at(o, j, i)];
                               for (Index j = 0; j < view.extent; ++j) {
                                 const Index k = view.at(o, j, i);
                                 (*pg[0])[k] += g[k] - (*probs)[k] * gs;
                               }
                             }
                           }
                         });
}

Var slice(Var x, Index axis, Index begin, Index end) {
  const Tensor& xv = x.value();
  axis = normalize_axis(axis, xv.rank(), "slice");
  const Index extent = xv.dim(axis);
  if (begin < 0 || end > extent || begin >= end) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for extent " + std::to_string(extent));
  }
  const AxisView view(xv.shape(), axis);
  Shape out_shape = xv.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const Index len = end - begin;
  for (Index o = 0; o < view.outer; ++o) {
    std::copy_n(xv.data() + view.at(o, begin, 0), len * view.inner, out.data() + o * len * view.inner);
  }
  return x.tape().record(std::move(out), {x},
                         [view, begin, len](const Tensor& g, std::span<Tensor* const> pg) {
                           if (!pg[0]) return;
                           for (Index o = 0; o < view.outer; ++o) {
                             const double* src = g.data() + o * len * view.inner;
                             double* dst = pg[0]->data() + view.at(o, begin, 0);
                             for (Index k = 0; k < len * view.inner; ++k) dst[k] += src[k];
                           }
                         });
}

Var swap_last_axes(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw DimensionError("swap_last_axes needs rank 3, got " + shape_str(xv.shape()));
  const Index b = xv.dim(0), m = xv.dim(1), n = xv.dim(2);
  Tensor out(Shape{b, n, m});
  for (Index i = 0; i < b; ++i) {
    MatMap(out.data() + i * m * n, n, m) = ConstMatMap(xv.data() + i * m * n, m, n).transpose();
  }
  return x.tape().record(std::move(out), {x}, [b, m, n](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (Index i = 0; i < b; ++i) {
      MatMap(pg[0]->data() + i * m * n, m, n) += ConstMatMap(g.data() + i * m * n, n, m).transpose();
    }
  });
}

namespace {

Var conv_impl(Var z, Var kernel, const Var* bias, Index dilation) {
  const Tensor* zv = &z.value();
  const Tensor* kv = &kernel.value();
  if (dilation < 1) throw ParameterError("dilation must be >= 1, got " + std::to_string(dilation));
  if (kv->rank() != 3 || kv->dim(2) < 1) {
    throw ParameterError("kernel must be [Cout, Cin, k] with k >= 1, got " + shape_str(kv->shape()));
  }
  if (zv->rank() != 3 || zv->dim(1) != kv->dim(1)) {
    throw DimensionError("conv input " + shape_str(zv->shape()) + " vs kernel " + shape_str(kv->shape()));
  }
  const Index batch = zv->dim(0), cin = zv->dim(1), len = zv->dim(2);
  const Index cout = kv->dim(0), taps = kv->dim(2);
  if (bias && (bias->value().rank() != 1 || bias->dim(0) != cout)) {
    throw DimensionError("conv bias " + shape_str(bias->shape()) + " for " + std::to_string(cout) +
                         " output channels");
  }

  auto tap = [kv, cout, cin, taps](Index i) {
    return ConstStridedMap(kv->data() + i, cout, cin, Strides(cin * taps, taps));
  };

  Tensor out(Shape{batch, cout, len});
  for (Index b = 0; b < batch; ++b) {
    ConstMatMap zb(zv->data() + b * cin * len, cin, len);
    MatMap ob(out.data() + b * cout * len, cout, len);
    for (Index i = 0; i < taps; ++i) {
      const Index shift = dilation * i;
      if (shift >= len) break;
      ob.rightCols(len - shift).noalias() += tap(i) * zb.leftCols(len - shift);
    }
    if (bias) ob.colwise() += bias->value().vec();
  }

  std::vector<Var> parents{z, kernel};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias != nullptr;
  return z.tape().record(
      std::move(out), std::move(parents),
      [zv, kv, batch, cin, len, cout, taps, dilation, has_bias](const Tensor& g,
                                                               std::span<Tensor* const> pg) {
        for (Index b = 0; b < batch; ++b) {
          ConstMatMap gb(g.data() + b * cout * len, cout, len);
          ConstMatMap zb(zv->data() + b * cin * len, cin, len);
          for (Index i = 0; i < taps; ++i) {
            const Index shift = dilation * i;
            if (shift >= len) break;
            if (pg[0]) {
              MatMap dz(pg[0]->data() + b * cin * len, cin, len);
              ConstStridedMap ki(kv->data() + i, cout, cin, Strides(cin * taps, taps));
              dz.leftCols(len - shift).noalias() += ki.transpose() * gb.rightCols(len - shift);
            }
            if (pg[1]) {
              StridedMap dk(pg[1]->data() + i, cout, cin, Strides(cin * taps, taps));
              dk.noalias() += gb.rightCols(len - shift) * zb.leftCols(len - shift).transpose();
            }
          }
          if (has_bias && pg[2]) pg[2]->vec() += gb.rowwise().sum();
        }
      });
}

}  // namespace

Var dilated_causal_conv1d(Var z, Var kernel, Index dilation) {
  return conv_impl(z, kernel, nullptr, dilation);
}

Var dilated_causal_conv1d(Var z, Var kernel, Var bias, Index dilation) {
  return conv_impl(z, kernel, &bias, dilation);
}

Var info_nce(Var anchor, Var other, const InfoNceOptions& options) {
  require_same_shape(anchor, other, "info_nce");
  const Tensor* av = &anchor.value();
  const Tensor* ov = &other.value();
  if (av->rank() != 3) throw DimensionError("info_nce expects [B, L, K], got " + shape_str(av->shape()));
  if (!(options.temperature > 0.0) || !std::isfinite(options.temperature)) {
    throw ParameterError("temperature must be positive and finite");
  }
  const Index batch = av->dim(0), len = av->dim(1), width = av->dim(2);
  if (batch < 1 || len < 1 || (batch < 2 && len < 2)) {
    throw UsageError("info_nce needs B >= 2 or L >= 2 so that a negative exists");
  }
  const double inv_tau = 1.0 / options.temperature;
  const bool same = options.same_branch_negatives;

  // [B, K] slice at one timestamp (instances are L*K apart) and [L, K] block
  // of one instance.
  auto at_time = [len, width, batch](const Tensor* t, Index s) {
    return ConstStridedMap(t->data() + s * width, batch, width, Strides(len * width, 1));
  };
  auto at_inst = [len, width](const Tensor* t, Index i) {
    return ConstMatMap(t->data() + i * len * width, len, width);
  };

  // temporal[s](i, j): anchor i vs other j at time s.
  // spatial[i](s, t): anchor time s vs other time t within instance i.
  // Both diagonals are the positive; it is counted once, from temporal.
  std::vector<Mat> temporal(len), spatial(batch), temporal_self, spatial_self;
  for (Index s = 0; s < len; ++s) temporal[s] = inv_tau * (at_time(av, s) * at_time(ov, s).transpose());
  for (Index i = 0; i < batch; ++i) spatial[i] = inv_tau * (at_inst(av, i) * at_inst(ov, i).transpose());
  if (same) {
    temporal_self.resize(len);
    spatial_self.resize(batch);
    for (Index s = 0; s < len; ++s) temporal_self[s] = inv_tau * (at_time(av, s) * at_time(av, s).transpose());
    for (Index i = 0; i < batch; ++i) spatial_self[i] = inv_tau * (at_inst(av, i) * at_inst(av, i).transpose());
  }

  auto log_normaliser = [&](Index i, Index s) {
    double mx = temporal[s].row(i).maxCoeff();
    for (Index t = 0; t < len; ++t) if (t != s) mx = std::max(mx, spatial[i](s, t));
    if (same) {
      for (Index j = 0; j < batch; ++j) if (j != i) mx = std::max(mx, temporal_self[s](i, j));
      for (Index t = 0; t < len; ++t) if (t != s) mx = std::max(mx, spatial_self[i](s, t));
    }
    double z = 0.0;
    for (Index j = 0; j < batch; ++j) z += std::exp(temporal[s](i, j) - mx);
    for (Index t = 0; t < len; ++t) if (t != s) z += std::exp(spatial[i](s, t) - mx);
    if (same) {
      for (Index j = 0; j < batch; ++j) if (j != i) z += std::exp(temporal_self[s](i, j) - mx);
      for (Index t = 0; t < len; ++t) if (t != s) z += std::exp(spatial_self[i](s, t) - mx);
    }
    return mx + std::log(z);
  };

  Mat lse(batch, len);
  double total = 0.0;
  for (Index i = 0; i < batch; ++i) {
    for (Index s = 0; s < len; ++s) {
      lse(i, s) = log_normaliser(i, s);
      total += lse(i, s) - temporal[s](i, i);
    }
  }
  const double count = static_cast<double>(batch * len);
  Tensor out = Tensor::scalar(total / count);

  // Logit blocks become d(mean loss)/d(logit) for backward.
  for (Index s = 0; s < len; ++s) {
    for (Index i = 0; i < batch; ++i) {
      for (Index j = 0; j < batch; ++j) {
        temporal[s](i, j) = std::exp(temporal[s](i, j) - lse(i, s));
        if (same) temporal_self[s](i, j) = j == i ? 0.0 : std::exp(temporal_self[s](i, j) - lse(i, s));
      }
      temporal[s](i, i) -= 1.0;
    }
    temporal[s] /= count;
    if (same) temporal_self[s] /= count;
  }
  for (Index i = 0; i < batch; ++i) {
    for (Index s = 0; s < len; ++s) {
      for (Index t = 0; t < len; ++t) {
        spatial[i](s, t) = t == s ? 0.0 : std::exp(spatial[i](s, t) - lse(i, s));
        if (same) spatial_self[i](s, t) = t == s ? 0.0 : std::exp(spatial_self[i](s, t) - lse(i, s));
      }
    }
    spatial[i] /= count;
    if (same) spatial_self[i] /= count;
  }

  struct Weights {
    std::vector<Mat> temporal, spatial, temporal_self, spatial_self;
  };
  auto w = std::make_shared<Weights>(
      Weights{std::move(temporal), std::move(spatial), std::move(temporal_self), std::move(spatial_self)});

  return anchor.tape().record(
      std::move(out), {anchor, other},
      [w, av, ov, batch, len, width, inv_tau, same](const Tensor& g, std::span<Tensor* const> pg) {
        const double scale_factor = g[0] * inv_tau;
        auto time_view = [&](Tensor* t, Index s) {
          return StridedMap(t->data() + s * width, batch, width, Strides(len * width, 1));
        };
        auto inst_view = [&](Tensor* t, Index i) { return MatMap(t->data() + i * len * width, len, width); };
        auto ctime = [&](const Tensor* t, Index s) {
          return ConstStridedMap(t->data() + s * width, batch, width, Strides(len * width, 1));
        };
        auto cinst = [&](const Tensor* t, Index i) {
          return ConstMatMap(t->data() + i * len * width, len, width);
        };
        for (Index s = 0; s < len; ++s) {
          const Mat& gt = w->temporal[s];
          if (pg[0]) {
            time_view(pg[0], s).noalias() += scale_factor * (gt * ctime(ov, s));
            if (same) {
              const Mat sym = w->temporal_self[s] + w->temporal_self[s].transpose();
              time_view(pg[0], s).noalias() += scale_factor * (sym * ctime(av, s));
            }
          }
          if (pg[1]) time_view(pg[1], s).noalias() += scale_factor * (gt.transpose() * ctime(av, s));
        }
        for (Index i = 0; i < batch; ++i) {
          const Mat& gs = w->spatial[i];
          if (pg[0]) {
            inst_view(pg[0], i).noalias() += scale_factor * (gs * cinst(ov, i));
            if (same) {
              const Mat sym = w->spatial_self[i] + w->spatial_self[i].transpose();
              inst_view(pg[0], i).noalias() += scale_factor * (sym * cinst(av, i));
            }
          }
          if (pg[1]) inst_view(pg[1], i).noalias() += scale_factor * (gs.transpose() * cinst(av, i));
        }
      });
}

}  // namespace tsrep
