#include "vdn/autodiff/ops.hpp"

#include "vdn/util/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vdn::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

void require_rank(const Var& x, Index rank, const char* op) {
  if (x.value().rank() != rank)
    throw ConfigError(std::string(op) + ": expected rank-" + std::to_string(rank) + " input, got " +
                      shape_string(x.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  if (&a.tape() != &b.tape()) throw ConfigError(std::string(op) + ": operands live on different tapes");
}

struct ConvGeometry {
  Index h, w, cin, kh, kw, cout, oh, ow;
  int stride, pad;
};

// Rows are output positions, columns are (ky, kx, ci) in kernel memory order.
RowMatrix im2col(const Tensor& x, const ConvGeometry& g) {
  RowMatrix cols = RowMatrix::Zero(g.oh * g.ow, g.kh * g.kw * g.cin);
  const double* src = x.data().data();
  for (Index oy = 0; oy < g.oh; ++oy) {
    for (Index ox = 0; ox < g.ow; ++ox) {
      double* row = cols.row(oy * g.ow + ox).data();
      for (Index ky = 0; ky < g.kh; ++ky) {
        const Index iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) continue;
        for (Index kx = 0; kx < g.kw; ++kx) {
          const Index ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.w) continue;
          std::copy_n(src + (iy * g.w + ix) * g.cin, g.cin, row + (ky * g.kw + kx) * g.cin);
        }
      }
    }
  }
  return cols;
}

Vector col2im(const RowMatrix& cols, const ConvGeometry& g) {
  Vector out = Vector::Zero(g.h * g.w * g.cin);
  for (Index oy = 0; oy < g.oh; ++oy) {
    for (Index ox = 0; ox < g.ow; ++ox) {
      const double* row = cols.row(oy * g.ow + ox).data();
      for (Index ky = 0; ky < g.kh; ++ky) {
        const Index iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) continue;
        for (Index kx = 0; kx < g.kw; ++kx) {
          const Index ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.w) continue;
          double* dst = out.data() + (iy * g.w + ix) * g.cin;
          const double* s = row + (ky * g.kw + kx) * g.cin;
          for (Index c = 0; c < g.cin; ++c) dst[c] += s[c];
        }
      }
    }
  }
  return out;
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride, int pad) {
  require_rank(input, 3, "conv2d");
  require_rank(kernel, 4, "conv2d");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (pad < 0) throw ConfigError("conv2d: padding must be >= 0");
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), k.dim(0), k.dim(1), k.dim(3), 0, 0, stride, pad};
  if (k.dim(2) != g.cin)
    throw ConfigError("conv2d: kernel expects " + std::to_string(k.dim(2)) + " input channels, input has " +
                      std::to_string(g.cin));
  if (bias.value().size() != g.cout) throw ConfigError("conv2d: bias length must equal output channels");
  if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad)
    throw ConfigError("conv2d: kernel " + shape_string(k.shape()) + " exceeds padded input " +
                      shape_string(x.shape()));
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;

  RowMatrix cols = im2col(x, g);
  const ConstRowMap kmat(k.data().data(), g.kh * g.kw * g.cin, g.cout);
  Tensor out({g.oh, g.ow, g.cout});
  RowMap omat(out.data().data(), g.oh * g.ow, g.cout);
  omat.noalias() = cols * kmat;
  omat.rowwise() += bias.value().data().transpose();

  Var in = input, ker = kernel, b = bias;
  return input.tape().record(
      std::move(out), {input, kernel, bias},
      [in, ker, b, g, cols = std::move(cols)](Tape& tape, const Vector& up) {
        const ConstRowMap dout(up.data(), g.oh * g.ow, g.cout);
        if (tape.requires_grad(ker)) {
          RowMatrix dk = cols.transpose() * dout;
          tape.add_grad(ker, Eigen::Map<const Vector>(dk.data(), dk.size()));
        }
        if (tape.requires_grad(b)) tape.add_grad(b, dout.colwise().sum().transpose());
        if (tape.requires_grad(in)) {
          const ConstRowMap kmat(ker.value().data().data(), g.kh * g.kw * g.cin, g.cout);
          RowMatrix dcols = dout * kmat.transpose();
          tape.add_grad(in, col2im(dcols, g));
        }
      },
      "conv2d");
}

Var dense(const Var& input, const Var& weights, const Var& bias) {
  require_rank(weights, 2, "dense");
  const Tensor& w = weights.value();
  const Index m = w.dim(0), k = w.dim(1);
  if (input.value().size() != m)
    throw ConfigError("dense: input length " + std::to_string(input.value().size()) + " does not match weights " +
                      shape_string(w.shape()));
  if (bias.value().size() != k) throw ConfigError("dense: bias length must equal output width");
  const ConstRowMap wmat(w.data().data(), m, k);
  Tensor out({k});
  out.data().noalias() = wmat.transpose() * input.value().data();
  out.data() += bias.value().data();

  Var in = input, wv = weights, b = bias;
  return input.tape().record(
      std::move(out), {input, weights, bias},
      [in, wv, b, m, k](Tape& tape, const Vector& up) {
        const ConstRowMap wmat(wv.value().data().data(), m, k);
        if (tape.requires_grad(wv)) {
          RowMatrix dw = in.value().data() * up.transpose();
          tape.add_grad(wv, Eigen::Map<const Vector>(dw.data(), dw.size()));
        }
        if (tape.requires_grad(b)) tape.add_grad(b, up);
        if (tape.requires_grad(in)) tape.add_grad(in, wmat * up);
      },
      "dense");
}

double sigmoid_value(double x) {
  // Clamped so the result stays strictly inside (0, 1) in double precision.
  static const double lo = std::numeric_limits<double>::min();
  static const double hi = std::nextafter(1.0, 0.0);
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, lo, hi);
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  out.data() = x.value().data().unaryExpr([](double v) { return sigmoid_value(v); });
  Var in = x;
  Vector y = out.data();
  return x.tape().record(
      std::move(out), {x},
      [in, y = std::move(y)](Tape& tape, const Vector& up) {
        tape.add_grad(in, (up.array() * y.array() * (1.0 - y.array())).matrix());
      },
      "sigmoid");
}

Var relu(const Var& x) {
  const Vector& v = x.value().data();
  Tensor out(x.shape());
  out.data() = v.cwiseMax(0.0);
  if (v.size() > 0) x.tape().note_kink(v.cwiseAbs().minCoeff());
  Var in = x;
  return x.tape().record(
      std::move(out), {x},
      [in](Tape& tape, const Vector& up) {
        const Vector& v = in.value().data();
        tape.add_grad(in, (v.array() > 0.0).select(up, 0.0));
      },
      "relu");
}

Var activation(Activation kind, const Var& x) {
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::relu:
      return relu(x);
  }
  throw ConfigError("activation: unknown kind");
}

Var max_pool2d(const Var& x, int window, int stride) {
  require_rank(x, 3, "max_pool2d");
  const Tensor& v = x.value();
  const Index h = v.dim(0), w = v.dim(1), c = v.dim(2);
  if (window < 1 || stride < 1) throw ConfigError("max_pool2d: window and stride must be >= 1");
  if (window > h || window > w) throw ConfigError("max_pool2d: window exceeds spatial extent");
  const Index oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  Tensor out({oh, ow, c});
  std::vector<Index> argmax(static_cast<std::size_t>(oh * ow * c));
  double margin = std::numeric_limits<double>::infinity();
  for (Index oy = 0; oy < oh; ++oy)
    for (Index ox = 0; ox < ow; ++ox)
      for (Index ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        double second = best;
        Index best_idx = -1;
        for (Index ky = 0; ky < window; ++ky)
          for (Index kx = 0; kx < window; ++kx) {
            const Index idx = ((oy * stride + ky) * w + (ox * stride + kx)) * c + ch;
            const double val = v[idx];
            if (val > best) {
              second = best;
              best = val;
              best_idx = idx;
            } else if (val > second) {
              second = val;
            }
          }
        const Index o = (oy * ow + ox) * c + ch;
        out[o] = best;
        argmax[static_cast<std::size_t>(o)] = best_idx;
        if (window * window > 1) margin = std::min(margin, best - second);
      }
  x.tape().note_kink(margin);
  Var in = x;
  return x.tape().record(
      std::move(out), {x},
      [in, argmax = std::move(argmax)](Tape& tape, const Vector& up) {
        Vector g = Vector::Zero(in.value().size());
        for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += up[static_cast<Index>(o)];
        tape.add_grad(in, g);
      },
      "max_pool2d");
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 3, "global_avg_pool");
  const Tensor& v = x.value();
  const Index hw = v.dim(0) * v.dim(1), c = v.dim(2);
  const ConstRowMap m(v.data().data(), hw, c);
  Tensor out({1, 1, c});
  out.data() = m.colwise().mean().transpose();
  Var in = x;
  return x.tape().record(
      std::move(out), {x},
      [in, hw, c](Tape& tape, const Vector& up) {
        RowMatrix g = (up.transpose() / static_cast<double>(hw)).replicate(hw, 1);
        tape.add_grad(in, Eigen::Map<const Vector>(g.data(), hw * c));
      },
      "global_avg_pool");
}

Var pool2d(PoolKind kind, const Var& x, int window, int stride) {
  switch (kind) {
    case PoolKind::max:
      return max_pool2d(x, window, stride);
    case PoolKind::global_avg:
      return global_avg_pool(x);
  }
  throw ConfigError("pool2d: unknown kind");
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  out.data() = a.value().data().cwiseProduct(b.value().data());
  Var va = a, vb = b;
  return a.tape().record(
      std::move(out), {a, b},
      [va, vb](Tape& tape, const Vector& up) {
        tape.add_grad(va, up.cwiseProduct(vb.value().data()));
        tape.add_grad(vb, up.cwiseProduct(va.value().data()));
      },
      "hadamard");
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), a.value().data() + b.value().data());
  Var va = a, vb = b;
  return a.tape().record(
      std::move(out), {a, b},
      [va, vb](Tape& tape, const Vector& up) {
        tape.add_grad(va, up);
        tape.add_grad(vb, up);
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), a.value().data() - b.value().data());
  Var va = a, vb = b;
  return a.tape().record(
      std::move(out), {a, b},
      [va, vb](Tape& tape, const Vector& up) {
        tape.add_grad(va, up);
        tape.add_grad(vb, -up);
      },
      "sub");
}

Var scale(const Var& x, double factor) {
  Tensor out(x.shape(), x.value().data() * factor);
  Var in = x;
  return x.tape().record(
      std::move(out), {x}, [in, factor](Tape& tape, const Vector& up) { tape.add_grad(in, up * factor); },
      "scale");
}

Var sum(const Var& x) {
  Tensor out({1}, {x.value().data().sum()});
  Var in = x;
  return x.tape().record(
      std::move(out), {x},
      [in](Tape& tape, const Vector& up) { tape.add_grad(in, Vector::Constant(in.value().size(), up[0])); },
      "sum");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  Var in = x;
  return x.tape().record(
      std::move(out), {x}, [in](Tape& tape, const Vector& up) { tape.add_grad(in, up); }, "reshape");
}

Var broadcast_to(const Var& x, const Shape& shape) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || shape.size() != 3)
    throw ConfigError("broadcast_to: rank-3 source and target required, got " + shape_string(v.shape()) + " -> " +
                      shape_string(shape));
  for (std::size_t a = 0; a < 3; ++a)
    if (v.shape()[a] != 1 && v.shape()[a] != shape[a])
      throw ConfigError("broadcast_to: cannot broadcast " + shape_string(v.shape()) + " to " + shape_string(shape));
  const Index sh = v.dim(0), sw = v.dim(1), sc = v.dim(2);
  const Index h = shape[0], w = shape[1], c = shape[2];
  auto src_index = [=](Index y, Index xx, Index ch) {
    return ((sh == 1 ? 0 : y) * sw + (sw == 1 ? 0 : xx)) * sc + (sc == 1 ? 0 : ch);
  };
  Tensor out(shape);
  for (Index y = 0; y < h; ++y)
    for (Index xx = 0; xx < w; ++xx)
      for (Index ch = 0; ch < c; ++ch) out[(y * w + xx) * c + ch] = v[src_index(y, xx, ch)];
  Var in = x;
  return x.tape().record(
      std::move(out), {x},
      [in, h, w, c, src_index](Tape& tape, const Vector& up) {
        Vector g = Vector::Zero(in.value().size());
        for (Index y = 0; y < h; ++y)
          for (Index xx = 0; xx < w; ++xx)
            for (Index ch = 0; ch < c; ++ch) g[src_index(y, xx, ch)] += up[(y * w + xx) * c + ch];
        tape.add_grad(in, g);
      },
      "broadcast_to");
}

namespace {
void require_list(std::span<const Var> xs, const char* op) {
  if (xs.empty()) throw ConfigError(std::string(op) + ": at least one operand required");
  for (const Var& x : xs) require_same_shape(xs.front(), x, op);
}
}  // namespace

Var sum_n(std::span<const Var> xs) {
  require_list(xs, "sum_n");
  Tensor out(xs.front().shape());
  for (const Var& x : xs) out.data() += x.value().data();
  std::vector<Var> ins(xs.begin(), xs.end());
  return xs.front().tape().record(
      std::move(out), ins,
      [ins](Tape& tape, const Vector& up) {
        for (const Var& x : ins) tape.add_grad(x, up);
      },
      "sum_n");
}

Var mean_n(std::span<const Var> xs) {
  require_list(xs, "mean_n");
  const double inv = 1.0 / static_cast<double>(xs.size());
  Tensor out(xs.front().shape());
  for (const Var& x : xs) out.data() += x.value().data();
  out.data() *= inv;
  std::vector<Var> ins(xs.begin(), xs.end());
  return xs.front().tape().record(
      std::move(out), ins,
      [ins, inv](Tape& tape, const Vector& up) {
        for (const Var& x : ins) tape.add_grad(x, up * inv);
      },
      "mean_n");
}

Var max_n(std::span<const Var> xs) {
  require_list(xs, "max_n");
  const Index size = xs.front().value().size();
  Tensor out = xs.front().value();
  out.requires_grad = false;
  std::vector<int> winner(static_cast<std::size_t>(size), 0);
  Vector second = Vector::Constant(size, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Vector& v = xs[k].value().data();
    for (Index i = 0; i < size; ++i) {
      if (v[i] > out[i]) {
        second[i] = out[i];
        out[i] = v[i];
        winner[static_cast<std::size_t>(i)] = static_cast<int>(k);
      } else if (v[i] > second[i]) {
        second[i] = v[i];
      }
    }
  }
  if (xs.size() > 1) xs.front().tape().note_kink((out.data() - second).minCoeff());
  std::vector<Var> ins(xs.begin(), xs.end());
  return xs.front().tape().record(
      std::move(out), ins,
      [ins, winner = std::move(winner), size](Tape& tape, const Vector& up) {
        for (std::size_t k = 0; k < ins.size(); ++k) {
          if (!tape.requires_grad(ins[k])) continue;
          Vector g = Vector::Zero(size);
          for (Index i = 0; i < size; ++i)
            if (winner[static_cast<std::size_t>(i)] == static_cast<int>(k)) g[i] = up[i];
          tape.add_grad(ins[k], g);
        }
      },
      "max_n");
}

Var l2_normalize(const Var& x) {
  const double norm = x.value().data().norm();
  if (!(norm > kNormEpsilon))
    throw DegenerateInputError("l2_normalize: input norm " + std::to_string(norm) + " is below 1e-12");
  Tensor out(x.shape(), x.value().data() / norm);
  Var in = x;
  Vector y = out.data();
  return x.tape().record(
      std::move(out), {x},
      [in, y = std::move(y), norm](Tape& tape, const Vector& up) {
        tape.add_grad(in, (up - y * y.dot(up)) / norm);
      },
      "l2_normalize");
}

Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Var softmax_cross_entropy(const Var& logits, Index label) {
  const Vector& z = logits.value().data();
  if (label < 0 || label >= z.size())
    throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                      std::to_string(z.size()) + ")");
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  Tensor out({1}, {lse - z[label]});
  Vector p = softmax(z);
  Var in = logits;
  return logits.tape().record(
      std::move(out), {logits},
      [in, p = std::move(p), label](Tape& tape, const Vector& up) {
        Vector g = p;
        g[label] -= 1.0;
        tape.add_grad(in, g * up[0]);
      },
      "softmax_cross_entropy");
}

}  // namespace vdn::ad
