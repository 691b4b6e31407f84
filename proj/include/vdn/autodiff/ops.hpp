#pragma once

#include "vdn/autodiff/tape.hpp"

#include <span>
#include <vector>

namespace vdn::ad {

enum class Activation { sigmoid, relu };
enum class PoolKind { max, global_avg };

/// Cross-correlation of an h x w x cin input with a kh x kw x cin x cout
/// kernel. Output is h' x w' x cout with h' = (h + 2 pad - kh) / stride + 1.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride, int pad);

/// out[j] = sum_i in[i] W[i, j] + b[j]; the input is read flattened.
Var dense(const Var& input, const Var& weights, const Var& bias);

Var activation(Activation kind, const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);

/// Max pooling routes the gradient to the first maximum in row-major window
/// order. Global average pooling ignores window/stride and returns 1 x 1 x c.
Var pool2d(PoolKind kind, const Var& x, int window = 0, int stride = 0);
Var max_pool2d(const Var& x, int window, int stride);
Var global_avg_pool(const Var& x);

Var hadamard(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var sum(const Var& x);
Var reshape(const Var& x, Shape shape);

/// Broadcasts a rank-3 tensor along its unit dimensions to `shape`
/// (e.g. 1x1xc -> hxwxc, hxwx1 -> hxwxc, 1x1x1 -> hxwxc).
Var broadcast_to(const Var& x, const Shape& shape);

// Elementwise reductions across a list of equally shaped tensors.
Var sum_n(std::span<const Var> xs);
Var mean_n(std::span<const Var> xs);
Var max_n(std::span<const Var> xs);

/// x / ||x||_2. Throws DegenerateInputError when ||x|| <= 1e-12.
Var l2_normalize(const Var& x);

/// -log softmax(logits)[label], stabilized by max subtraction.
Var softmax_cross_entropy(const Var& logits, Index label);

inline constexpr double kNormEpsilon = 1e-12;

// Plain-value helpers shared with tests and inference code.
double sigmoid_value(double x);
Vector softmax(const Vector& logits);

}  // namespace vdn::ad
