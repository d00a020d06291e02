#pragma once

#include <optional>
#include <vector>

#include "neurodecode/tensor.hpp"

namespace nd {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor gelu(const Tensor& x);
// y = x^p on a scalar tensor.
Tensor pow_scalar(const Tensor& s, double p);
// Broadcast-multiply x by a scalar tensor s.
Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s);
// x: [C x T], b: [C]; adds b[c] to every column.
Tensor add_bias_cols(const Tensor& x, const Tensor& b);
// x: [C x T], v: [C]; scales row c by v[c].
Tensor mul_bias_cols(const Tensor& x, const Tensor& v);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& x);

// Dilated 1-D convolution with "same" zero padding.
// x: [C_in x T], w: [C_out x C_in x K] (K odd), optional bias [C_out].
Tensor conv1d(const Tensor& x, const Tensor& w, std::int64_t dilation,
              const std::optional<Tensor>& bias = std::nullopt);

// Gated linear unit over the channel axis: [2C x T] -> [C x T].
Tensor glu(const Tensor& x);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  void init(std::int64_t channels) {
    running_mean.assign(static_cast<std::size_t>(channels), 0.0);
    running_var.assign(static_cast<std::size_t>(channels), 1.0);
  }
};

// x: [B x C x T]; train mode normalizes by batch statistics and updates the
// running stats, eval mode uses the running stats.
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool train, double momentum = 0.1,
                   double eps = 1e-5);

// Inverted dropout; identity when train is false or p == 0.
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);

// ---- softmax family ----
Tensor softmax_rows(const Tensor& x);  // 1-D, or 2-D along axis 1
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax_rows(const Tensor& x);
// -log softmax(logits)[target]; logits is 1-D.
Tensor cross_entropy_with_logits(const Tensor& logits, std::int64_t target);

// ---- reductions ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// x scaled to unit L2 norm over all entries (eps guards zero norm).
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);
// <a, b> over all entries, shapes must match.
Tensor dot_all(const Tensor& a, const Tensor& b);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, std::int64_t start, std::int64_t len);
Tensor slice_cols(const Tensor& x, std::int64_t start, std::int64_t len);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor reverse_cols(const Tensor& x);
Tensor stack_scalars(const std::vector<Tensor>& xs);  // N scalars -> [N]
Tensor stack_rows(const std::vector<Tensor>& rows);   // M x [N] -> [M x N]
Tensor stack_cols(const std::vector<Tensor>& cols);   // T x [H] -> [H x T]
Tensor diag(const Tensor& x);                         // [N x N] -> [N]

// ---- recurrent ----
struct LstmWeights {
  Tensor w_x;   // [4H x D], gate order i, f, g, o
  Tensor w_h;   // [4H x H]
  Tensor bias;  // [4H]
};
struct LstmState {
  Tensor h;  // [H]
  Tensor c;  // [H]
};
LstmState recurrent_cell(const Tensor& x_t, const LstmState& state,
                         const LstmWeights& w);

void check_finite(const Tensor& x, const char* stage);

}  // namespace nd
