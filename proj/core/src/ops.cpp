#include "neurodecode/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "neurodecode/errors.hpp"

namespace nd {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
}

void accumulate(TensorImpl& p, const std::vector<double>& g) {
  if (!p.requires_grad) return;
  auto& grad = ensure_grad(p);
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    accumulate(*o.node->parents[0], o.grad);
    accumulate(*o.node->parents[1], o.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    accumulate(*o.node->parents[0], o.grad);
    auto& p = *o.node->parents[1];
    if (p.requires_grad) {
      auto& g = ensure_grad(p);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    auto& pa = *o.node->parents[0];
    auto& pb = *o.node->parents[1];
    if (pa.requires_grad) {
      auto& g = ensure_grad(pa);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = ensure_grad(pb);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.data()[i];
  return make_op(x.shape(), std::move(out), {x}, [c](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += c * o.grad[i];
  });
}

Tensor add_const(const Tensor& x, double c) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + c;
  return make_op(x.shape(), std::move(out), {x},
                 [](TensorImpl& o) { accumulate(*o.node->parents[0], o.grad); });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  return make_op(x.shape(), std::move(out), {x}, [](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double y = o.data[i];
      g[i] += o.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh_op(const Tensor& x) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
  return make_op(x.shape(), std::move(out), {x}, [](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double y = o.data[i];
      g[i] += o.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor gelu(const Tensor& x) {
  static constexpr double kInvSqrt2 = 0.7071067811865475244;
  static constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = x.data()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return make_op(x.shape(), std::move(out), {x}, [](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double v = p.data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor pow_scalar(const Tensor& s, double p) {
  if (s.size() != 1) throw ConfigError("pow_scalar: expected scalar, got " + shape_str(s.shape()));
  double y = std::pow(s.data()[0], p);
  return make_op(s.shape(), {y}, {s}, [p, y](TensorImpl& o) {
    auto& ps = *o.node->parents[0];
    if (!ps.requires_grad) return;
    ensure_grad(ps)[0] += o.grad[0] * p * y / ps.data[0];
  });
}

Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw ConfigError("mul_scalar_tensor: scalar expected");
  double c = s.data()[0];
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.data()[i];
  return make_op(x.shape(), std::move(out), {x, s}, [c](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    auto& ps = *o.node->parents[1];
    if (px.requires_grad) {
      auto& g = ensure_grad(px);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += c * o.grad[i];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < o.grad.size(); ++i) acc += o.grad[i] * px.data[i];
      ensure_grad(ps)[0] += acc;
    }
  });
}

Tensor add_bias_cols(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(0) != b.dim(0))
    throw ConfigError("add_bias_cols: shapes " + shape_str(x.shape()) + " and " +
                      shape_str(b.shape()));
  std::int64_t C = x.dim(0), T = x.dim(1);
  std::vector<double> out(x.data().size());
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < T; ++t)
      out[static_cast<std::size_t>(c * T + t)] = x.at2(c, t) + b.at(c);
  return make_op(x.shape(), std::move(out), {x, b}, [C, T](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    auto& pb = *o.node->parents[1];
    accumulate(px, o.grad);
    if (pb.requires_grad) {
      auto& g = ensure_grad(pb);
      for (std::int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < T; ++t) acc += o.grad[static_cast<std::size_t>(c * T + t)];
        g[static_cast<std::size_t>(c)] += acc;
      }
    }
  });
}

Tensor mul_bias_cols(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.rank() != 1 || x.dim(0) != v.dim(0))
    throw ConfigError("mul_bias_cols: shapes " + shape_str(x.shape()) + " and " +
                      shape_str(v.shape()));
  std::int64_t C = x.dim(0), T = x.dim(1);
  std::vector<double> out(x.data().size());
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < T; ++t)
      out[static_cast<std::size_t>(c * T + t)] = x.at2(c, t) * v.at(c);
  return make_op(x.shape(), std::move(out), {x, v}, [C, T](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    auto& pv = *o.node->parents[1];
    if (px.requires_grad) {
      auto& g = ensure_grad(px);
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < T; ++t) {
          auto i = static_cast<std::size_t>(c * T + t);
          g[i] += o.grad[i] * pv.data[static_cast<std::size_t>(c)];
        }
    }
    if (pv.requires_grad) {
      auto& g = ensure_grad(pv);
      for (std::int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
          auto i = static_cast<std::size_t>(c * T + t);
          acc += o.grad[i] * px.data[i];
        }
        g[static_cast<std::size_t>(c)] += acc;
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ConfigError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p) {
      double av = a.at2(i, p);
      if (av == 0.0) continue;
      const double* brow = b.data().data() + p * n;
      double* orow = out.data() + i * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& o) {
    auto& pa = *o.node->parents[0];
    auto& pb = *o.node->parents[1];
    if (pa.requires_grad) {
      auto& g = ensure_grad(pa);  // dA = dC . B^T
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = o.grad.data() + i * n;
          const double* brow = pb.data.data() + p * n;
          for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          g[static_cast<std::size_t>(i * k + p)] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& g = ensure_grad(pb);  // dB = A^T . dC
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
          double av = pa.data[static_cast<std::size_t>(i * k + p)];
          if (av == 0.0) continue;
          const double* grow = o.grad.data() + i * n;
          double* gb = g.data() + p * n;
          for (std::int64_t j = 0; j < n; ++j) gb[j] += av * grow[j];
        }
    }
  });
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw ConfigError("transpose2d: rank-2 tensor required");
  std::int64_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.data().size());
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j * m + i)] = x.at2(i, j);
  return make_op({n, m}, std::move(out), {x}, [m, n](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        g[static_cast<std::size_t>(i * n + j)] += o.grad[static_cast<std::size_t>(j * m + i)];
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, std::int64_t dilation,
              const std::optional<Tensor>& bias) {
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(0))
    throw ConfigError("conv1d: incompatible shapes x=" + shape_str(x.shape()) +
                      " w=" + shape_str(w.shape()));
  std::int64_t K = w.dim(2);
  if (K % 2 == 0) throw ConfigError("conv1d: even kernel size " + std::to_string(K) + " unsupported");
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
  std::int64_t Cin = x.dim(0), T = x.dim(1), Cout = w.dim(0);
  std::int64_t half = K / 2;
  std::vector<double> out(static_cast<std::size_t>(Cout * T), 0.0);
  const auto& xd = x.data();
  const auto& wd = w.data();
  for (std::int64_t o = 0; o < Cout; ++o)
    for (std::int64_t i = 0; i < Cin; ++i) {
      const double* xrow = xd.data() + i * T;
      const double* wrow = wd.data() + (o * Cin + i) * K;
      double* orow = out.data() + o * T;
      for (std::int64_t k = 0; k < K; ++k) {
        double wv = wrow[k];
        if (wv == 0.0) continue;
        std::int64_t off = (k - half) * dilation;
        std::int64_t t0 = std::max<std::int64_t>(0, -off);
        std::int64_t t1 = std::min<std::int64_t>(T, T - off);
        for (std::int64_t t = t0; t < t1; ++t) orow[t] += wv * xrow[t + off];
      }
    }
  if (bias) {
    if (bias->rank() != 1 || bias->dim(0) != Cout)
      throw ConfigError("conv1d: bias shape " + shape_str(bias->shape()));
    for (std::int64_t o = 0; o < Cout; ++o)
      for (std::int64_t t = 0; t < T; ++t)
        out[static_cast<std::size_t>(o * T + t)] += bias->at(o);
  }
  std::vector<Tensor> parents = {x, w};
  if (bias) parents.push_back(*bias);
  bool has_bias = bias.has_value();
  return make_op({Cout, T}, std::move(out), std::move(parents),
                 [Cin, Cout, T, K, half, dilation, has_bias](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    auto& pw = *o.node->parents[1];
    if (px.requires_grad) {
      auto& g = ensure_grad(px);
      for (std::int64_t oc = 0; oc < Cout; ++oc)
        for (std::int64_t i = 0; i < Cin; ++i) {
          const double* wrow = pw.data.data() + (oc * Cin + i) * K;
          const double* grow = o.grad.data() + oc * T;
          double* gx = g.data() + i * T;
          for (std::int64_t k = 0; k < K; ++k) {
            double wv = wrow[k];
            if (wv == 0.0) continue;
            std::int64_t off = (k - half) * dilation;
            std::int64_t t0 = std::max<std::int64_t>(0, -off);
            std::int64_t t1 = std::min<std::int64_t>(T, T - off);
            for (std::int64_t t = t0; t < t1; ++t) gx[t + off] += wv * grow[t];
          }
        }
    }
    if (pw.requires_grad) {
      auto& g = ensure_grad(pw);
      for (std::int64_t oc = 0; oc < Cout; ++oc)
        for (std::int64_t i = 0; i < Cin; ++i) {
          const double* xrow = px.data.data() + i * T;
          const double* grow = o.grad.data() + oc * T;
          double* gw = g.data() + (oc * Cin + i) * K;
          for (std::int64_t k = 0; k < K; ++k) {
            std::int64_t off = (k - half) * dilation;
            std::int64_t t0 = std::max<std::int64_t>(0, -off);
            std::int64_t t1 = std::min<std::int64_t>(T, T - off);
            double acc = 0.0;
            for (std::int64_t t = t0; t < t1; ++t) acc += grow[t] * xrow[t + off];
            gw[k] += acc;
          }
        }
    }
    if (has_bias) {
      auto& pb = *o.node->parents[2];
      if (pb.requires_grad) {
        auto& g = ensure_grad(pb);
        for (std::int64_t oc = 0; oc < Cout; ++oc) {
          double acc = 0.0;
          for (std::int64_t t = 0; t < T; ++t) acc += o.grad[static_cast<std::size_t>(oc * T + t)];
          g[static_cast<std::size_t>(oc)] += acc;
        }
      }
    }
  });
}

Tensor glu(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) % 2 != 0)
    throw ConfigError("glu: channel extent must be even, got " + shape_str(x.shape()));
  std::int64_t C = x.dim(0) / 2, T = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(C * T));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < T; ++t) {
      double a = x.at2(c, t);
      double b = x.at2(C + c, t);
      out[static_cast<std::size_t>(c * T + t)] = a / (1.0 + std::exp(-b)) * 1.0;
    }
  // store sigmoid(b) implicitly via recompute in backward
  return make_op({C, T}, std::move(out), {x}, [C, T](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t t = 0; t < T; ++t) {
        std::size_t ia = static_cast<std::size_t>(c * T + t);
        std::size_t ib = static_cast<std::size_t>((C + c) * T + t);
        double a = p.data[ia];
        double s = 1.0 / (1.0 + std::exp(-p.data[ib]));
        double go = o.grad[ia];
        g[ia] += go * s;
        g[ib] += go * a * s * (1.0 - s);
      }
  });
}

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool train, double momentum, double eps) {
  if (x.rank() != 3) throw ConfigError("batchnorm1d: [B x C x T] tensor required");
  std::int64_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  if (gamma.dim(0) != C || beta.dim(0) != C)
    throw ConfigError("batchnorm1d: gamma/beta must have extent " + std::to_string(C));
  if (static_cast<std::int64_t>(state.running_mean.size()) != C) state.init(C);
  std::int64_t m = B * T;
  if (train && m < 2) throw ConfigError("batchnorm1d: train mode needs B*T >= 2");

  std::vector<double> mean(static_cast<std::size_t>(C)), var(static_cast<std::size_t>(C));
  if (train) {
    for (std::int64_t c = 0; c < C; ++c) {
      double mu = 0.0;
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t t = 0; t < T; ++t) mu += x.at((b * C + c) * T + t);
      mu /= double(m);
      double v = 0.0;
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t t = 0; t < T; ++t) {
          double d = x.at((b * C + c) * T + t) - mu;
          v += d * d;
        }
      v /= double(m);
      mean[static_cast<std::size_t>(c)] = mu;
      var[static_cast<std::size_t>(c)] = v;
      state.running_mean[static_cast<std::size_t>(c)] =
          (1.0 - momentum) * state.running_mean[static_cast<std::size_t>(c)] + momentum * mu;
      state.running_var[static_cast<std::size_t>(c)] =
          (1.0 - momentum) * state.running_var[static_cast<std::size_t>(c)] + momentum * v;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  auto xhat = std::make_shared<std::vector<double>>(x.data().size());
  auto invstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(C));
  for (std::int64_t c = 0; c < C; ++c)
    (*invstd)[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
  std::vector<double> out(x.data().size());
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      double mu = mean[static_cast<std::size_t>(c)];
      double is = (*invstd)[static_cast<std::size_t>(c)];
      double ga = gamma.at(c), be = beta.at(c);
      for (std::int64_t t = 0; t < T; ++t) {
        std::size_t i = static_cast<std::size_t>((b * C + c) * T + t);
        double xh = (x.data()[i] - mu) * is;
        (*xhat)[i] = xh;
        out[i] = ga * xh + be;
      }
    }
  return make_op(x.shape(), std::move(out), {x, gamma, beta},
                 [B, C, T, m, train, xhat, invstd](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    auto& pg = *o.node->parents[1];
    auto& pb = *o.node->parents[2];
    std::vector<double> dgamma(static_cast<std::size_t>(C), 0.0);
    std::vector<double> dbeta(static_cast<std::size_t>(C), 0.0);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < T; ++t) {
          std::size_t i = static_cast<std::size_t>((b * C + c) * T + t);
          dgamma[static_cast<std::size_t>(c)] += o.grad[i] * (*xhat)[i];
          dbeta[static_cast<std::size_t>(c)] += o.grad[i];
        }
    if (pg.requires_grad) accumulate(pg, dgamma);
    if (pb.requires_grad) accumulate(pb, dbeta);
    if (px.requires_grad) {
      auto& g = ensure_grad(px);
      for (std::int64_t c = 0; c < C; ++c) {
        double ga = pg.data[static_cast<std::size_t>(c)];
        double is = (*invstd)[static_cast<std::size_t>(c)];
        if (train) {
          double sum_dxhat = ga * dbeta[static_cast<std::size_t>(c)];
          double sum_dxhat_xhat = ga * dgamma[static_cast<std::size_t>(c)];
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t t = 0; t < T; ++t) {
              std::size_t i = static_cast<std::size_t>((b * C + c) * T + t);
              double dxhat = o.grad[i] * ga;
              g[i] += is / double(m) *
                      (double(m) * dxhat - sum_dxhat - (*xhat)[i] * sum_dxhat_xhat);
            }
        } else {
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t t = 0; t < T; ++t) {
              std::size_t i = static_cast<std::size_t>((b * C + c) * T + t);
              g[i] += o.grad[i] * ga * is;
            }
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  if (!train || p == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.data().size());
  double keep = 1.0 / (1.0 - p);
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double mv = (rng.uniform() < p) ? 0.0 : keep;
    (*mask)[i] = mv;
    out[i] = mv * x.data()[i];
  }
  return make_op(x.shape(), std::move(out), {x}, [mask](TensorImpl& o) {
    auto& px = *o.node->parents[0];
    if (!px.requires_grad) return;
    auto& g = ensure_grad(px);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * (*mask)[i];
  });
}

namespace {

// rows: treats 1-D input as one row.
std::pair<std::int64_t, std::int64_t> row_dims(const Tensor& x) {
  if (x.rank() == 1) return {1, x.dim(0)};
  if (x.rank() == 2) return {x.dim(0), x.dim(1)};
  throw ConfigError("softmax: rank-1 or rank-2 tensor required");
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  auto [R, N] = row_dims(x);
  std::vector<double> out(x.data().size());
  for (std::int64_t r = 0; r < R; ++r) {
    const double* row = x.data().data() + r * N;
    double mx = row[0];
    for (std::int64_t j = 1; j < N; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    double* orow = out.data() + r * N;
    for (std::int64_t j = 0; j < N; ++j) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (std::int64_t j = 0; j < N; ++j) orow[j] /= z;
  }
  return make_op(x.shape(), std::move(out), {x}, [R = R, N = N](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t r = 0; r < R; ++r) {
      const double* y = o.data.data() + r * N;
      const double* gy = o.grad.data() + r * N;
      double dotv = 0.0;
      for (std::int64_t j = 0; j < N; ++j) dotv += gy[j] * y[j];
      double* gx = g.data() + r * N;
      for (std::int64_t j = 0; j < N; ++j) gx[j] += (gy[j] - dotv) * y[j];
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  if (x.rank() == 1) {
    if (axis != 0) throw ConfigError("softmax: axis out of range for rank-1 tensor");
    return softmax_rows(x);
  }
  if (x.rank() != 2) throw ConfigError("softmax: rank-1 or rank-2 tensor required");
  if (axis == 1) return softmax_rows(x);
  if (axis == 0) return transpose2d(softmax_rows(transpose2d(x)));
  throw ConfigError("softmax: axis out of range");
}

Tensor log_softmax_rows(const Tensor& x) {
  auto [R, N] = row_dims(x);
  std::vector<double> out(x.data().size());
  for (std::int64_t r = 0; r < R; ++r) {
    const double* row = x.data().data() + r * N;
    double mx = row[0];
    for (std::int64_t j = 1; j < N; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < N; ++j) z += std::exp(row[j] - mx);
    double lz = mx + std::log(z);
    double* orow = out.data() + r * N;
    for (std::int64_t j = 0; j < N; ++j) orow[j] = row[j] - lz;
  }
  return make_op(x.shape(), std::move(out), {x}, [R = R, N = N](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t r = 0; r < R; ++r) {
      const double* y = o.data.data() + r * N;
      const double* gy = o.grad.data() + r * N;
      double gsum = 0.0;
      for (std::int64_t j = 0; j < N; ++j) gsum += gy[j];
      double* gx = g.data() + r * N;
      for (std::int64_t j = 0; j < N; ++j) gx[j] += gy[j] - std::exp(y[j]) * gsum;
    }
  });
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::int64_t target) {
  if (logits.rank() != 1) throw ConfigError("cross_entropy_with_logits: 1-D logits required");
  if (target < 0 || target >= logits.dim(0))
    throw ConfigError("cross_entropy_with_logits: target index out of range");
  Tensor logp = log_softmax_rows(logits);
  return scale(slice_rows(logp, target, 1), -1.0);
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_op({1}, {acc}, {x}, [](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / double(x.size())); }

Tensor l2_normalize(const Tensor& x, double eps) {
  Tensor sq = sum_all(mul(x, x));
  Tensor inv = pow_scalar(add_const(sq, eps), -0.5);
  return mul_scalar_tensor(x, inv);
}

Tensor dot_all(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot_all");
  return sum_all(mul(a, b));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw ConfigError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                      shape_str(shape));
  return make_op(std::move(shape), x.data(), {x},
                 [](TensorImpl& o) { accumulate(*o.node->parents[0], o.grad); });
}

Tensor slice_rows(const Tensor& x, std::int64_t start, std::int64_t len) {
  std::int64_t R = x.dim(0);
  if (start < 0 || len <= 0 || start + len > R)
    throw ConfigError("slice_rows: range [" + std::to_string(start) + ", " +
                      std::to_string(start + len) + ") out of " + std::to_string(R));
  std::int64_t W = x.size() / R;  // elements per row
  std::vector<double> out(static_cast<std::size_t>(len * W));
  std::memcpy(out.data(), x.data().data() + start * W, sizeof(double) * out.size());
  Shape shape = x.shape();
  shape[0] = len;
  return make_op(std::move(shape), std::move(out), {x}, [start, W](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      g[static_cast<std::size_t>(start * W) + i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::int64_t start, std::int64_t len) {
  if (x.rank() != 2) throw ConfigError("slice_cols: rank-2 tensor required");
  std::int64_t R = x.dim(0), Cc = x.dim(1);
  if (start < 0 || len <= 0 || start + len > Cc) throw ConfigError("slice_cols: range out of bounds");
  std::vector<double> out(static_cast<std::size_t>(R * len));
  for (std::int64_t r = 0; r < R; ++r)
    std::memcpy(out.data() + r * len, x.data().data() + r * Cc + start,
                sizeof(double) * static_cast<std::size_t>(len));
  return make_op({R, len}, std::move(out), {x}, [R, Cc, start, len](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t j = 0; j < len; ++j)
        g[static_cast<std::size_t>(r * Cc + start + j)] += o.grad[static_cast<std::size_t>(r * len + j)];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  std::int64_t W = parts[0].size() / parts[0].dim(0);
  std::int64_t R = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank() || p.size() / p.dim(0) != W)
      throw ConfigError("concat_rows: row widths differ");
    R += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(R * W));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Shape shape = parts[0].shape();
  shape[0] = R;
  return make_op(std::move(shape), std::move(out), parts, [](TensorImpl& o) {
    std::size_t off = 0;
    for (auto& pp : o.node->parents) {
      if (pp->requires_grad) {
        auto& g = ensure_grad(*pp);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[off + i];
      }
      off += pp->data.size();
    }
  });
}

Tensor reverse_cols(const Tensor& x) {
  if (x.rank() != 2) throw ConfigError("reverse_cols: rank-2 tensor required");
  std::int64_t R = x.dim(0), Cc = x.dim(1);
  std::vector<double> out(x.data().size());
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < Cc; ++c)
      out[static_cast<std::size_t>(r * Cc + c)] = x.at2(r, Cc - 1 - c);
  return make_op(x.shape(), std::move(out), {x}, [R, Cc](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t c = 0; c < Cc; ++c)
        g[static_cast<std::size_t>(r * Cc + c)] += o.grad[static_cast<std::size_t>(r * Cc + Cc - 1 - c)];
  });
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ConfigError("stack_scalars: no inputs");
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& t : xs) {
    if (t.size() != 1) throw ConfigError("stack_scalars: non-scalar input");
    out.push_back(t.data()[0]);
  }
  return make_op({static_cast<std::int64_t>(xs.size())}, std::move(out), xs, [](TensorImpl& o) {
    for (std::size_t i = 0; i < o.node->parents.size(); ++i) {
      auto& p = *o.node->parents[i];
      if (p.requires_grad) ensure_grad(p)[0] += o.grad[i];
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ConfigError("stack_rows: no inputs");
  std::int64_t N = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * static_cast<std::size_t>(N));
  for (const auto& r : rows) {
    if (r.size() != N) throw ConfigError("stack_rows: row lengths differ");
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return make_op({static_cast<std::int64_t>(rows.size()), N}, std::move(out), rows,
                 [N](TensorImpl& o) {
    for (std::size_t i = 0; i < o.node->parents.size(); ++i) {
      auto& p = *o.node->parents[i];
      if (!p.requires_grad) continue;
      auto& g = ensure_grad(p);
      for (std::int64_t j = 0; j < N; ++j)
        g[static_cast<std::size_t>(j)] += o.grad[i * static_cast<std::size_t>(N) + static_cast<std::size_t>(j)];
    }
  });
}

Tensor stack_cols(const std::vector<Tensor>& cols) {
  if (cols.empty()) throw ConfigError("stack_cols: no inputs");
  std::int64_t H = cols[0].size();
  std::int64_t T = static_cast<std::int64_t>(cols.size());
  std::vector<double> out(static_cast<std::size_t>(H * T));
  for (std::int64_t t = 0; t < T; ++t) {
    const auto& c = cols[static_cast<std::size_t>(t)];
    if (c.size() != H) throw ConfigError("stack_cols: column lengths differ");
    for (std::int64_t h = 0; h < H; ++h)
      out[static_cast<std::size_t>(h * T + t)] = c.data()[static_cast<std::size_t>(h)];
  }
  return make_op({H, T}, std::move(out), cols, [H, T](TensorImpl& o) {
    for (std::int64_t t = 0; t < T; ++t) {
      auto& p = *o.node->parents[static_cast<std::size_t>(t)];
      if (!p.requires_grad) continue;
      auto& g = ensure_grad(p);
      for (std::int64_t h = 0; h < H; ++h)
        g[static_cast<std::size_t>(h)] += o.grad[static_cast<std::size_t>(h * T + t)];
    }
  });
}

Tensor diag(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != x.dim(1))
    throw ConfigError("diag: square matrix required, got " + shape_str(x.shape()));
  std::int64_t N = x.dim(0);
  std::vector<double> out(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] = x.at2(i, i);
  return make_op({N}, std::move(out), {x}, [N](TensorImpl& o) {
    auto& p = *o.node->parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (std::int64_t i = 0; i < N; ++i)
      g[static_cast<std::size_t>(i * N + i)] += o.grad[static_cast<std::size_t>(i)];
  });
}

LstmState recurrent_cell(const Tensor& x_t, const LstmState& state, const LstmWeights& w) {
  std::int64_t H = state.h.dim(0);
  std::int64_t D = x_t.dim(0);
  if (w.w_x.dim(0) != 4 * H || w.w_x.dim(1) != D || w.w_h.dim(0) != 4 * H ||
      w.w_h.dim(1) != H || w.bias.dim(0) != 4 * H)
    throw ConfigError("recurrent_cell: weight shapes inconsistent with D=" + std::to_string(D) +
                      " H=" + std::to_string(H));
  Tensor xv = reshape(x_t, {D, 1});
  Tensor hv = reshape(state.h, {H, 1});
  Tensor z = reshape(add(matmul(w.w_x, xv), matmul(w.w_h, hv)), {4 * H});
  z = add(z, w.bias);
  Tensor gi = sigmoid(slice_rows(z, 0, H));
  Tensor gf = sigmoid(slice_rows(z, H, H));
  Tensor gg = tanh_op(slice_rows(z, 2 * H, H));
  Tensor go = sigmoid(slice_rows(z, 3 * H, H));
  Tensor c_new = add(mul(gf, state.c), mul(gi, gg));
  Tensor h_new = mul(go, tanh_op(c_new));
  return {h_new, c_new};
}

void check_finite(const Tensor& x, const char* stage) {
  for (double v : x.data())
    if (!std::isfinite(v))
      throw NumericalError(std::string("non-finite value at stage: ") + stage);
}

}  // namespace nd
