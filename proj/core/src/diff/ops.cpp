#include "gsr/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <random>

#include "gsr/rng.hpp"

namespace gsr::diff {

namespace {

// Fixed-order blocked dot product; the independent partial sums vectorize.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

constexpr std::size_t kTile = 32;

// Copies `rows` rows of length `len` into rows of length left+len+right with
// zero padding. kTile extra zeros at the end let tiled loops overrun the last row.
std::vector<double> padded_rows(std::span<const double> src, std::size_t rows, std::size_t len,
                                std::size_t left, std::size_t right) {
  const std::size_t stride = left + len + right;
  std::vector<double> out(rows * stride + kTile, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(src.begin() + static_cast<long>(r * len), src.begin() + static_cast<long>((r + 1) * len),
              out.begin() + static_cast<long>(r * stride + left));
  }
  return out;
}

// Parent grad buffer, or nullptr if that parent does not need one.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const std::vector<double>& parent_data(Node& self, std::size_t i) {
  return self.parents[i]->data;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

struct SquareBlocks {
  std::size_t batch;
  std::size_t n;
};

SquareBlocks square_blocks(const Tensor& a, const char* op) {
  const auto& s = a.shape();
  if (s.size() < 2 || s[s.size() - 1] != s[s.size() - 2]) {
    throw DimensionError(std::string(op) + ": expected trailing square dims, got " +
                         shape_to_string(s));
  }
  const std::size_t n = s.back();
  return {n == 0 ? 0 : a.numel() / (n * n), n};
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Activation f) {
  switch (f) {
    case Activation::elu: return "elu";
    case Activation::elu_plus_one: return "elu_plus_one";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "elu") return Activation::elu;
  if (name == "elu_plus_one") return Activation::elu_plus_one;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  auto fail = [&] {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(sa) + " and " +
                         shape_to_string(sb));
  };
  if (sa.size() < 2 || sa.size() > 3 || sb.size() < 2 || sb.size() > 3) fail();
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t k2 = sb[sb.size() - 2];
  const std::size_t n = sb.back();
  if (k != k2) fail();
  const std::size_t batch_a = sa.size() == 3 ? sa[0] : 1;
  const std::size_t batch_b = sb.size() == 3 ? sb[0] : 1;
  if (sa.size() == 3 && sb.size() == 3 && batch_a != batch_b) fail();
  const std::size_t batch = std::max(batch_a, batch_b);
  const std::size_t stride_a = sa.size() == 3 ? m * k : 0;
  const std::size_t stride_b = sb.size() == 3 ? k * n : 0;

  Shape out_shape = (sa.size() == 3 || sb.size() == 3) ? Shape{batch, m, n} : Shape{m, n};
  std::vector<double> out(batch * m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    const double* as = pa + s * stride_a;
    const double* bs = pb + s * stride_b;
    double* cs = out.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = cs + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = as[i * k + p];
        const double* brow = bs + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }

  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [=](Node& self) {
                       const double* g = self.grad.data();
                       const double* av = parent_data(self, 0).data();
                       const double* bv = parent_data(self, 1).data();
                       double* ga = parent_grad(self, 0);
                       double* gb = parent_grad(self, 1);
                       for (std::size_t s = 0; s < batch; ++s) {
                         const double* gs = g + s * m * n;
                         const double* as = av + s * stride_a;
                         const double* bs = bv + s * stride_b;
                         if (ga) {
                           double* gas = ga + s * stride_a;
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t p = 0; p < k; ++p) {
                               double acc = 0.0;
                               const double* grow = gs + i * n;
                               const double* brow = bs + p * n;
                               for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                               gas[i * k + p] += acc;
                             }
                           }
                         }
                         if (gb) {
                           double* gbs = gb + s * stride_b;
                           for (std::size_t i = 0; i < m; ++i) {
                             const double* grow = gs + i * n;
                             for (std::size_t p = 0; p < k; ++p) {
                               const double aip = as[i * k + p];
                               double* gbrow = gbs + p * n;
                               for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                             }
                           }
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  const auto& s = a.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got " + shape_to_string(s));
  }
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s.back();
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  Shape out_shape = s;
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::vector<double> out(a.numel());
  const double* src = a.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[off + j * rows + i] = src[off + i * cols + j];
  }
  return make_result(std::move(out_shape), std::move(out), {a}, [=](Node& self) {
    double* ga = parent_grad(self, 0);
    const double* g = self.grad.data();
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = b * rows * cols;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) ga[off + i * cols + j] += g[off + j * rows + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* gp = parent_grad(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (double* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = parent_data(self, 0);
    const auto& bv = parent_data(self, 1);
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * bv[i];
    }
    if (double* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * factor;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total}, {a}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     int dilation) {
  if (dilation <= 0) {
    throw ArgumentError("causal_conv1d: dilation must be positive, got " +
                        std::to_string(dilation));
  }
  const auto& sx = x.shape();
  const auto& sk = kernel.shape();
  if (sx.size() != 2 && sx.size() != 3) {
    throw DimensionError("causal_conv1d: input must be [C_in,L] or [B,C_in,L], got " +
                         shape_to_string(sx));
  }
  if (sk.size() != 3 || sk[2] < 1) {
    throw DimensionError("causal_conv1d: kernel must be [C_out,C_in,K>=1], got " +
                         shape_to_string(sk));
  }
  const std::size_t batch = sx.size() == 3 ? sx[0] : 1;
  const std::size_t cin = sx[sx.size() - 2];
  const std::size_t len = sx.back();
  const std::size_t cout = sk[0];
  const std::size_t ksize = sk[2];
  if (sk[1] != cin) {
    throw DimensionError("causal_conv1d: input " + shape_to_string(sx) +
                         " incompatible with kernel " + shape_to_string(sk));
  }
  if (bias.shape() != Shape{cout}) {
    throw DimensionError("causal_conv1d: bias " + shape_to_string(bias.shape()) +
                         " does not match kernel " + shape_to_string(sk));
  }
  const std::size_t dil = static_cast<std::size_t>(dilation);
  const std::size_t pad = (ksize - 1) * dil;
  const std::size_t rows_in = batch * cin;

  // Left-padded copy of x so every tap reads in bounds; zeros stand in for
  // positions before the series start.
  auto xp = std::make_shared<std::vector<double>>(padded_rows(x.data(), rows_in, len, pad, 0));
  const std::size_t xstride = len + pad;

  Shape out_shape = sx.size() == 3 ? Shape{batch, cout, len} : Shape{cout, len};
  std::vector<double> out(batch * cout * len);
  const double* wv = kernel.data().data();
  const double* bv = bias.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* orow = out.data() + (b * cout + co) * len;
      for (std::size_t t0 = 0; t0 < len; t0 += kTile) {
        double acc[kTile];
        for (std::size_t l = 0; l < kTile; ++l) acc[l] = bv[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xr = xp->data() + (b * cin + ci) * xstride + pad + t0;
          const double* wr = wv + (co * cin + ci) * ksize;
          for (std::size_t k = 0; k < ksize; ++k) {
            const double w = wr[k];
            const double* xs = xr - (ksize - 1 - k) * dil;
            for (std::size_t l = 0; l < kTile; ++l) acc[l] += w * xs[l];
          }
        }
        const std::size_t n = std::min(kTile, len - t0);
        std::copy(acc, acc + n, orow + t0);
      }
    }
  }

  return make_result(
      std::move(out_shape), std::move(out), {x, kernel, bias}, [=](Node& self) {
        const double* wd = parent_data(self, 1).data();
        double* gx = parent_grad(self, 0);
        double* gw = parent_grad(self, 1);
        double* gb = parent_grad(self, 2);
        const double* g = self.grad.data();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* grow = g + (b * cout + co) * len;
            if (gb) {
              double acc = 0.0;
              for (std::size_t t = 0; t < len; ++t) acc += grow[t];
              gb[co] += acc;
            }
            if (!gw) continue;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* xr = xp->data() + (b * cin + ci) * xstride + pad;
              const std::size_t woff = (co * cin + ci) * ksize;
              for (std::size_t k = 0; k < ksize; ++k) {
                gw[woff + k] += dot(grow, xr - (ksize - 1 - k) * dil, len);
              }
            }
          }
        }
        if (!gx) return;
        // dx[ci,s] = sum_{co,k} w[co,ci,k] * g[co, s + shift_k], with g
        // right-padded by zeros.
        const std::vector<double> gp = padded_rows(self.grad, batch * cout, len, 0, pad);
        const std::size_t gstride = len + pad;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t ci = 0; ci < cin; ++ci) {
            double* gxrow = gx + (b * cin + ci) * len;
            for (std::size_t s0 = 0; s0 < len; s0 += kTile) {
              double acc[kTile] = {};
              for (std::size_t co = 0; co < cout; ++co) {
                const double* gr = gp.data() + (b * cout + co) * gstride + s0;
                const double* wr = wd + (co * cin + ci) * ksize;
                for (std::size_t k = 0; k < ksize; ++k) {
                  const double w = wr[k];
                  const double* gs = gr + (ksize - 1 - k) * dil;
                  for (std::size_t l = 0; l < kTile; ++l) acc[l] += w * gs[l];
                }
              }
              const std::size_t n = std::min(kTile, len - s0);
              for (std::size_t l = 0; l < n; ++l) gxrow[s0 + l] += acc[l];
            }
          }
        }
      });
}

Tensor pointwise(const Tensor& x, Activation f) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  switch (f) {
    case Activation::elu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = in[i] > 0.0 ? in[i] : std::expm1(in[i]);
      break;
    case Activation::elu_plus_one:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = in[i] > 0.0 ? in[i] + 1.0 : std::exp(in[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_value(in[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
  }
  return make_result(x.shape(), std::move(out), {x}, [f](Node& self) {
    double* gx = parent_grad(self, 0);
    const auto& xin = parent_data(self, 0);
    const auto& y = self.data;
    const auto& g = self.grad;
    switch (f) {
      case Activation::elu:
        for (std::size_t i = 0; i < g.size(); ++i)
          gx[i] += g[i] * (xin[i] > 0.0 ? 1.0 : y[i] + 1.0);
        break;
      case Activation::elu_plus_one:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xin[i] > 0.0 ? 1.0 : y[i]);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xin[i] > 0.0) gx[i] += g[i];
        break;
    }
  });
}

Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed) {
  if (!(p >= 0.0) || p >= 1.0) {
    throw ArgumentError("dropout: p must lie in [0,1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  // Counter-based uniforms: element i keeps iff u(seed, i) >= p.
  const double keep_scale = 1.0 / (1.0 - p);
  const std::uint64_t base = mix_seed(seed);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(mix_seed(base + i) >> 11) * 0x1.0p-53;
    mask[i] = u < p ? 0.0 : keep_scale;
    out[i] = in[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += self.grad[i] * mask[i];
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  if (pred.numel() == 0) throw DimensionError("mse_loss: empty tensors");
  const std::size_t n = pred.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.data()[i] - target.data()[i];
    acc += d * d;
  }
  return make_result({1}, {acc / static_cast<double>(n)}, {pred, target}, [n](Node& self) {
    const auto& pv = parent_data(self, 0);
    const auto& tv = parent_data(self, 1);
    const double c = 2.0 * self.grad[0] / static_cast<double>(n);
    if (double* gp = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) gp[i] += c * (pv[i] - tv[i]);
    }
    if (double* gt = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) gt[i] -= c * (pv[i] - tv[i]);
    }
  });
}

Tensor zero_diagonal(const Tensor& a) {
  const auto [batch, n] = square_blocks(a, "zero_diagonal");
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) out[b * n * n + i * n + i] = 0.0;
  return make_result(a.shape(), std::move(out), {a}, [batch = batch, n = n](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) ga[b * n * n + i * n + j] += self.grad[b * n * n + i * n + j];
  });
}

Tensor symmetrize(const Tensor& a) {
  square_blocks(a, "symmetrize");
  return scale(add(a, transpose(a)), 0.5);
}

Tensor degree_normalize(const Tensor& a) {
  const auto [batch, n] = square_blocks(a, "degree_normalize");
  const double* m = a.data().data();
  // s_i = d_i^{-1/2}, or 1 for rows whose degree is not positive.
  std::vector<double> s(batch * n);
  std::vector<double> degree(batch * n);
  std::vector<double> out(a.numel());
  std::vector<double> row(n);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* mb = m + b * n * n;
    for (std::size_t i = 0; i < n; ++i) {
      // Summing in sorted order makes the degree independent of node order.
      std::copy(mb + i * n, mb + (i + 1) * n, row.begin());
      std::sort(row.begin(), row.end());
      double d = 0.0;
      for (double v : row) d += v;
      degree[b * n + i] = d;
      s[b * n + i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out[b * n * n + i * n + j] = mb[i * n + j] * (s[b * n + i] * s[b * n + j]);
  }
  return make_result(
      a.shape(), std::move(out), {a},
      [batch = batch, n = n, s = std::move(s), degree = std::move(degree)](Node& self) {
        double* ga = parent_grad(self, 0);
        const auto& mv = parent_data(self, 0);
        const auto& g = self.grad;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = b * n * n;
          const double* sb = s.data() + b * n;
          for (std::size_t r = 0; r < n; ++r) {
            // d s_r / d d_r = -1/2 d_r^{-3/2}; d_r depends on every entry of row r.
            double coupling = 0.0;
            if (degree[b * n + r] > 0.0) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[off + r * n + j] * mv[off + r * n + j] * sb[j];
              for (std::size_t i = 0; i < n; ++i) acc += g[off + i * n + r] * mv[off + i * n + r] * sb[i];
              coupling = -0.5 * sb[r] * sb[r] * sb[r] * acc;
            }
            for (std::size_t c = 0; c < n; ++c)
              ga[off + r * n + c] += g[off + r * n + c] * sb[r] * sb[c] + coupling;
          }
        }
      });
}

}  // namespace gsr::diff
