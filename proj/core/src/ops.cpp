#include "smartaug/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "smartaug/error.hpp"

namespace smartaug {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + name + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void accumulate(const std::shared_ptr<TensorImpl>& target, std::span<const double> delta) {
  double* g = target->grad.data();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

// Four independent accumulators break the serial add chain; the summation
// order is still fixed, so results stay deterministic.
double sum_of(const double* x, std::size_t n) {
  double a[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) a[l] += x[i + l];
  }
  for (; i < n; ++i) a[0] += x[i];
  return (a[0] + a[1]) + (a[2] + a[3]);
}

double dot_of(const double* x, const double* y, std::size_t n) {
  double a[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) a[l] += x[i + l] * y[i + l];
  }
  for (; i < n; ++i) a[0] += x[i] * y[i];
  return (a[0] + a[1]) + (a[2] + a[3]);
}

double centered_sq_of(const double* x, double mu, std::size_t n) {
  double a[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) a[l] += (x[i + l] - mu) * (x[i + l] - mu);
  }
  for (; i < n; ++i) a[0] += (x[i] - mu) * (x[i] - mu);
  return (a[0] + a[1]) + (a[2] + a[3]);
}

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t f, kh, kw;
  std::size_t pad_h, pad_w;
  std::size_t out_h, out_w;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

// cols[(c*kh+i)*kw+j][oy*out_w + ox] = sample[c][oy+i-pad][ox+j-pad] (0 outside)
void im2col(const ConvGeometry& g, const double* sample, double* cols) {
  const std::size_t positions = g.positions();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    const double* plane = sample + ch * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* dst = cols + ((ch * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_h);
          double* drow = dst + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(drow, drow + g.out_w, 0.0);
            continue;
          }
          const double* srow = plane + static_cast<std::size_t>(y) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox + j) -
                                     static_cast<std::ptrdiff_t>(g.pad_w);
            drow[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : srow[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto one sample.
void col2im(const ConvGeometry& g, const double* cols, double* sample_grad) {
  const std::size_t positions = g.positions();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    double* plane = sample_grad + ch * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* src = cols + ((ch * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_h);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* drow = plane + static_cast<std::size_t>(y) * g.w;
          const double* srow = src + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox + j) -
                                     static_cast<std::ptrdiff_t>(g.pad_w);
            if (x >= 0 && x < static_cast<std::ptrdiff_t>(g.w)) drow[x] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Padding padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weights, 4, "conv2d", "weights");
  require_rank(bias, 1, "conv2d", "bias");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.f = weights.dim(0);
  g.kh = weights.dim(2);
  g.kw = weights.dim(3);
  if (weights.dim(1) != g.c) {
    throw ShapeError("conv2d: weights expect " + std::to_string(weights.dim(1)) +
                     " input channels but input " + shape_to_string(input.shape()) + " has " +
                     std::to_string(g.c));
  }
  if (g.kh % 2 == 0 || g.kw % 2 == 0) {
    throw ShapeError("conv2d: kernel spatial dims must be odd, got " +
                     shape_to_string(weights.shape()));
  }
  if (bias.dim(0) != g.f) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(g.f) + " filters");
  }
  if (padding == Padding::kSame) {
    g.pad_h = g.kh / 2;
    g.pad_w = g.kw / 2;
    g.out_h = g.h;
    g.out_w = g.w;
  } else {
    if (g.kh > g.h || g.kw > g.w) {
      throw ShapeError("conv2d: valid padding with kernel " + shape_to_string(weights.shape()) +
                       " larger than input " + shape_to_string(input.shape()));
    }
    g.pad_h = g.pad_w = 0;
    g.out_h = g.h - g.kh + 1;
    g.out_w = g.w - g.kw + 1;
  }

  // One sample at a time keeps the column buffer cache resident; the NCHW
  // output slice of a sample is exactly the [F, P] GEMM result.
  const std::size_t in_size = g.c * g.h * g.w;
  const std::size_t out_size = g.f * g.positions();
  std::vector<double> out(g.n * out_size);
  RowMatrix cols(g.patch(), g.positions());
  const ConstMatMap wmat(weights.data().data(), g.f, g.patch());
  const auto b = bias.data();
  for (std::size_t s = 0; s < g.n; ++s) {
    im2col(g, input.data().data() + s * in_size, cols.data());
    MatMap dst(out.data() + s * out_size, g.f, g.positions());
    dst.noalias() = wmat * cols;
    for (std::size_t fi = 0; fi < g.f; ++fi) dst.row(fi).array() += b[fi];
  }

  auto in_impl = input.impl();
  auto w_impl = weights.impl();
  auto b_impl = bias.impl();
  return make_result(
      Shape{g.n, g.f, g.out_h, g.out_w}, std::move(out), "conv2d", {input, weights, bias},
      [g, in_impl, w_impl, b_impl](std::span<const double> out_grad) {
        const std::size_t in_size = g.c * g.h * g.w;
        const std::size_t out_size = g.f * g.positions();
        RowMatrix cols(g.patch(), g.positions());
        RowMatrix dcols(g.patch(), g.positions());
        const ConstMatMap wmat(w_impl->data.data(), g.f, g.patch());
        for (std::size_t s = 0; s < g.n; ++s) {
          const ConstMatMap dout(out_grad.data() + s * out_size, g.f, g.positions());
          if (b_impl->requires_grad) {
            for (std::size_t fi = 0; fi < g.f; ++fi) {
              b_impl->grad[fi] += sum_of(dout.data() + fi * g.positions(), g.positions());
            }
          }
          if (w_impl->requires_grad) {
            im2col(g, in_impl->data.data() + s * in_size, cols.data());
            MatMap(w_impl->grad.data(), g.f, g.patch()).noalias() += dout * cols.transpose();
          }
          if (in_impl->requires_grad) {
            dcols.noalias() = wmat.transpose() * dout;
            col2im(g, dcols.data(), in_impl->grad.data() + s * in_size);
          }
        }
      });
}

Tensor maxpool2d(const Tensor& input) {
  require_rank(input, 4, "maxpool2d", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be even; resize the input so height and width are divisible by 2");
  }
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto x = input.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t candidates[4] = {
            base + (2 * oy) * w + 2 * ox, base + (2 * oy) * w + 2 * ox + 1,
            base + (2 * oy + 1) * w + 2 * ox, base + (2 * oy + 1) * w + 2 * ox + 1};
        std::size_t best = candidates[0];
        for (int k = 1; k < 4; ++k) {
          if (x[candidates[k]] > x[best]) best = candidates[k];
        }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = x[best];
        (*argmax)[o] = best;
      }
    }
  }
  auto in_impl = input.impl();
  return make_result(Shape{n, c, oh, ow}, std::move(out), "maxpool2d", {input},
                     [argmax, in_impl](std::span<const double> out_grad) {
                       double* g = in_impl->grad.data();
                       const std::size_t* idx = argmax->data();
                       for (std::size_t o = 0; o < out_grad.size(); ++o) g[idx[o]] += out_grad[o];
                     });
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Mode mode,
                   BatchNormStats& stats, double epsilon) {
  require_rank(input, 4, "batchnorm2d", "input");
  require_rank(gamma, 1, "batchnorm2d", "gamma");
  require_rank(beta, 1, "batchnorm2d", "beta");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.dim(0) != c || beta.dim(0) != c || stats.running_mean.size() != c ||
      stats.running_var.size() != c) {
    throw ShapeError("batchnorm2d: parameters sized for " + std::to_string(gamma.dim(0)) +
                     " channels, input " + shape_to_string(input.shape()));
  }
  const std::size_t m = n * hw;
  if (mode == Mode::kTrain && m < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel, input " +
                     shape_to_string(input.shape()));
  }

  const auto x = input.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> mean(c), inv_std(c);
  if (mode == Mode::kTrain) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += sum_of(x.data() + (i * c + ch) * hw, hw);
      const double mu = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += centered_sq_of(x.data() + (i * c + ch) * hw, mu, hw);
      v /= static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(v + epsilon);
      stats.running_mean[ch] = (1.0 - stats.momentum) * stats.running_mean[ch] + stats.momentum * mu;
      stats.running_var[ch] = (1.0 - stats.momentum) * stats.running_var[ch] + stats.momentum * v;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = stats.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.running_var[ch] + epsilon);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (i * c + ch) * hw;
      const double* xp = x.data() + off;
      double* hp = xhat->data() + off;
      double* op = out.data() + off;
      const double mu = mean[ch], is = inv_std[ch], ga = gm[ch], be = bt[ch];
      for (std::size_t k = 0; k < hw; ++k) {
        const double xh = (xp[k] - mu) * is;
        hp[k] = xh;
        op[k] = ga * xh + be;
      }
    }
  }

  auto in_impl = input.impl();
  auto g_impl = gamma.impl();
  auto b_impl = beta.impl();
  const bool batch_stats = mode == Mode::kTrain;
  return make_result(
      input.shape(), std::move(out), "batchnorm2d", {input, gamma, beta},
      [=](std::span<const double> dy) {
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * hw;
            const double* dp = dy.data() + off;
            const double* hp = xhat->data() + off;
            sum_dy[ch] += sum_of(dp, hw);
            sum_dy_xhat[ch] += dot_of(dp, hp, hw);
          }
        }
        if (g_impl->requires_grad) {
          for (std::size_t ch = 0; ch < c; ++ch) g_impl->grad[ch] += sum_dy_xhat[ch];
        }
        if (b_impl->requires_grad) {
          for (std::size_t ch = 0; ch < c; ++ch) b_impl->grad[ch] += sum_dy[ch];
        }
        if (!in_impl->requires_grad) return;
        const double inv_m = 1.0 / static_cast<double>(m);
        double* g = in_impl->grad.data();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * hw;
            const double gscale = g_impl->data[ch] * inv_std[ch];
            const double* dp = dy.data() + off;
            const double* hp = xhat->data() + off;
            double* gp = g + off;
            if (batch_stats) {
              const double mean_dy = inv_m * sum_dy[ch];
              const double mean_dy_xhat = inv_m * sum_dy_xhat[ch];
              for (std::size_t k = 0; k < hw; ++k) {
                gp[k] += gscale * (dp[k] - mean_dy - hp[k] * mean_dy_xhat);
              }
            } else {
              for (std::size_t k = 0; k < hw; ++k) gp[k] += gscale * dp[k];
            }
          }
        }
      });
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 2, "dense", "input");
  require_rank(weights, 2, "dense", "weights");
  require_rank(bias, 1, "dense", "bias");
  const std::size_t n = input.dim(0), d = input.dim(1), u = weights.dim(1);
  if (weights.dim(0) != d) {
    throw ShapeError("dense: input " + shape_to_string(input.shape()) + " has " +
                     std::to_string(d) + " features but weights " +
                     shape_to_string(weights.shape()) + " expect " +
                     std::to_string(weights.dim(0)));
  }
  if (bias.dim(0) != u) {
    throw ShapeError("dense: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(u) + " units");
  }
  std::vector<double> out(n * u);
  MatMap y(out.data(), n, u);
  y.noalias() = ConstMatMap(input.data().data(), n, d) * ConstMatMap(weights.data().data(), d, u);
  const auto b = bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < u; ++j) out[i * u + j] += b[j];
  }
  auto in_impl = input.impl();
  auto w_impl = weights.impl();
  auto b_impl = bias.impl();
  return make_result(
      Shape{n, u}, std::move(out), "dense", {input, weights, bias},
      [=](std::span<const double> dy) {
        ConstMatMap dout(dy.data(), n, u);
        if (b_impl->requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < u; ++j) b_impl->grad[j] += dy[i * u + j];
          }
        }
        if (w_impl->requires_grad) {
          MatMap(w_impl->grad.data(), d, u).noalias() +=
              ConstMatMap(in_impl->data.data(), n, d).transpose() * dout;
        }
        if (in_impl->requires_grad) {
          MatMap(in_impl->grad.data(), n, d).noalias() +=
              dout * ConstMatMap(w_impl->data.data(), d, u).transpose();
        }
      });
}

Tensor relu(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  auto in_impl = input.impl();
  return make_result(input.shape(), std::move(out), "relu", {input},
                     [in_impl](std::span<const double> dy) {
                       const double* xv = in_impl->data.data();
                       double* g = in_impl->grad.data();
                       for (std::size_t i = 0; i < dy.size(); ++i) g[i] += xv[i] > 0.0 ? dy[i] : 0.0;
                     });
}

Tensor sigmoid(const Tensor& input) {
  const auto x = input.data();
  auto out = std::vector<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split by sign so exp never overflows.
    if (x[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      out[i] = e / (1.0 + e);
    }
  }
  auto saved = std::make_shared<std::vector<double>>(out);
  auto in_impl = input.impl();
  return make_result(input.shape(), std::move(out), "sigmoid", {input},
                     [saved, in_impl](std::span<const double> dy) {
                       for (std::size_t i = 0; i < dy.size(); ++i) {
                         const double s = (*saved)[i];
                         in_impl->grad[i] += dy[i] * s * (1.0 - s);
                       }
                     });
}

Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kInfer || rate == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(input.numel());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double& m : *mask) m = unif(rng) < rate ? 0.0 : keep_scale;
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (*mask)[i];
  auto in_impl = input.impl();
  return make_result(input.shape(), std::move(out), "dropout", {input},
                     [mask, in_impl](std::span<const double> dy) {
                       for (std::size_t i = 0; i < dy.size(); ++i) {
                         in_impl->grad[i] += dy[i] * (*mask)[i];
                       }
                     });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  const auto z = logits.data();
  std::vector<double> p(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[i * k + j] = std::exp(row[j] - mx);
      denom += p[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] /= denom;
  }
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for a batch of " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                              " at position " + std::to_string(i) + " outside [0," +
                              std::to_string(k) + ")");
    }
  }
  const auto z = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    loss += std::log(denom) + mx - row[labels[i]];
  }
  loss /= static_cast<double>(n);
  auto probs = std::make_shared<std::vector<double>>(softmax_rows(logits));
  auto label_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  auto in_impl = logits.impl();
  return make_result(Shape{1}, std::vector<double>{loss}, "softmax_cross_entropy", {logits},
                     [=](std::span<const double> dy) {
                       const double g = dy[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < k; ++j) {
                           const double onehot =
                               static_cast<std::size_t>((*label_copy)[i]) == j ? 1.0 : 0.0;
                           in_impl->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
                         }
                       }
                     });
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  const auto p = prediction.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  const double count = static_cast<double>(p.size());
  auto p_impl = prediction.impl();
  auto t_impl = target.impl();
  return make_result(Shape{1}, std::vector<double>{acc / count}, "mse_loss", {prediction, target},
                     [=](std::span<const double> dy) {
                       const double g = 2.0 * dy[0] / count;
                       for (std::size_t i = 0; i < p_impl->data.size(); ++i) {
                         const double diff = p_impl->data[i] - t_impl->data[i];
                         if (p_impl->requires_grad) p_impl->grad[i] += g * diff;
                         if (t_impl->requires_grad) t_impl->grad[i] -= g * diff;
                       }
                     });
}

Tensor sum(const Tensor& input) {
  const auto x = input.data();
  const double s = sum_of(x.data(), x.size());
  auto in_impl = input.impl();
  return make_result(Shape{1}, std::vector<double>{s}, "sum", {input},
                     [in_impl](std::span<const double> dy) {
                       const double d = dy[0];
                       for (double& g : in_impl->grad) g += d;
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto a_impl = a.impl();
  auto b_impl = b.impl();
  return make_result(a.shape(), std::move(out), "add", {a, b},
                     [a_impl, b_impl](std::span<const double> dy) {
                       if (a_impl->requires_grad) accumulate(a_impl, dy);
                       if (b_impl->requires_grad) accumulate(b_impl, dy);
                     });
}

Tensor scale(const Tensor& input, double factor) {
  std::vector<double> out(input.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input.data()[i] * factor;
  auto in_impl = input.impl();
  return make_result(input.shape(), std::move(out), "scale", {input},
                     [in_impl, factor](std::span<const double> dy) {
                       for (std::size_t i = 0; i < dy.size(); ++i) in_impl->grad[i] += dy[i] * factor;
                     });
}

Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights) {
  if (terms.size() != weights.size() || terms.empty()) {
    throw ShapeError("weighted_sum: need one weight per term and at least one term");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].numel() != 1) {
      throw ShapeError("weighted_sum: terms must be scalars, got " +
                       shape_to_string(terms[i].shape()));
    }
    total += weights[i] * terms[i].item();
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const Tensor& t : terms) impls.push_back(t.impl());
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Shape{1}, std::vector<double>{total}, "weighted_sum",
                     std::vector<Tensor>(terms.begin(), terms.end()),
                     [impls, w](std::span<const double> dy) {
                       for (std::size_t i = 0; i < impls.size(); ++i) {
                         if (impls[i]->requires_grad) impls[i]->grad[0] += w[i] * dy[0];
                       }
                     });
}

Tensor reshape(const Tensor& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(input.shape()) + " as " +
                     shape_to_string(shape));
  }
  auto in_impl = input.impl();
  return make_result(std::move(shape), input.values(), "reshape", {input},
                     [in_impl](std::span<const double> dy) { accumulate(in_impl, dy); });
}

Tensor flatten(const Tensor& input) {
  if (input.rank() < 2) {
    throw ShapeError("flatten: need rank >= 2, got " + shape_to_string(input.shape()));
  }
  const std::size_t n = input.dim(0);
  return reshape(input, Shape{n, input.numel() / n});
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != tail.size() + 1 || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat: trailing dims of " + shape_to_string(p.shape()) +
                       " do not match " + shape_to_string(parts[0].shape()));
    }
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * shape_numel(tail));
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    impls.push_back(p.impl());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return make_result(std::move(shape), std::move(out), "concat",
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     [impls](std::span<const double> dy) {
                       std::size_t offset = 0;
                       for (const auto& impl : impls) {
                         const std::size_t len = impl->data.size();
                         if (impl->requires_grad) accumulate(impl, dy.subspan(offset, len));
                         offset += len;
                       }
                     });
}

}  // namespace smartaug
