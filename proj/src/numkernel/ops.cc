#include "cbert/numkernel/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cbert/common/errors.h"

namespace cbert::nk {
namespace {

using detail::Node;

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

void require_rank_at_least(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() < rank) {
    throw DimensionError(std::string(op) + ": expected rank >= " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

// Applies an elementwise map whose derivative can be written in terms of the
// input and the output.
template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& a = parent(self, 0);
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * df(a.data[i], self.data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank_at_least(a, 2, "matmul");
  if (b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t k_dim = b.dim(0);
  const std::size_t n_dim = b.dim(1);
  const std::size_t rows = a.numel() / k_dim;
  std::vector<double> out(rows * n_dim, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* orow = out.data() + r * n_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double av = ad[r * k_dim + k];
      const double* brow = bd.data() + k * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) orow[n] += av * brow[n];
    }
  }
  Shape shape = a.shape();
  shape.back() = n_dim;
  return Tensor::make_result(std::move(shape), std::move(out), {a, b},
                             [rows, k_dim, n_dim](Node& self) {
    Node& a = parent(self, 0);
    Node& b = parent(self, 1);
    const double* g = self.grad.data();
    if (a.requires_grad) {
      auto& ga = a.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = g + r * n_dim;
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double* brow = b.data.data() + k * n_dim;
          double acc = 0.0;
          for (std::size_t n = 0; n < n_dim; ++n) acc += grow[n] * brow[n];
          ga[r * k_dim + k] += acc;
        }
      }
    }
    if (b.requires_grad) {
      auto& gb = b.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = g + r * n_dim;
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double av = a.data[r * k_dim + k];
          double* gbrow = gb.data() + k * n_dim;
          for (std::size_t n = 0; n < n_dim; ++n) gbrow[n] += av * grow[n];
        }
      }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("bmm: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), m_dim = a.dim(1), k_dim = a.dim(2), n_dim = b.dim(2);
  std::vector<double> out(batch * m_dim * n_dim, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t s = 0; s < batch; ++s) {
    const double* abase = ad.data() + s * m_dim * k_dim;
    const double* bbase = bd.data() + s * k_dim * n_dim;
    double* obase = out.data() + s * m_dim * n_dim;
    for (std::size_t m = 0; m < m_dim; ++m) {
      for (std::size_t k = 0; k < k_dim; ++k) {
        const double av = abase[m * k_dim + k];
        const double* brow = bbase + k * n_dim;
        double* orow = obase + m * n_dim;
        for (std::size_t n = 0; n < n_dim; ++n) orow[n] += av * brow[n];
      }
    }
  }
  return Tensor::make_result({batch, m_dim, n_dim}, std::move(out), {a, b},
                             [batch, m_dim, k_dim, n_dim](Node& self) {
    Node& a = parent(self, 0);
    Node& b = parent(self, 1);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* g = self.grad.data() + s * m_dim * n_dim;
      const double* abase = a.data.data() + s * m_dim * k_dim;
      const double* bbase = b.data.data() + s * k_dim * n_dim;
      if (a.requires_grad) {
        double* ga = a.ensure_grad().data() + s * m_dim * k_dim;
        for (std::size_t m = 0; m < m_dim; ++m) {
          for (std::size_t k = 0; k < k_dim; ++k) {
            double acc = 0.0;
            for (std::size_t n = 0; n < n_dim; ++n) acc += g[m * n_dim + n] * bbase[k * n_dim + n];
            ga[m * k_dim + k] += acc;
          }
        }
      }
      if (b.requires_grad) {
        double* gb = b.ensure_grad().data() + s * k_dim * n_dim;
        for (std::size_t m = 0; m < m_dim; ++m) {
          for (std::size_t k = 0; k < k_dim; ++k) {
            const double av = abase[m * k_dim + k];
            for (std::size_t n = 0; n < n_dim; ++n) gb[k * n_dim + n] += av * g[m * n_dim + n];
          }
        }
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_rank_at_least(x, 2, "transpose");
  const std::size_t rows = x.dim(x.rank() - 2);
  const std::size_t cols = x.dim(x.rank() - 1);
  const std::size_t batch = x.numel() / (rows * cols);
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t base = s * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[base + c * rows + r] = in[base + r * cols + c];
    }
  }
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [batch, rows, cols](Node& self) {
    Node& a = parent(self, 0);
    auto& ga = a.ensure_grad();
    for (std::size_t s = 0; s < batch; ++s) {
      const std::size_t base = s * rows * cols;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) ga[base + r * cols + c] += self.grad[base + c * rows + r];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    Node& a = parent(self, 0);
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      const double sign = p == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& a = parent(self, 0);
    Node& b = parent(self, 1);
    if (a.requires_grad) {
      auto& g = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.data[i];
    }
    if (b.requires_grad) {
      auto& g = b.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * factor;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.numel());
  auto xd = x.data();
  auto bd = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + bd[i % n];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    Node& a = parent(self, 0);
    Node& b = parent(self, 1);
    if (a.requires_grad) {
      auto& g = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad) {
      auto& g = b.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const Shape& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  std::vector<double> out(x.numel(), 0.0);
  auto in = x.data();
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      double peak = neg_inf;
      for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, in[base + i * inner]);
      if (peak == neg_inf) continue;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = in[base + i * inner];
        const double e = v == neg_inf ? 0.0 : std::exp(v - peak);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= total;
    }
  }
  return Tensor::make_result(shape, std::move(out), {x}, [outer, inner, n](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += self.grad[base + i * inner] * self.data[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = base + i * inner;
          g[k] += self.data[k] * (self.grad[k] - dot);
        }
      }
    }
  });
}

CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const std::size_t rows = logits.dim(0);
  const std::size_t vocab = logits.dim(1);
  std::size_t count = 0;
  for (int t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    ++count;
  }
  auto in = logits.data();
  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const double* row = in.data() + r * vocab;
    const double peak = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - peak);
    const double log_z = peak + std::log(z);
    total += log_z - row[targets[r]];
    for (std::size_t v = 0; v < vocab; ++v) probs[r * vocab + v] = std::exp(row[v] - log_z);
  }
  const double mean = count == 0 ? 0.0 : total / static_cast<double>(count);
  std::vector<int> kept(targets.begin(), targets.end());
  Tensor loss = Tensor::make_result(
      {1}, {mean}, {logits},
      [probs = std::move(probs), kept = std::move(kept), count, vocab, ignore_id](Node& self) {
        if (count == 0) return;
        auto& g = parent(self, 0).ensure_grad();
        const double coeff = self.grad[0] / static_cast<double>(count);
        for (std::size_t r = 0; r < kept.size(); ++r) {
          if (kept[r] == ignore_id) continue;
          for (std::size_t v = 0; v < vocab; ++v) g[r * vocab + v] += coeff * probs[r * vocab + v];
          g[r * vocab + static_cast<std::size_t>(kept[r])] -= coeff;
        }
      });
  return {loss, count};
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t h = x.shape().back();
  if (h < 2) throw ParameterError("layer_norm: last axis must have at least 2 entries");
  if (gain.rank() != 1 || gain.dim(0) != h || bias.rank() != 1 || bias.dim(0) != h) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / h;
  std::vector<double> out(x.numel());
  std::vector<double> normed(x.numel());
  std::vector<double> rstd(rows);
  auto in = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * h;
    double mean = 0.0;
    for (std::size_t i = 0; i < h; ++i) mean += row[i];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t i = 0; i < h; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= static_cast<double>(h);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < h; ++i) {
      const double xhat = (row[i] - mean) * rstd[r];
      normed[r * h + i] = xhat;
      out[r * h + i] = xhat * gd[i] + bd[i];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [normed = std::move(normed), rstd = std::move(rstd), rows, h](Node& self) {
        Node& xn = parent(self, 0);
        Node& gn = parent(self, 1);
        Node& bn = parent(self, 2);
        if (gn.requires_grad || bn.requires_grad) {
          auto& gg = gn.ensure_grad();
          auto& gb = bn.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < h; ++i) {
              gg[i] += self.grad[r * h + i] * normed[r * h + i];
              gb[i] += self.grad[r * h + i];
            }
          }
        }
        if (!xn.requires_grad) return;
        auto& gx = xn.ensure_grad();
        const double inv_h = 1.0 / static_cast<double>(h);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t i = 0; i < h; ++i) {
            const double d = self.grad[r * h + i] * gn.data[i];
            mean_d += d;
            mean_dx += d * normed[r * h + i];
          }
          mean_d *= inv_h;
          mean_dx *= inv_h;
          for (std::size_t i = 0; i < h; ++i) {
            const double d = self.grad[r * h + i] * gn.data[i];
            gx[r * h + i] += rstd[r] * (d - mean_d - normed[r * h + i] * mean_dx);
          }
        }
      });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw DimensionError("embedding_lookup: table must be 2-D, got " + shape_str(table.shape()));
  const std::size_t rows = table.dim(0);
  const std::size_t h = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " outside [0, " +
                       std::to_string(rows) + ")");
    }
  }
  if (ids.empty()) throw DimensionError("embedding_lookup: no ids");
  std::vector<double> out(ids.size() * h);
  auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * h, h, out.data() + i * h);
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return Tensor::make_result({ids.size(), h}, std::move(out), {table},
                             [kept = std::move(kept), h](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      double* dst = g.data() + static_cast<std::size_t>(kept[i]) * h;
      const double* src = self.grad.data() + i * h;
      for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
    }
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factors(x.numel());
  for (double& f : factors) f = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * factors[i];
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factors = std::move(factors)](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factors[i];
  });
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t length) {
  const std::size_t width = x.shape().back();
  if (length == 0 || start + length > width) {
    throw DimensionError("slice_last: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") outside " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / width;
  std::vector<double> out(rows * length);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.data() + r * width + start, length, out.data() + r * length);
  }
  Shape shape = x.shape();
  shape.back() = length;
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [rows, width, start, length](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < length; ++i) g[r * width + start + i] += self.grad[r * length + i];
    }
  });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape pl = p.shape();
    const std::size_t w = pl.back();
    pl.pop_back();
    if (pl != lead) {
      throw DimensionError("concat_last: " + shape_str(p.shape()) + " incompatible with " +
                           shape_str(parts[0].shape()));
    }
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto in = parts[p].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(in.data() + r * widths[p], widths[p], out.data() + r * total + offset);
    }
    offset += widths[p];
  }
  Shape shape = lead;
  shape.push_back(total);
  return Tensor::make_result(std::move(shape), std::move(out), parts, [widths, rows, total](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      Node& in = parent(self, p);
      if (in.requires_grad) {
        auto& g = in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < widths[p]; ++i) g[r * widths[p] + i] += self.grad[r * total + offset + i];
        }
      }
      offset += widths[p];
    }
  });
}

Tensor time_step(const Tensor& x, std::size_t t) {
  if (x.rank() != 3 || t >= x.dim(1)) {
    throw DimensionError("time_step: step " + std::to_string(t) + " outside " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1), e = x.dim(2);
  std::vector<double> out(batch * e);
  auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(in.data() + (b * steps + t) * e, e, out.data() + b * e);
  return Tensor::make_result({batch, e}, std::move(out), {x}, [batch, steps, e, t](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < e; ++i) g[(b * steps + t) * e + i] += self.grad[b * e + i];
    }
  });
}

Tensor unfold_windows(const Tensor& x, std::size_t width) {
  if (x.rank() != 3 || width == 0 || width > x.dim(1)) {
    throw DimensionError("unfold_windows: width " + std::to_string(width) + " does not fit " +
                         shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1), e = x.dim(2);
  const std::size_t windows = steps - width + 1;
  const std::size_t span = width * e;
  std::vector<double> out(batch * windows * span);
  auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < windows; ++j) {
      std::copy_n(in.data() + (b * steps + j) * e, span, out.data() + (b * windows + j) * span);
    }
  }
  return Tensor::make_result({batch, windows, span}, std::move(out), {x},
                             [batch, steps, e, windows, span](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < windows; ++j) {
        double* dst = g.data() + (b * steps + j) * e;
        const double* src = self.grad.data() + (b * windows + j) * span;
        for (std::size_t i = 0; i < span; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor max_over_time(const Tensor& x, std::span<const std::uint8_t> valid) {
  if (x.rank() != 3 || valid.size() != x.dim(0) * x.dim(1)) {
    throw DimensionError("max_over_time: mask of " + std::to_string(valid.size()) + " flags for " +
                         shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1), f = x.dim(2);
  std::vector<double> out(batch * f);
  std::vector<std::size_t> arg(batch * f);
  auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < steps; ++t) any = any || valid[b * steps + t];
    if (!any) throw DimensionError("max_over_time: row " + std::to_string(b) + " has no valid position");
    for (std::size_t c = 0; c < f; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_t = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        if (!valid[b * steps + t]) continue;
        const double v = in[(b * steps + t) * f + c];
        if (v > best) {
          best = v;
          best_t = t;
        }
      }
      out[b * f + c] = best;
      arg[b * f + c] = best_t;
    }
  }
  return Tensor::make_result({batch, f}, std::move(out), {x}, [arg = std::move(arg), steps, f](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < arg.size(); ++i) {
      const std::size_t b = i / f, c = i % f;
      g[(b * steps + arg[i]) * f + c] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1}, {total}, {x}, [](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

}  // namespace cbert::nk
