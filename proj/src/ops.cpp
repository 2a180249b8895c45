#include "abm/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace abm::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;

template <typename T>
MapC<T> mat(const Tensor<T>& t) {
  return MapC<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
Map<T> mat(Tensor<T>& t) {
  return Map<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::span<const int> ids) {
  const Tensor<T>& tab = g.value(table);
  const std::size_t width = tab.cols();
  const std::size_t height = tab.rows();
  Tensor<T> out(matrix_shape(ids.size(), width));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= height)
      throw ContractError("embedding id out of range: " + std::to_string(ids[i]));
    std::copy_n(tab.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * width),
                width, out.data.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return g.emplace(std::move(out), {table}, [table, rows = std::move(rows), width](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dt = g.grad(table);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t base = static_cast<std::size_t>(rows[i]) * width;
      for (std::size_t j = 0; j < width; ++j) dt.data[base + j] += dy.data[i * width + j];
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require(x.size() == y.size(), "add: shape mismatch " + shape_string(x.shape) + " vs " + shape_string(y.shape));
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  return g.emplace(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor<T>& d = g.grad(v);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i];
    }
  });
}

template <typename T>
Var add_bias(Graph<T>& g, Var x, Var bias) {
  const Tensor<T>& a = g.value(x);
  const Tensor<T>& b = g.value(bias);
  require(b.size() == a.cols(), "add_bias: bias width mismatch");
  Tensor<T> out = a;
  const std::size_t n = a.rows(), m = a.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out.data[r * m + c] += b.data[c];
  return g.emplace(std::move(out), {x, bias}, [x, bias, n, m](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    if (g.requires_grad(x)) {
      Tensor<T>& dx = g.grad(x);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
    }
    if (g.requires_grad(bias)) {
      Tensor<T>& db = g.grad(bias);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) db.data[c] += dy.data[r * m + c];
    }
  });
}

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require(x.cols() == y.rows(), "matmul: inner dimension mismatch " + shape_string(x.shape) +
                                    " x " + shape_string(y.shape));
  Tensor<T> out(matrix_shape(x.rows(), y.cols()));
  mat(out).noalias() = mat(x) * mat(y);
  return g.emplace(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const auto dy = mat(g.grad(self));
    if (g.requires_grad(a)) mat(g.grad(a)).noalias() += dy * mat(g.value(b)).transpose();
    if (g.requires_grad(b)) mat(g.grad(b)).noalias() += mat(g.value(a)).transpose() * dy;
  });
}

template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require(x.cols() == y.cols(), "matmul_nt: inner dimension mismatch");
  Tensor<T> out(matrix_shape(x.rows(), y.rows()));
  mat(out).noalias() = mat(x) * mat(y).transpose();
  return g.emplace(std::move(out), {a, b}, [a, b](Graph<T>& g, Var self) {
    const auto dy = mat(g.grad(self));
    if (g.requires_grad(a)) mat(g.grad(a)).noalias() += dy * mat(g.value(b));
    if (g.requires_grad(b)) mat(g.grad(b)).noalias() += dy.transpose() * mat(g.value(a));
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, double factor) {
  Tensor<T> out = g.value(a);
  const T f = static_cast<T>(factor);
  for (T& v : out.data) v *= f;
  return g.emplace(std::move(out), {a}, [a, f](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(a);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += f * dy.data[i];
  });
}

template <typename T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const std::size_t m = g.value(parts[0]).cols();
  std::size_t n = 0;
  for (Var p : parts) {
    require(g.value(p).cols() == m, "concat_rows: width mismatch");
    n += g.value(p).rows();
  }
  Tensor<T> out(matrix_shape(n, m));
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor<T>& v = g.value(p);
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  return g.emplace(std::move(out), parts, [parts](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t count = g.value(p).size();
      if (g.requires_grad(p)) {
        Tensor<T>& d = g.grad(p);
        for (std::size_t i = 0; i < count; ++i) d.data[i] += dy.data[offset + i];
      }
      offset += count;
    }
  });
}

template <typename T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const std::size_t n = g.value(parts[0]).rows();
  std::size_t m = 0;
  for (Var p : parts) {
    require(g.value(p).rows() == n, "concat_cols: height mismatch");
    m += g.value(p).cols();
  }
  Tensor<T> out(n == 1 && g.value(parts[0]).shape.size() == 1 ? Shape{m} : matrix_shape(n, m));
  std::size_t col = 0;
  for (Var p : parts) {
    const Tensor<T>& v = g.value(p);
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) out.data[r * m + col + c] = v.data[r * w + c];
    col += w;
  }
  return g.emplace(std::move(out), parts, [parts, n, m](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    std::size_t col = 0;
    for (Var p : parts) {
      const std::size_t w = g.value(p).cols();
      if (g.requires_grad(p)) {
        Tensor<T>& d = g.grad(p);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < w; ++c) d.data[r * w + c] += dy.data[r * m + col + c];
      }
      col += w;
    }
  });
}

template <typename T>
Var slice_cols(Graph<T>& g, Var a, std::size_t begin, std::size_t count) {
  const Tensor<T>& x = g.value(a);
  const std::size_t n = x.rows(), m = x.cols();
  require(begin + count <= m, "slice_cols: out of range");
  Tensor<T> out(matrix_shape(n, count));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < count; ++c) out.data[r * count + c] = x.data[r * m + begin + c];
  return g.emplace(std::move(out), {a}, [a, begin, count, n, m](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(a);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < count; ++c) dx.data[r * m + begin + c] += dy.data[r * count + c];
  });
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var weight, Var bias) {
  return add_bias(g, matmul(g, x, weight), bias);
}

template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, double eps) {
  const Tensor<T>& in = g.value(x);
  const Tensor<T>& ga = g.value(gain);
  const Tensor<T>& be = g.value(bias);
  const std::size_t n = in.rows(), m = in.cols();
  require(ga.size() == m && be.size() == m, "layer_norm: parameter width mismatch");
  Tensor<T> out(in.shape);
  std::vector<T> xhat(in.size());
  std::vector<T> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = in.data.data() + r * m;
    T mu = 0;
    for (std::size_t c = 0; c < m; ++c) mu += row[c];
    mu /= static_cast<T>(m);
    T var = 0;
    for (std::size_t c = 0; c < m; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(m);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t c = 0; c < m; ++c) {
      const T h = (row[c] - mu) * is;
      xhat[r * m + c] = h;
      out.data[r * m + c] = ga.data[c] * h + be.data[c];
    }
  }
  return g.emplace(std::move(out), {x, gain, bias},
                   [x, gain, bias, n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    const Tensor<T>& ga = g.value(gain);
    if (g.requires_grad(gain) || g.requires_grad(bias)) {
      Tensor<T>& dg = g.grad(gain);
      Tensor<T>& db = g.grad(bias);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) {
          dg.data[c] += dy.data[r * m + c] * xhat[r * m + c];
          db.data[c] += dy.data[r * m + c];
        }
    }
    if (!g.requires_grad(x)) return;
    Tensor<T>& dx = g.grad(x);
    std::vector<T> dh(m);
    for (std::size_t r = 0; r < n; ++r) {
      T mean_dh = 0, mean_dh_h = 0;
      for (std::size_t c = 0; c < m; ++c) {
        dh[c] = dy.data[r * m + c] * ga.data[c];
        mean_dh += dh[c];
        mean_dh_h += dh[c] * xhat[r * m + c];
      }
      mean_dh /= static_cast<T>(m);
      mean_dh_h /= static_cast<T>(m);
      for (std::size_t c = 0; c < m; ++c)
        dx.data[r * m + c] += inv_std[r] * (dh[c] - mean_dh - xhat[r * m + c] * mean_dh_h);
    }
  });
}

template <typename T>
Var gelu(Graph<T>& g, Var x) {
  const Tensor<T>& in = g.value(x);
  Tensor<T> out(in.shape);
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in.data[i];
    out.data[i] = T(0.5) * v * (T(1) + std::erf(v * static_cast<T>(kInvSqrt2)));
  }
  return g.emplace(std::move(out), {x}, [x](Graph<T>& g, Var self) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    const Tensor<T>& in = g.value(x);
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T v = in.data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * static_cast<T>(kInvSqrt2)));
      const T pdf = static_cast<T>(kInvSqrt2Pi) * std::exp(T(-0.5) * v * v);
      dx.data[i] += dy.data[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  const Tensor<T>& in = g.value(x);
  Tensor<T> out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in.data[i];
    // Branches keep exp from overflowing.
    out.data[i] = v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  return g.emplace(std::move(out), {x}, [x](Graph<T>& g, Var self) {
    const Tensor<T>& y = g.value(self);
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) dx.data[i] += dy.data[i] * y.data[i] * (T(1) - y.data[i]);
  });
}

template <typename T>
Var masked_softmax_rows(Graph<T>& g, Var x, const Mask& key_mask) {
  const Tensor<T>& in = g.value(x);
  const std::size_t n = in.rows(), m = in.cols();
  require(key_mask.empty() || key_mask.size() == m, "masked_softmax_rows: mask width mismatch");
  auto live = [&key_mask](std::size_t c) { return key_mask.empty() || key_mask[c] != 0; };
  Tensor<T> out(in.shape);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = in.data.data() + r * m;
    T* o = out.data.data() + r * m;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < m; ++c)
      if (live(c)) mx = std::max(mx, row[c]);
    if (!std::isfinite(mx)) continue;  // every key masked: row stays zero
    T total = 0;
    for (std::size_t c = 0; c < m; ++c) {
      o[c] = live(c) ? std::exp(row[c] - mx) : T(0);
      total += o[c];
    }
    for (std::size_t c = 0; c < m; ++c) o[c] /= total;
  }
  return g.emplace(std::move(out), {x}, [x, n, m](Graph<T>& g, Var self) {
    const Tensor<T>& y = g.value(self);
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t r = 0; r < n; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < m; ++c) dot += y.data[r * m + c] * dy.data[r * m + c];
      for (std::size_t c = 0; c < m; ++c)
        dx.data[r * m + c] += y.data[r * m + c] * (dy.data[r * m + c] - dot);
    }
  });
}

template <typename T>
Var dropout(Graph<T>& g, Var x, double rate, Rng* rng, bool training) {
  if (!(rate >= 0.0) || rate >= 1.0) throw ContractError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  if (!rng) throw ContractError("dropout in training mode needs an rng");
  const Tensor<T>& in = g.value(x);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(in.size());
  Tensor<T> out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask[i] = rng->bernoulli(rate) ? T(0) : keep_scale;
    out.data[i] = in.data[i] * mask[i];
  }
  return g.emplace(std::move(out), {x}, [x, mask = std::move(mask)](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t i = 0; i < mask.size(); ++i) dx.data[i] += dy.data[i] * mask[i];
  });
}

template <typename T>
Var reduce_max_rows(Graph<T>& g, Var x, const Mask& row_mask) {
  const Tensor<T>& in = g.value(x);
  const std::size_t n = in.rows(), m = in.cols();
  require(row_mask.empty() || row_mask.size() == n, "reduce_max_rows: mask height mismatch");
  std::vector<std::size_t> arg(m, n);
  Tensor<T> out(Shape{m});
  for (std::size_t r = 0; r < n; ++r) {
    if (!row_mask.empty() && !row_mask[r]) continue;
    for (std::size_t c = 0; c < m; ++c) {
      if (arg[c] == n || in.data[r * m + c] > out.data[c]) {
        arg[c] = r;
        out.data[c] = in.data[r * m + c];
      }
    }
  }
  if (m > 0 && arg[0] == n) throw ContractError("reduce_max over an empty sequence");
  return g.emplace(std::move(out), {x}, [x, m, arg = std::move(arg)](Graph<T>& g, Var self) {
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t c = 0; c < m; ++c) dx.data[arg[c] * m + c] += dy.data[c];
  });
}

template <typename T>
Var l2_normalize_rows(Graph<T>& g, Var x) {
  const Tensor<T>& in = g.value(x);
  const std::size_t n = in.rows(), m = in.cols();
  Tensor<T> out(in.shape);
  std::vector<T> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    T ss = 0;
    for (std::size_t c = 0; c < m; ++c) ss += in.data[r * m + c] * in.data[r * m + c];
    if (!(ss > 0)) throw ContractError("cosine similarity of a zero vector");
    norms[r] = std::sqrt(ss);
    for (std::size_t c = 0; c < m; ++c) out.data[r * m + c] = in.data[r * m + c] / norms[r];
  }
  return g.emplace(std::move(out), {x}, [x, n, m, norms = std::move(norms)](Graph<T>& g, Var self) {
    const Tensor<T>& y = g.value(self);
    const Tensor<T>& dy = g.grad(self);
    Tensor<T>& dx = g.grad(x);
    for (std::size_t r = 0; r < n; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < m; ++c) dot += y.data[r * m + c] * dy.data[r * m + c];
      for (std::size_t c = 0; c < m; ++c)
        dx.data[r * m + c] += (dy.data[r * m + c] - y.data[r * m + c] * dot) / norms[r];
    }
  });
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
  T total = 0;
  for (T v : g.value(x).data) total += v;
  return g.emplace(Tensor<T>(Shape{1}, std::vector<T>{total}), {x}, [x](Graph<T>& g, Var self) {
    const T d = g.grad(self).data[0];
    for (T& v : g.grad(x).data) v += d;
  });
}

template <typename T>
Var mean(Graph<T>& g, const std::vector<Var>& scalars) {
  require(!scalars.empty(), "mean of nothing");
  T total = 0;
  for (Var s : scalars) {
    require(g.value(s).size() == 1, "mean expects scalars");
    total += g.value(s).data[0];
  }
  const T inv = T(1) / static_cast<T>(scalars.size());
  return g.emplace(Tensor<T>(Shape{1}, std::vector<T>{total * inv}), scalars,
                   [scalars, inv](Graph<T>& g, Var self) {
    const T d = g.grad(self).data[0] * inv;
    for (Var s : scalars)
      if (g.requires_grad(s)) g.grad(s).data[0] += d;
  });
}

template <typename T>
Var binary_cross_entropy(Graph<T>& g, Var p, int label) {
  require(g.value(p).size() == 1, "binary_cross_entropy expects a scalar probability");
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  const T eps = static_cast<T>(kProbabilityClamp);
  const T raw = g.value(p).data[0];
  const T q = std::clamp(raw, eps, T(1) - eps);
  const T loss = label ? -std::log(q) : -std::log(T(1) - q);
  const bool clamped = q != raw;
  return g.emplace(Tensor<T>(Shape{1}, std::vector<T>{loss}), {p},
                   [p, q, label, clamped](Graph<T>& g, Var self) {
    if (clamped) return;
    const T d = g.grad(self).data[0];
    g.grad(p).data[0] += d * (label ? -T(1) / q : T(1) / (T(1) - q));
  });
}

template <typename T>
Var softmax_cross_entropy_rows(Graph<T>& g, Var logits, std::span<const int> targets) {
  const Tensor<T>& z = g.value(logits);
  const std::size_t n = z.rows(), m = z.cols();
  require(targets.size() == n, "softmax_cross_entropy_rows: one target per row");
  Tensor<T> probs(matrix_shape(n, m));
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= m)
      throw ContractError("target class out of range: " + std::to_string(targets[r]));
    const T* row = z.data.data() + r * m;
    const T mx = *std::max_element(row, row + m);
    T s = 0;
    for (std::size_t c = 0; c < m; ++c) s += std::exp(row[c] - mx);
    const T lse = mx + std::log(s);
    total += lse - row[targets[r]];
    for (std::size_t c = 0; c < m; ++c) probs.data[r * m + c] = std::exp(row[c] - lse);
  }
  const T inv = T(1) / static_cast<T>(n);
  std::vector<int> tg(targets.begin(), targets.end());
  return g.emplace(Tensor<T>(Shape{1}, std::vector<T>{total * inv}), {logits},
                   [logits, probs = std::move(probs), tg = std::move(tg), n, m, inv](Graph<T>& g, Var self) {
    const T d = g.grad(self).data[0] * inv;
    Tensor<T>& dz = g.grad(logits);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c)
        dz.data[r * m + c] += d * (probs.data[r * m + c] - (static_cast<int>(c) == tg[r] ? T(1) : T(0)));
  });
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw ContractError("cosine similarity of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double binary_cross_entropy_value(double p, int label) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

double softmax_cross_entropy_value(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw ContractError("target class out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s) - logits[static_cast<std::size_t>(target)];
}

#define ABM_INSTANTIATE_OPS(T)                                                              \
  template Var gather_rows<T>(Graph<T>&, Var, std::span<const int>);                        \
  template Var add<T>(Graph<T>&, Var, Var);                                                 \
  template Var add_bias<T>(Graph<T>&, Var, Var);                                            \
  template Var matmul<T>(Graph<T>&, Var, Var);                                              \
  template Var matmul_nt<T>(Graph<T>&, Var, Var);                                           \
  template Var scale<T>(Graph<T>&, Var, double);                                            \
  template Var concat_rows<T>(Graph<T>&, const std::vector<Var>&);                          \
  template Var concat_cols<T>(Graph<T>&, const std::vector<Var>&);                          \
  template Var slice_cols<T>(Graph<T>&, Var, std::size_t, std::size_t);                     \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                         \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, double);                             \
  template Var gelu<T>(Graph<T>&, Var);                                                     \
  template Var sigmoid<T>(Graph<T>&, Var);                                                  \
  template Var masked_softmax_rows<T>(Graph<T>&, Var, const Mask&);                         \
  template Var dropout<T>(Graph<T>&, Var, double, Rng*, bool);                              \
  template Var reduce_max_rows<T>(Graph<T>&, Var, const Mask&);                             \
  template Var l2_normalize_rows<T>(Graph<T>&, Var);                                        \
  template Var sum<T>(Graph<T>&, Var);                                                      \
  template Var mean<T>(Graph<T>&, const std::vector<Var>&);                                 \
  template Var binary_cross_entropy<T>(Graph<T>&, Var, int);                                \
  template Var softmax_cross_entropy_rows<T>(Graph<T>&, Var, std::span<const int>);

ABM_INSTANTIATE_OPS(float)
ABM_INSTANTIATE_OPS(double)

}  // namespace abm::nn
