// Copyright 2026 The bert4rec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bert4rec/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bert4rec/errors.hpp"

namespace bert4rec {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using Storage = std::shared_ptr<TensorData>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

std::vector<double>& grad_of(TensorData& t) {
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  return t.grad;
}

ConstMatrixMap cmap(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap map(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t m = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  const bool record = should_record({&a, &b});
  Tensor out = Tensor::zeros(out_shape, record);
  auto& c = out.storage()->values;
  map(c, m, n).noalias() = cmap(a.storage()->values, m, k) * cmap(b.storage()->values, k, n);
  if (record) {
    Storage sa = a.storage(), sb = b.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("matmul", out, [sa, sb, so, m, k, n] {
      auto dc = cmap(so->grad, m, n);
      if (sa->requires_grad) map(grad_of(*sa), m, k).noalias() += dc * cmap(sb->values, k, n).transpose();
      if (sb->requires_grad) map(grad_of(*sb), k, n).noalias() += cmap(sa->values, m, k).transpose() * dc;
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: cannot multiply " + shape_str(a.shape()) + " by transpose of " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  const bool record = should_record({&a, &b});
  Tensor out = Tensor::zeros({m, n}, record);
  map(out.storage()->values, m, n).noalias() =
      cmap(a.storage()->values, m, k) * cmap(b.storage()->values, n, k).transpose();
  if (record) {
    Storage sa = a.storage(), sb = b.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("matmul_nt", out, [sa, sb, so, m, k, n] {
      auto dc = cmap(so->grad, m, n);
      if (sa->requires_grad) map(grad_of(*sa), m, k).noalias() += dc * cmap(sb->values, n, k);
      if (sb->requires_grad) map(grad_of(*sb), n, k).noalias() += dc.transpose() * cmap(sa->values, m, k);
    });
  }
  return out;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw DimensionError("batched_matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         (transpose_b ? "transpose of " : "") + shape_str(b.shape()));
  }
  const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const bool record = should_record({&a, &b});
  Tensor out = Tensor::zeros({g, m, n}, record);
  const double* pa = a.storage()->values.data();
  const double* pb = b.storage()->values.data();
  double* pc = out.storage()->values.data();
  const auto em = static_cast<Eigen::Index>(m), ek = static_cast<Eigen::Index>(k),
             en = static_cast<Eigen::Index>(n);
  for (std::size_t i = 0; i < g; ++i) {
    ConstMatrixMap A(pa + i * m * k, em, ek);
    MatrixMap C(pc + i * m * n, em, en);
    if (transpose_b) {
      C.noalias() = A * ConstMatrixMap(pb + i * n * k, en, ek).transpose();
    } else {
      C.noalias() = A * ConstMatrixMap(pb + i * k * n, ek, en);
    }
  }
  if (record) {
    Storage sa = a.storage(), sb = b.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("batched_matmul", out, [sa, sb, so, g, em, ek, en, transpose_b] {
      double* da = sa->requires_grad ? grad_of(*sa).data() : nullptr;
      double* db = sb->requires_grad ? grad_of(*sb).data() : nullptr;
      const std::size_t sz_a = static_cast<std::size_t>(em * ek);
      const std::size_t sz_b = static_cast<std::size_t>(ek * en);
      const std::size_t sz_c = static_cast<std::size_t>(em * en);
      for (std::size_t i = 0; i < g; ++i) {
        ConstMatrixMap dC(so->grad.data() + i * sz_c, em, en);
        ConstMatrixMap A(sa->values.data() + i * sz_a, em, ek);
        if (transpose_b) {
          ConstMatrixMap B(sb->values.data() + i * sz_b, en, ek);
          if (da) MatrixMap(da + i * sz_a, em, ek).noalias() += dC * B;
          if (db) MatrixMap(db + i * sz_b, en, ek).noalias() += dC.transpose() * A;
        } else {
          ConstMatrixMap B(sb->values.data() + i * sz_b, ek, en);
          if (da) MatrixMap(da + i * sz_a, em, ek).noalias() += dC * B.transpose();
          if (db) MatrixMap(db + i * sz_b, ek, en).noalias() += A.transpose() * dC;
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const bool record = should_record({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), record);
  auto& o = out.storage()->values;
  const auto& va = a.storage()->values;
  const auto& vb = b.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = va[i] + vb[i];
  if (record) {
    Storage sa = a.storage(), sb = b.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("add", out, [sa, sb, so] {
      for (Storage s : {sa, sb}) {
        if (!s->requires_grad) continue;
        auto& g = grad_of(*s);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i];
      }
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || x.rank() < 1 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  const bool record = should_record({&x, &bias});
  Tensor out = Tensor::zeros(x.shape(), record);
  auto& o = out.storage()->values;
  const auto& vx = x.storage()->values;
  const auto& vb = bias.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = vx[i] + vb[i % n];
  if (record) {
    Storage sx = x.storage(), sb = bias.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("add_bias", out, [sx, sb, so, n] {
      if (sx->requires_grad) {
        auto& g = grad_of(*sx);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i];
      }
      if (sb->requires_grad) {
        auto& g = grad_of(*sb);
        for (std::size_t i = 0; i < so->grad.size(); ++i) g[i % n] += so->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const bool record = should_record({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), record);
  auto& o = out.storage()->values;
  const auto& va = a.storage()->values;
  const auto& vb = b.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = va[i] * vb[i];
  if (record) {
    Storage sa = a.storage(), sb = b.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("mul", out, [sa, sb, so] {
      if (sa->requires_grad) {
        auto& g = grad_of(*sa);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i] * sb->values[i];
      }
      if (sb->requires_grad) {
        auto& g = grad_of(*sb);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i] * sa->values[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  const bool record = should_record({&x});
  Tensor out = Tensor::zeros(x.shape(), record);
  auto& o = out.storage()->values;
  const auto& vx = x.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = vx[i] * factor;
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("scale", out, [sx, so, factor] {
      auto& g = grad_of(*sx);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i] * factor;
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const bool record = should_record({&x});
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total, record);
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("sum", out, [sx, so] {
      auto& g = grad_of(*sx);
      for (double& gi : g) gi += so->grad[0];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const bool record = should_record({&x});
  Tensor out = Tensor::from(std::move(shape), x.storage()->values, record);
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("reshape", out, [sx, so] {
      auto& g = grad_of(*sx);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i];
    });
  }
  return out;
}

Tensor permute(const Tensor& x, std::span<const std::size_t> axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for tensor " + shape_str(x.shape()));
  }
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.dim(axes[i]);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.dim(i);

  // source[j] = flat input index feeding flat output index j
  const std::size_t n = x.numel();
  auto source = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> index(rank, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += index[i] * in_strides[axes[i]];
    (*source)[j] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++index[i] < out_shape[i]) break;
      index[i] = 0;
    }
  }
  const bool record = should_record({&x});
  Tensor out = Tensor::zeros(out_shape, record);
  auto& o = out.storage()->values;
  const auto& vx = x.storage()->values;
  for (std::size_t j = 0; j < n; ++j) o[j] = vx[(*source)[j]];
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("permute", out, [sx, so, source] {
      auto& g = grad_of(*sx);
      for (std::size_t j = 0; j < source->size(); ++j) g[(*source)[j]] += so->grad[j];
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  if (x.rank() != 2 || begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_str(x.shape()));
  }
  const std::size_t cols = x.dim(1);
  const bool record = should_record({&x});
  const auto& vx = x.storage()->values;
  std::vector<double> values(vx.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                             vx.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
  Tensor out = Tensor::from({count, cols}, std::move(values), record);
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("slice_rows", out, [sx, so, begin, cols] {
      auto& g = grad_of(*sx);
      for (std::size_t i = 0; i < so->grad.size(); ++i) g[begin * cols + i] += so->grad[i];
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding_lookup: table must be a matrix, got " + shape_str(table.shape()));
  const std::size_t rows = table.dim(0), d = table.dim(1);
  for (std::size_t id : ids) {
    if (id >= rows) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for table with " +
                       std::to_string(rows) + " rows");
    }
  }
  const bool record = should_record({&table});
  Tensor out = Tensor::zeros({ids.size(), d}, record);
  auto& o = out.storage()->values;
  const auto& vt = table.storage()->values;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(vt.begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d, o.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  if (record) {
    Storage st = table.storage();
    TensorData* so = out.storage().get();
    auto kept = std::make_shared<std::vector<std::size_t>>(ids.begin(), ids.end());
    Tape::active()->record("embedding_lookup", out, [st, so, kept, d] {
      auto& g = grad_of(*st);
      for (std::size_t r = 0; r < kept->size(); ++r) {
        const std::size_t base = (*kept)[r] * d;
        for (std::size_t c = 0; c < d; ++c) g[base + c] += so->grad[r * d + c];
      }
    });
  }
  return out;
}

Tensor softmax_masked(const Tensor& logits, const Tensor& additive_mask) {
  if (logits.rank() < 1) throw DimensionError("softmax_masked: logits must have rank >= 1");
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.numel() / n;
  std::size_t mask_rows = 0;
  if (additive_mask.defined()) {
    const Shape& ls = logits.shape();
    const Shape& ms = additive_mask.shape();
    if (ms.size() > ls.size() || !std::equal(ms.begin(), ms.end(), ls.end() - static_cast<std::ptrdiff_t>(ms.size()))) {
      throw DimensionError("softmax_masked: mask " + shape_str(ms) + " is not a suffix of logits " + shape_str(ls));
    }
    mask_rows = additive_mask.numel() / n;
  }
  const bool record = should_record({&logits});
  Tensor out = Tensor::zeros(logits.shape(), record);
  auto& p = out.storage()->values;
  const auto& z = logits.storage()->values;
  const double* mask = additive_mask.defined() ? additive_mask.storage()->values.data() : nullptr;
  std::vector<double> shifted(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * n;
    const double* mr = mask ? mask + (r % mask_rows) * n : nullptr;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      shifted[j] = mr ? zr[j] + mr[j] : zr[j];
      peak = std::max(peak, shifted[j]);
    }
    if (!std::isfinite(peak)) {
      throw ContractError("softmax_masked: row " + std::to_string(r) + " has no allowed (finite) entry");
    }
    double total = 0.0;
    double* pr = p.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) {
      pr[j] = std::exp(shifted[j] - peak);
      total += pr[j];
    }
    for (std::size_t j = 0; j < n; ++j) pr[j] /= total;
  }
  if (record) {
    Storage sz = logits.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("softmax_masked", out, [sz, so, rows, n] {
      auto& g = grad_of(*sz);
      const auto& pv = so->values;
      const auto& go = so->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += pv[r * n + j] * go[r * n + j];
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += pv[r * n + j] * (go[r * n + j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1 || gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != x.shape().back() ||
      bias.dim(0) != x.shape().back()) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                         " do not match " + shape_str(x.shape()));
  }
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const bool record = should_record({&x, &gain, &bias});
  Tensor out = Tensor::zeros(x.shape(), record);
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& vx = x.storage()->values;
  const auto& vg = gain.storage()->values;
  const auto& vb = bias.storage()->values;
  auto& o = out.storage()->values;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = vx.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * is;
      (*xhat)[r * d + j] = h;
      o[r * d + j] = vg[j] * h + vb[j];
    }
  }
  if (record) {
    Storage sx = x.storage(), sg = gain.storage(), sb = bias.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("layer_norm", out, [sx, sg, sb, so, xhat, inv_std, rows, d] {
      const auto& go = so->grad;
      if (sg->requires_grad) {
        auto& g = grad_of(*sg);
        for (std::size_t i = 0; i < go.size(); ++i) g[i % d] += go[i] * (*xhat)[i];
      }
      if (sb->requires_grad) {
        auto& g = grad_of(*sb);
        for (std::size_t i = 0; i < go.size(); ++i) g[i % d] += go[i];
      }
      if (sx->requires_grad) {
        auto& g = grad_of(*sx);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = go[r * d + j] * sg->values[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * (*xhat)[r * d + j];
          }
          mean_d /= static_cast<double>(d);
          mean_dx /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            g[r * d + j] += (*inv_std)[r] * (dxhat[j] - mean_d - (*xhat)[r * d + j] * mean_dx);
          }
        }
      }
    });
  }
  return out;
}

double gelu_scalar(double x) { return x * 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  const bool record = should_record({&x});
  Tensor out = Tensor::zeros(x.shape(), record);
  auto& o = out.storage()->values;
  const auto& vx = x.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = gelu_scalar(vx[i]);
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("gelu", out, [sx, so] {
      auto& g = grad_of(*sx);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i] * gelu_derivative(sx->values[i]);
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw ContractError("dropout: training mode requires a generator");
  auto keep = std::make_shared<std::vector<double>>(x.numel());
  const double kept_scale = 1.0 / (1.0 - p);
  for (double& k : *keep) k = rng->uniform() >= p ? kept_scale : 0.0;
  const bool record = should_record({&x});
  Tensor out = Tensor::zeros(x.shape(), record);
  auto& o = out.storage()->values;
  const auto& vx = x.storage()->values;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = vx[i] * (*keep)[i];
  if (record) {
    Storage sx = x.storage();
    TensorData* so = out.storage().get();
    Tape::active()->record("dropout", out, [sx, so, keep] {
      auto& g = grad_of(*sx);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += so->grad[i] * (*keep)[i];
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = logits.dim(0), v = logits.dim(1);
  for (std::size_t label : labels) {
    if (label >= v) throw IndexError("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
  }
  const auto& z = logits.storage()->values;
  auto probs = std::make_shared<std::vector<double>>(z.size());
  double total = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const double* zr = z.data() + r * v;
    const double peak = *std::max_element(zr, zr + v);
    double denom = 0.0;
    for (std::size_t j = 0; j < v; ++j) denom += std::exp(zr[j] - peak);
    for (std::size_t j = 0; j < v; ++j) (*probs)[r * v + j] = std::exp(zr[j] - peak) / denom;
    total += std::log(denom) + peak - zr[labels[r]];
  }
  const bool record = should_record({&logits});
  Tensor out = Tensor::scalar(total / static_cast<double>(k), record);
  if (record) {
    Storage sz = logits.storage();
    TensorData* so = out.storage().get();
    auto kept = std::make_shared<std::vector<std::size_t>>(labels.begin(), labels.end());
    Tape::active()->record("softmax_cross_entropy", out, [sz, so, probs, kept, k, v] {
      auto& g = grad_of(*sz);
      const double upstream = so->grad[0] / static_cast<double>(k);
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t j = 0; j < v; ++j) g[r * v + j] += upstream * (*probs)[r * v + j];
        g[r * v + (*kept)[r]] -= upstream;
      }
    });
  }
  return out;
}

double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> inputs, double step) {
  std::vector<Tensor> handles(inputs.begin(), inputs.end());
  for (Tensor& t : handles) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = f();
    }
    backward(loss, tape);
  }
  double worst = 0.0;
  for (Tensor& t : handles) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = f().item();
      values[i] = saved - step;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace bert4rec
