#include "promptdt/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace promptdt {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimension of size 0 in " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  impl_->data.assign(shape_numel(shape), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(data.begin(), data.end());
  impl_->requires_grad = requires_grad;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::ensure_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out;
  if (!impl_) return out;
  out.impl_ = std::make_shared<Impl>(*impl_);
  return out;
}

template <typename T>
void Tape<T>::record(Tensor<T> output, std::function<void(const Tensor<T>&)> pullback) {
  if (!recording_) return;
  nodes_.push_back(Node{std::move(output), std::move(pullback)});
}

template <typename T>
std::size_t Tape<T>::backward(Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any trainable tensor");
  }
  loss.ensure_grad()[0] += T(1);
  std::size_t visited = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    ++visited;
    if (!it->output.has_grad()) continue;  // not on a path to the loss
    it->pullback(it->output);
  }
  return visited;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

namespace ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
MapMat<T> as_mat(std::span<T> s, std::size_t r, std::size_t c) {
  return MapMat<T>(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <typename T>
ConstMapMat<T> as_mat(std::span<const T> s, std::size_t r, std::size_t c) {
  return ConstMapMat<T>(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

template <typename T>
bool tracks(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  for (auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be 2-D, got " + shape_to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul lhs");
  require_2d(b, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  const bool grad = tracks(tape, {&a, &b});
  Tensor<T> out(Shape{m, n}, grad);
  as_mat(out.data(), m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), k, n);
  if (grad) {
    tape.record(out, [a = a, b = b, m, k = k, n](const Tensor<T>& o) mutable {
      auto dout = as_mat(o.grad(), m, n);
      if (a.requires_grad()) {
        as_mat(a.ensure_grad(), m, k).noalias() += dout * as_mat(std::as_const(b).data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        as_mat(b.ensure_grad(), k, n).noalias() += as_mat(std::as_const(a).data(), m, k).transpose() * dout;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t c = x.cols(), r = x.rows();
  if (bias.numel() != c) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match last dimension of " + shape_to_string(x.shape()));
  }
  const bool grad = tracks(tape, {&x, &bias});
  Tensor<T> out(x.shape(), grad);
  as_mat(out.data(), r, c) = as_mat(x.data(), r, c).rowwise() +
                             as_mat(bias.data(), 1, c).row(0);
  if (grad) {
    tape.record(out, [x = x, bias = bias, r, c](const Tensor<T>& o) mutable {
      auto dout = as_mat(o.grad(), r, c);
      if (x.requires_grad()) as_mat(x.ensure_grad(), r, c) += dout;
      if (bias.requires_grad()) as_mat(bias.ensure_grad(), 1, c) += dout.colwise().sum();
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  return add_bias(tape, matmul(tape, x, weight), bias);
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  const bool grad = tracks(tape, {&a, &b});
  Tensor<T> out(a.shape(), grad);
  {
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  }
  if (grad) {
    tape.record(out, [a = a, b = b](const Tensor<T>& o) mutable {
      auto g = o.grad();
      for (Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dst = t->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  const bool grad = tracks(tape, {&a, &b});
  Tensor<T> out(a.shape(), grad);
  {
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  }
  if (grad) {
    tape.record(out, [a = a, b = b](const Tensor<T>& o) mutable {
      auto g = o.grad();
      auto x = std::as_const(a).data();
      auto y = std::as_const(b).data();
      if (a.requires_grad()) {
        auto dst = a.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto dst = b.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  const bool grad = tracks(tape, {&a});
  Tensor<T> out(a.shape(), grad);
  {
    auto o = out.data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  }
  if (grad) {
    tape.record(out, [a = a, factor](const Tensor<T>& o) mutable {
      auto g = o.grad();
      auto dst = a.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  const bool grad = tracks(tape, {&a});
  T total = 0;
  for (T v : a.data()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total, grad);
  if (grad) {
    tape.record(out, [a = a](const Tensor<T>& o) mutable {
      const T g = o.grad()[0];
      for (auto& d : a.ensure_grad()) d += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  const bool grad = tracks(tape, {&x});
  Tensor<T> out(x.shape(), grad);
  {
    auto o = out.data();
    auto in = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
  }
  if (grad) {
    tape.record(out, [x = x](const Tensor<T>& o) mutable {
      auto g = o.grad();
      auto in = std::as_const(x).data();
      auto dst = x.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (in[i] > T(0)) dst[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps) {
  const std::size_t d = x.cols(), r = x.rows();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain " + shape_to_string(gain.shape()) + " / bias " +
                         shape_to_string(bias.shape()) + " do not match last dimension of " +
                         shape_to_string(x.shape()));
  }
  if (!(eps > T(0))) throw ContractError("layer_norm: eps must be positive");
  const bool grad = tracks(tape, {&x, &gain, &bias});
  Tensor<T> out(x.shape(), grad);

  // Normalized activations and inverse std are kept for the pullback.
  auto xhat = std::make_shared<AlignedVector<T>>(grad ? r * d : 0);
  auto inv_std = std::make_shared<AlignedVector<T>>(grad ? r : 0);
  const T* in = x.ptr();
  const T* g = gain.ptr();
  const T* b = bias.ptr();
  T* o = out.ptr();
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = in + i * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T istd = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mean) * istd;
      o[i * d + j] = h * g[j] + b[j];
      if (grad) (*xhat)[i * d + j] = h;
    }
    if (grad) (*inv_std)[i] = istd;
  }

  if (grad) {
    tape.record(out, [x = x, gain = gain, bias = bias, xhat, inv_std, r, d](const Tensor<T>& o) mutable {
      auto dy = o.grad();
      const T* gv = std::as_const(gain).ptr();
      if (gain.requires_grad()) {
        auto dg = gain.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < d; ++j) dg[j] += dy[i * d + j] * (*xhat)[i * d + j];
      }
      if (bias.requires_grad()) {
        auto db = bias.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < d; ++j) db[j] += dy[i * d + j];
      }
      if (x.requires_grad()) {
        auto dx = x.ensure_grad();
        const T inv_d = T(1) / static_cast<T>(d);
        for (std::size_t i = 0; i < r; ++i) {
          T mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const T dh = dy[i * d + j] * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * (*xhat)[i * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          const T istd = (*inv_std)[i];
          for (std::size_t j = 0; j < d; ++j) {
            const T dh = dy[i * d + j] * gv[j];
            dx[i * d + j] += istd * (dh - mean_dh - (*xhat)[i * d + j] * mean_dh_h);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> causal_attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, const PaddingMask& mask, std::size_t n_heads) {
  require_2d(q, "attention q");
  require_same_shape(q, k, "attention q/k");
  require_same_shape(q, v, "attention q/v");
  const std::size_t L = mask.length, B = mask.batch, d = q.dim(1);
  if (B * L != q.dim(0) || mask.padded.size() != B * L) {
    throw DimensionError("attention: mask " + std::to_string(B) + "x" + std::to_string(L) +
                         " does not cover q " + shape_to_string(q.shape()));
  }
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
  }
  const std::size_t dh = d / n_heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  const bool grad = tracks(tape, {&q, &k, &v});
  Tensor<T> out(q.shape(), grad);

  using Stride = Eigen::OuterStride<>;
  using Block = Eigen::Map<RowMat<T>, 0, Stride>;
  using ConstBlock = Eigen::Map<const RowMat<T>, 0, Stride>;
  const auto Li = static_cast<Eigen::Index>(L);
  const auto dhi = static_cast<Eigen::Index>(dh);
  const Stride stride(static_cast<Eigen::Index>(d));

  // Attention probabilities per (sequence, head), zero where masked.
  auto probs = std::make_shared<AlignedVector<T>>(B * n_heads * L * L, T(0));
  RowMat<T> scores(Li, Li);
  for (std::size_t b = 0; b < B; ++b) {
    const std::uint8_t* pad = mask.padded.data() + b * L;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t off = b * L * d + h * dh;
      ConstBlock Q(q.ptr() + off, Li, dhi, stride);
      ConstBlock K(k.ptr() + off, Li, dhi, stride);
      ConstBlock V(v.ptr() + off, Li, dhi, stride);
      Block O(out.ptr() + off, Li, dhi, stride);
      scores.noalias() = Q * K.transpose();
      MapMat<T> P(probs->data() + (b * n_heads + h) * L * L, Li, Li);
      for (std::size_t i = 0; i < L; ++i) {
        if (pad[i]) continue;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          if (!pad[j]) mx = std::max(mx, scores(i, j) * inv_sqrt);
        }
        T denom = 0;
        for (std::size_t j = 0; j <= i; ++j) {
          if (pad[j]) continue;
          const T e = std::exp(scores(i, j) * inv_sqrt - mx);
          P(i, j) = e;
          denom += e;
        }
        const T inv = T(1) / denom;
        for (std::size_t j = 0; j <= i; ++j) P(i, j) *= inv;
      }
      O.noalias() = P * V;
    }
  }

  if (grad) {
    tape.record(out, [q = q, k = k, v = v, probs, B, L, d, dh, n_heads, inv_sqrt](const Tensor<T>& o) mutable {
      const auto Li = static_cast<Eigen::Index>(L);
      const auto dhi = static_cast<Eigen::Index>(dh);
      const Stride stride(static_cast<Eigen::Index>(d));
      T* dq = q.requires_grad() ? q.ensure_grad().data() : nullptr;
      T* dk = k.requires_grad() ? k.ensure_grad().data() : nullptr;
      T* dv = v.requires_grad() ? v.ensure_grad().data() : nullptr;
      RowMat<T> dP(Li, Li), dS(Li, Li);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < n_heads; ++h) {
          const std::size_t off = b * L * d + h * dh;
          ConstBlock Q(std::as_const(q).ptr() + off, Li, dhi, stride);
          ConstBlock K(std::as_const(k).ptr() + off, Li, dhi, stride);
          ConstBlock V(std::as_const(v).ptr() + off, Li, dhi, stride);
          ConstBlock dO(o.grad().data() + off, Li, dhi, stride);
          ConstMapMat<T> P(probs->data() + (b * n_heads + h) * L * L, Li, Li);
          if (dv) {
            Block dV(dv + off, Li, dhi, stride);
            dV.noalias() += P.transpose() * dO;
          }
          if (!dq && !dk) continue;
          dP.noalias() = dO * V.transpose();
          // Softmax pullback row by row: dS = P * (dP - <dP, P>).
          for (Eigen::Index i = 0; i < Li; ++i) {
            const T dot = (dP.row(i).array() * P.row(i).array()).sum();
            dS.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)) * inv_sqrt;
          }
          if (dq) {
            Block dQ(dq + off, Li, dhi, stride);
            dQ.noalias() += dS * K;
          }
          if (dk) {
            Block dK(dk + off, Li, dhi, stride);
            dK.noalias() += dS.transpose() * Q;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::int64_t> index) {
  const std::size_t c = x.cols(), r = x.rows();
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  for (auto idx : index) {
    if (idx < -1 || idx >= static_cast<std::int64_t>(r)) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) + " outside [0, " +
                           std::to_string(r) + ")");
    }
  }
  const bool grad = tracks(tape, {&x});
  Tensor<T> out(Shape{index.size(), c}, grad);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    std::memcpy(out.ptr() + i * c, x.ptr() + static_cast<std::size_t>(index[i]) * c, c * sizeof(T));
  }
  if (grad) {
    tape.record(out, [x = x, idx = std::vector<std::int64_t>(index.begin(), index.end()), c](
                         const Tensor<T>& o) mutable {
      auto g = o.grad();
      auto dst = x.ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0) continue;
        T* row = dst.data() + static_cast<std::size_t>(idx[i]) * c;
        const T* src = g.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += src[j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table,
                           std::span<const std::int64_t> index) {
  const auto v = static_cast<std::int64_t>(table.rows());
  for (auto idx : index) {
    if (idx < 0 || idx >= v) {
      throw std::out_of_range("embedding_lookup: index " + std::to_string(idx) +
                              " out of range for table of " + std::to_string(v) + " rows");
    }
  }
  return gather_rows(tape, table, index);
}

template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_to_string(parts.front().shape()) +
                           " vs " + shape_to_string(p.shape()));
    }
    total += p.rows();
    grad = grad || p.requires_grad();
  }
  grad = grad && tape.recording();
  Tensor<T> out(Shape{total, c}, grad);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::memcpy(out.ptr() + offset, p.ptr(), p.numel() * sizeof(T));
    offset += p.numel();
  }
  if (grad) {
    tape.record(out, [inputs = std::vector<Tensor<T>>(parts.begin(), parts.end())](
                         const Tensor<T>& o) mutable {
      auto g = o.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto dst = p.ensure_grad();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[offset + i];
        }
        offset += p.numel();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                   std::span<const std::uint8_t> row_mask) {
  require_same_shape(pred, target, "mse_loss");
  const std::size_t r = pred.rows(), c = pred.cols();
  if (row_mask.size() != r) {
    throw DimensionError("mse_loss: mask of " + std::to_string(row_mask.size()) +
                         " rows for prediction " + shape_to_string(pred.shape()));
  }
  std::size_t active = 0;
  for (auto m : row_mask) active += m ? 1 : 0;
  if (active == 0) throw ContractError("mse_loss: every row is masked out");
  const T inv_count = T(1) / static_cast<T>(active * c);
  T total = 0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!row_mask[i]) continue;
    for (std::size_t j = 0; j < c; ++j) {
      const T diff = pred.ptr()[i * c + j] - target.ptr()[i * c + j];
      total += diff * diff;
    }
  }
  const bool grad = tracks(tape, {&pred, &target});
  Tensor<T> out = Tensor<T>::scalar(total * inv_count, grad);
  if (grad) {
    tape.record(out, [pred = pred, target = target, mask = std::vector<std::uint8_t>(row_mask.begin(), row_mask.end()),
                      r, c, inv_count](const Tensor<T>& o) mutable {
      const T g = o.grad()[0] * T(2) * inv_count;
      T* dp = pred.requires_grad() ? pred.ensure_grad().data() : nullptr;
      T* dt = target.requires_grad() ? target.ensure_grad().data() : nullptr;
      for (std::size_t i = 0; i < r; ++i) {
        if (!mask[i]) continue;
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t e = i * c + j;
          const T diff = std::as_const(pred).ptr()[e] - std::as_const(target).ptr()[e];
          if (dp) dp[e] += g * diff;
          if (dt) dt[e] -= g * diff;
        }
      }
    });
  }
  return out;
}

#define PROMPTDT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                       \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                T);                                                              \
  template Tensor<T> causal_attention(Tape<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                      const Tensor<T>&, const PaddingMask&, std::size_t);        \
  template Tensor<T> gather_rows(Tape<T>&, const Tensor<T>&, std::span<const std::int64_t>);     \
  template Tensor<T> embedding_lookup(Tape<T>&, const Tensor<T>&,                                \
                                      std::span<const std::int64_t>);                            \
  template Tensor<T> concat_rows(Tape<T>&, std::span<const Tensor<T>>);                          \
  template Tensor<T> mse_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                      \
                              std::span<const std::uint8_t>);

PROMPTDT_INSTANTIATE_OPS(float)
PROMPTDT_INSTANTIATE_OPS(double)

#undef PROMPTDT_INSTANTIATE_OPS

}  // namespace ops
}  // namespace promptdt
