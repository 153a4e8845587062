#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace promptdt {

using Shape = std::vector<std::size_t>;

/// Allocator with cache-line alignment. Vectorized reductions pick their
/// summation order from the data address, so fixed alignment keeps results
/// bitwise reproducible from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when operand shapes do not fit an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates a precondition that is not about shapes.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major tensor with an optional gradient buffer.
///
/// A Tensor is a cheap handle: copies share storage. Use clone() for a deep
/// copy. Gradients live next to the data so the tape can accumulate into
/// parameters and intermediates alike.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  /// Size of the last dimension.
  std::size_t cols() const { return impl_->shape.back(); }
  /// Product of all leading dimensions.
  std::size_t rows() const { return numel() / cols(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T* ptr() { return impl_->data.data(); }
  const T* ptr() const { return impl_->data.data(); }
  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<T> grad() { return impl_->grad; }
  std::span<const T> grad() const { return impl_->grad; }
  /// Allocates a zero gradient buffer if absent and returns it.
  std::span<T> ensure_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); impl_->grad.shrink_to_fit(); }

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    AlignedVector<T> data;
    AlignedVector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of executed operations for reverse-mode differentiation.
///
/// Nodes are appended as operations run, so inputs always precede the nodes
/// that consume them. A non-recording tape turns every op into a plain forward
/// computation.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Records `pullback`, which must read output.grad() and accumulate into the
  /// gradients of the op inputs.
  void record(Tensor<T> output, std::function<void(const Tensor<T>&)> pullback);

  /// Seeds d(loss)/d(loss) = 1 and runs every pullback in reverse order.
  /// Returns the number of nodes visited.
  std::size_t backward(Tensor<T>& loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> output;
    std::function<void(const Tensor<T>&)> pullback;
  };
  bool recording_;
  std::vector<Node> nodes_;
};

/// Per-position padding flags for a batch of equal-length sequences.
struct PaddingMask {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<std::uint8_t> padded;  // batch * length, 1 = padding

  PaddingMask() = default;
  PaddingMask(std::size_t batch_size, std::size_t seq_len)
      : batch(batch_size), length(seq_len), padded(batch_size * seq_len, 0) {}

  bool is_padded(std::size_t b, std::size_t i) const {
    return padded[b * length + i] != 0;
  }
};

namespace ops {

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// x[N x C] + bias[C] broadcast over the leading dimension.
template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

/// x[N x in] * weight[in x out] + bias[out].
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps);

/// Multi-head scaled dot-product attention over a batch of sequences stacked
/// row-wise: q, k, v are [batch*length x d]. Position i of a sequence attends
/// to non-padded positions j <= i. Padded rows produce zeros.
template <typename T>
Tensor<T> causal_attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, const PaddingMask& mask,
                           std::size_t n_heads = 1);

/// Row gather; index -1 yields a zero row.
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& x,
                      std::span<const std::int64_t> index);

/// Row gather that rejects indices outside [0, V).
template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table,
                           std::span<const std::int64_t> index);

/// Stacks 2-D tensors with equal column counts along the first dimension.
template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts);

/// Mean of squared differences over the rows whose mask entry is nonzero.
/// Both the sum and the element count skip masked-out rows.
template <typename T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                   std::span<const std::uint8_t> row_mask);

}  // namespace ops
}  // namespace promptdt
