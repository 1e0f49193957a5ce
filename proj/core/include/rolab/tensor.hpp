#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <vector>

#include "rolab/rng.hpp"

namespace rolab {

// 64-byte-aligned storage so vectorized kernels take the same code path for
// every buffer of a given shape; otherwise results (and therefore checkpoint
// bits) would depend on where the allocator happened to place a vector.
template <class T, std::size_t Align>
struct AlignedAlloc {
  using value_type = T;
  template <class U>
  struct rebind {
    using other = AlignedAlloc<U, Align>;
  };
  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U, Align>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t n) {
    ::operator delete(p, n * sizeof(T), std::align_val_t(Align));
  }
  template <class U>
  bool operator==(const AlignedAlloc<U, Align>&) const {
    return true;
  }
};

using AlignedDoubles = std::vector<double, AlignedAlloc<double, 64>>;

// Dense row-major array of 64-bit floats. The project only ever needs
// vectors (1, n) and matrices (rows, cols); everything hot is batched as
// (batch, dim) so the differentiation engine can lean on GEMM.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(int rows, int cols);

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor row(std::vector<double> values);  // shape (1, n)
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor full(int rows, int cols, double value);
  static Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0);

  const std::vector<int>& shape() const { return shape_; }
  int rows() const;
  int cols() const;
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator()(int r, int c);
  double operator()(int r, int c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return {data_.data(), data_.size()}; }
  AlignedDoubles& raw() { return data_; }
  const AlignedDoubles& raw() const { return data_; }

  Tensor row_at(int r) const;  // copy of one row as (1, cols)

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<int> shape_;
  AlignedDoubles data_;
};

}  // namespace rolab
