#include "rolab/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "rolab/errors.hpp"

namespace rolab {

namespace {
std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(int rows, int cols) : Tensor(std::vector<int>{rows, cols}) {}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.shape_ = {1, static_cast<int>(values.size())};
  t.data_.assign(values.begin(), values.end());
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (product(shape) != values.size())
    throw std::invalid_argument("Tensor::from: shape/value count mismatch");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(values.begin(), values.end());
  return t;
}

Tensor Tensor::full(int rows, int cols, double value) {
  Tensor t(rows, cols);
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double stddev) {
  Tensor t(rows, cols);
  for (auto& v : t.data_) v = stddev * rng.gaussian();
  return t;
}

int Tensor::rows() const {
  if (shape_.size() != 2) throw std::invalid_argument("Tensor: not 2-d");
  return shape_[0];
}

int Tensor::cols() const {
  if (shape_.size() != 2) throw std::invalid_argument("Tensor: not 2-d");
  return shape_[1];
}

double& Tensor::operator()(int r, int c) {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
               static_cast<std::size_t>(c)];
}

double Tensor::operator()(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
               static_cast<std::size_t>(c)];
}

Tensor Tensor::row_at(int r) const {
  const int n = cols();
  Tensor out(1, n);
  for (int c = 0; c < n; ++c) out(0, c) = (*this)(r, c);
  return out;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace rolab
