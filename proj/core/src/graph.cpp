#include "rolab/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace rolab {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

MapC cmap(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
MapM mmap(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string("Graph: shape mismatch in ") + what);
}

}  // namespace

Val Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Val{static_cast<int>(nodes_.size()) - 1};
}

Val Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite())
    throw std::invalid_argument("Graph::leaf: non-finite input");
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Val Graph::affine(Val w, Val x, Val b) {
  const Tensor& W = node(w).value;
  const Tensor& X = node(x).value;
  const Tensor& B = node(b).value;
  if (W.cols() != X.cols())
    throw std::invalid_argument("Graph::affine: input dim mismatch");
  if (B.rows() != 1 || B.cols() != W.rows())
    throw std::invalid_argument("Graph::affine: bias dim mismatch");
  Node n;
  n.op = Op::Affine;
  n.a = w.id;
  n.b = x.id;
  n.c = b.id;
  n.needs_grad = node(w).needs_grad || node(x).needs_grad || node(b).needs_grad;
  Tensor out(X.rows(), W.rows());
  mmap(out).noalias() = cmap(X) * cmap(W).transpose();
  mmap(out).rowwise() += cmap(B).row(0);
  n.value = std::move(out);
  return push(std::move(n));
}

Val Graph::relu(Val x) {
  Node n;
  n.op = Op::Relu;
  n.a = x.id;
  n.needs_grad = node(x).needs_grad;
  n.value = node(x).value;
  for (auto& v : n.value.raw()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Val Graph::tanh_act(Val x) {
  Node n;
  n.op = Op::Tanh;
  n.a = x.id;
  n.needs_grad = node(x).needs_grad;
  n.value = node(x).value;
  for (auto& v : n.value.raw()) v = std::tanh(v);
  return push(std::move(n));
}

Val Graph::add(Val a, Val b) {
  require_same_shape(node(a).value, node(b).value, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value;
  const auto& bv = node(b).value.raw();
  auto& ov = n.value.raw();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  return push(std::move(n));
}

Val Graph::sub(Val a, Val b) {
  require_same_shape(node(a).value, node(b).value, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value;
  const auto& bv = node(b).value.raw();
  auto& ov = n.value.raw();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  return push(std::move(n));
}

Val Graph::mul(Val a, Val b) {
  require_same_shape(node(a).value, node(b).value, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value;
  const auto& bv = node(b).value.raw();
  auto& ov = n.value.raw();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  return push(std::move(n));
}

Val Graph::minimum(Val a, Val b) {
  require_same_shape(node(a).value, node(b).value, "minimum");
  Node n;
  n.op = Op::Min;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value;
  const auto& bv = node(b).value.raw();
  auto& ov = n.value.raw();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = ov[i] <= bv[i] ? ov[i] : bv[i];
  return push(std::move(n));
}

Val Graph::scale(Val a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.scalar = c;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value;
  for (auto& v : n.value.raw()) v *= c;
  return push(std::move(n));
}

Val Graph::square(Val a) {
  Node n;
  n.op = Op::Square;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value;
  for (auto& v : n.value.raw()) v *= v;
  return push(std::move(n));
}

Val Graph::concat_cols(Val a, Val b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (A.rows() != B.rows())
    throw std::invalid_argument("Graph::concat_cols: row count mismatch");
  Node n;
  n.op = Op::ConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  Tensor out(A.rows(), A.cols() + B.cols());
  for (int r = 0; r < A.rows(); ++r) {
    for (int c = 0; c < A.cols(); ++c) out(r, c) = A(r, c);
    for (int c = 0; c < B.cols(); ++c) out(r, A.cols() + c) = B(r, c);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Val Graph::slice_cols(Val a, int begin, int len) {
  const Tensor& A = node(a).value;
  if (begin < 0 || len < 0 || begin + len > A.cols())
    throw std::invalid_argument("Graph::slice_cols: range out of bounds");
  Node n;
  n.op = Op::SliceCols;
  n.a = a.id;
  n.slice_begin = begin;
  n.slice_len = len;
  n.needs_grad = node(a).needs_grad;
  Tensor out(A.rows(), len);
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < len; ++c) out(r, c) = A(r, begin + c);
  n.value = std::move(out);
  return push(std::move(n));
}

Val Graph::row_sum(Val a) {
  const Tensor& A = node(a).value;
  Node n;
  n.op = Op::RowSum;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  Tensor out(A.rows(), 1);
  for (int r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < A.cols(); ++c) s += A(r, c);
    out(r, 0) = s;
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Val Graph::sum(Val a) {
  const Tensor& A = node(a).value;
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  double s = 0.0;
  for (double v : A.raw()) s += v;
  Tensor out(1, 1);
  out(0, 0) = s;
  n.value = std::move(out);
  return push(std::move(n));
}

Val Graph::mean_all(Val a) {
  const Tensor& A = node(a).value;
  if (A.numel() == 0) throw std::invalid_argument("Graph::mean_all: empty");
  Node n;
  n.op = Op::MeanAll;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  double s = 0.0;
  for (double v : A.raw()) s += v;
  Tensor out(1, 1);
  out(0, 0) = s / static_cast<double>(A.numel());
  n.value = std::move(out);
  return push(std::move(n));
}

Tensor Graph::grad(Val v) const {
  const Node& n = node(v);
  if (n.grad.numel() == n.value.numel()) return n.grad;
  return Tensor(n.value.shape());  // zeros
}

void Graph::backward(Val root) {
  Node& r = node(root);
  if (r.value.numel() != 1)
    throw std::invalid_argument("Graph::backward: objective is not scalar");
  for (auto& n : nodes_) n.grad = Tensor();
  r.grad = Tensor(r.value.shape());
  r.grad(0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.numel() == 0) continue;
    backward_node(n);
  }
}

void Graph::backward_node(Node& n) {
  auto ensure = [&](int id) -> Tensor& {
    Node& t = nodes_[static_cast<std::size_t>(id)];
    if (t.grad.numel() != t.value.numel()) t.grad = Tensor(t.value.shape());
    return t.grad;
  };
  auto wants = [&](int id) {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  };

  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Affine: {
      const Tensor& W = nodes_[static_cast<std::size_t>(n.a)].value;
      const Tensor& X = nodes_[static_cast<std::size_t>(n.b)].value;
      const Tensor& G = n.grad;  // (B, out)
      if (wants(n.b)) {
        Tensor& gx = ensure(n.b);
        mmap(gx).noalias() += cmap(G) * cmap(W);
      }
      if (wants(n.a)) {
        Tensor& gw = ensure(n.a);
        mmap(gw).noalias() += cmap(G).transpose() * cmap(X);
      }
      if (wants(n.c)) {
        Tensor& gb = ensure(n.c);
        mmap(gb).row(0) += cmap(G).colwise().sum();
      }
      return;
    }
    case Op::Relu: {
      if (!wants(n.a)) return;
      const Tensor& X = nodes_[static_cast<std::size_t>(n.a)].value;
      Tensor& gx = ensure(n.a);
      const auto& g = n.grad.raw();
      const auto& x = X.raw();
      auto& out = gx.raw();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) out[i] += g[i];
      return;
    }
    case Op::Tanh: {
      if (!wants(n.a)) return;
      Tensor& gx = ensure(n.a);
      const auto& g = n.grad.raw();
      const auto& y = n.value.raw();
      auto& out = gx.raw();
      for (std::size_t i = 0; i < g.size(); ++i)
        out[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::Add: {
      const auto& g = n.grad.raw();
      if (wants(n.a)) {
        auto& ga = ensure(n.a).raw();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.b)) {
        auto& gb = ensure(n.b).raw();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      return;
    }
    case Op::Sub: {
      const auto& g = n.grad.raw();
      if (wants(n.a)) {
        auto& ga = ensure(n.a).raw();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.b)) {
        auto& gb = ensure(n.b).raw();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      return;
    }
    case Op::Mul: {
      const auto& g = n.grad.raw();
      const auto& av = nodes_[static_cast<std::size_t>(n.a)].value.raw();
      const auto& bv = nodes_[static_cast<std::size_t>(n.b)].value.raw();
      if (wants(n.a)) {
        auto& ga = ensure(n.a).raw();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (wants(n.b)) {
        auto& gb = ensure(n.b).raw();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
      return;
    }
    case Op::Min: {
      const auto& g = n.grad.raw();
      const auto& av = nodes_[static_cast<std::size_t>(n.a)].value.raw();
      const auto& bv = nodes_[static_cast<std::size_t>(n.b)].value.raw();
      if (wants(n.a)) {
        auto& ga = ensure(n.a).raw();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] <= bv[i]) ga[i] += g[i];
      }
      if (wants(n.b)) {
        auto& gb = ensure(n.b).raw();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] > bv[i]) gb[i] += g[i];
      }
      return;
    }
    case Op::Scale: {
      if (!wants(n.a)) return;
      auto& ga = ensure(n.a).raw();
      const auto& g = n.grad.raw();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      return;
    }
    case Op::Square: {
      if (!wants(n.a)) return;
      auto& ga = ensure(n.a).raw();
      const auto& g = n.grad.raw();
      const auto& x = nodes_[static_cast<std::size_t>(n.a)].value.raw();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * x[i];
      return;
    }
    case Op::ConcatCols: {
      const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
      const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
      if (wants(n.a)) {
        Tensor& ga = ensure(n.a);
        for (int r = 0; r < A.rows(); ++r)
          for (int c = 0; c < A.cols(); ++c) ga(r, c) += n.grad(r, c);
      }
      if (wants(n.b)) {
        Tensor& gb = ensure(n.b);
        for (int r = 0; r < B.rows(); ++r)
          for (int c = 0; c < B.cols(); ++c) gb(r, c) += n.grad(r, A.cols() + c);
      }
      return;
    }
    case Op::SliceCols: {
      if (!wants(n.a)) return;
      Tensor& ga = ensure(n.a);
      for (int r = 0; r < n.value.rows(); ++r)
        for (int c = 0; c < n.slice_len; ++c)
          ga(r, n.slice_begin + c) += n.grad(r, c);
      return;
    }
    case Op::RowSum: {
      if (!wants(n.a)) return;
      Tensor& ga = ensure(n.a);
      for (int r = 0; r < ga.rows(); ++r) {
        const double g = n.grad(r, 0);
        for (int c = 0; c < ga.cols(); ++c) ga(r, c) += g;
      }
      return;
    }
    case Op::Sum: {
      if (!wants(n.a)) return;
      auto& ga = ensure(n.a).raw();
      const double g = n.grad(0);
      for (auto& v : ga) v += g;
      return;
    }
    case Op::MeanAll: {
      if (!wants(n.a)) return;
      auto& ga = ensure(n.a).raw();
      const double g = n.grad(0) / static_cast<double>(ga.size());
      for (auto& v : ga) v += g;
      return;
    }
  }
}

}  // namespace rolab
