#include "rolab/net.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace rolab {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

std::string to_string(OutputActivation a) {
  return a == OutputActivation::Tanh ? "tanh" : "none";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "tanh") return OutputActivation::Tanh;
  if (s == "none") return OutputActivation::None;
  throw std::invalid_argument("unknown output activation: " + s);
}

MlpNet MlpNet::make(std::vector<int> dims, OutputActivation act, Rng& rng) {
  if (dims.size() < 2)
    throw std::invalid_argument("MlpNet: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("MlpNet: non-positive layer dim");
  MlpNet net;
  net.layer_dims = std::move(dims);
  net.out_act = act;
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    const int in = net.layer_dims[l];
    const int out = net.layer_dims[l + 1];
    // U(-k, k) with k = 1/sqrt(fan_in) for both weights and biases.
    const double k = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w(out, in);
    for (auto& v : w.raw()) v = rng.uniform(-k, k);
    Tensor b(1, out);
    for (auto& v : b.raw()) v = rng.uniform(-k, k);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Tensor MlpNet::forward(const Tensor& input) const {
  if (input.cols() != input_dim())
    throw std::invalid_argument("MlpNet::forward: input dim mismatch");
  if (!input.all_finite())
    throw std::invalid_argument("MlpNet::forward: non-finite input");
  Tensor cur = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Tensor& W = weights[l];
    const Tensor& B = biases[l];
    Tensor next(cur.rows(), W.rows());
    Eigen::Map<MatRM>(next.data(), next.rows(), next.cols()).noalias() =
        Eigen::Map<const MatRM>(cur.data(), cur.rows(), cur.cols()) *
        Eigen::Map<const MatRM>(W.data(), W.rows(), W.cols()).transpose();
    Eigen::Map<MatRM>(next.data(), next.rows(), next.cols()).rowwise() +=
        Eigen::Map<const MatRM>(B.data(), 1, B.cols()).row(0);
    const bool last = l + 1 == weights.size();
    if (!last) {
      for (auto& v : next.raw()) v = v > 0.0 ? v : 0.0;
    } else if (out_act == OutputActivation::Tanh) {
      for (auto& v : next.raw()) v = std::tanh(v);
    }
    cur = std::move(next);
  }
  if (!cur.all_finite())
    throw std::runtime_error("MlpNet::forward: non-finite output");
  return cur;
}

std::vector<Tensor*> MlpNet::params() {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

std::vector<const Tensor*> MlpNet::params() const {
  std::vector<const Tensor*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

std::size_t MlpNet::param_count() const {
  std::size_t n = 0;
  for (const auto* t : params()) n += t->numel();
  return n;
}

NetBinding bind_params(Graph& g, const MlpNet& net, bool trainable) {
  NetBinding p;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    p.w.push_back(g.leaf(net.weights[l], trainable));
    p.b.push_back(g.leaf(net.biases[l], trainable));
  }
  return p;
}

Val apply_net(Graph& g, const NetBinding& p, const MlpNet& net, Val x) {
  if (g.value(x).cols() != net.input_dim())
    throw std::invalid_argument("apply_net: input dim mismatch");
  Val cur = x;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    cur = g.affine(p.w[l], cur, p.b[l]);
    const bool last = l + 1 == p.w.size();
    if (!last)
      cur = g.relu(cur);
    else if (net.out_act == OutputActivation::Tanh)
      cur = g.tanh_act(cur);
  }
  return cur;
}

Tensor grad_input(const MlpNet& net, const Tensor& input,
                  const std::function<Val(Graph&, Val)>& objective) {
  Graph g;
  NetBinding p = bind_params(g, net, /*trainable=*/false);
  Val x = g.leaf(input, /*requires_grad=*/true);
  Val y = apply_net(g, p, net, x);
  Val obj = objective(g, y);
  g.backward(obj);
  return g.grad(x);
}

ParamGrads grad_params(const MlpNet& net, const Tensor& input,
                       const std::function<Val(Graph&, Val)>& objective) {
  Graph g;
  NetBinding p = bind_params(g, net, /*trainable=*/true);
  Val x = g.leaf(input, /*requires_grad=*/false);
  Val y = apply_net(g, p, net, x);
  Val obj = objective(g, y);
  g.backward(obj);
  ParamGrads out;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    out.w.push_back(g.grad(p.w[l]));
    out.b.push_back(g.grad(p.b[l]));
  }
  return out;
}

}  // namespace rolab
