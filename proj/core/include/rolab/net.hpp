#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rolab/graph.hpp"
#include "rolab/rng.hpp"
#include "rolab/tensor.hpp"

namespace rolab {

enum class OutputActivation { None, Tanh };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

// Fully-connected network: affine layers with rectifier hidden activations
// and an optional tanh on the output (used by actors so actions land in
// [-1, 1]^m). Parameters are plain tensors; layer order W1,b1,W2,b2,... is
// also the checkpoint serialization order.
struct MlpNet {
  std::vector<int> layer_dims;  // input, hidden..., output
  OutputActivation out_act = OutputActivation::None;
  std::vector<Tensor> weights;  // (out, in) per layer
  std::vector<Tensor> biases;   // (1, out) per layer

  static MlpNet make(std::vector<int> dims, OutputActivation act, Rng& rng);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }

  // Pure batched forward pass; deterministic, no tape.
  // input (B, input_dim) -> (B, output_dim). Throws on dim mismatch or
  // non-finite output.
  Tensor forward(const Tensor& input) const;

  // Parameter tensors in serialization order W1,b1,W2,b2,...
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  std::size_t param_count() const;
};

// Parameter leaves of one net inside a Graph, reusable across several
// forward applications so gradients accumulate into the same leaves.
struct NetBinding {
  std::vector<Val> w, b;
};

NetBinding bind_params(Graph& g, const MlpNet& net, bool trainable);

// Applies the bound network to x (a graph value of shape (B, input_dim)).
Val apply_net(Graph& g, const NetBinding& p, const MlpNet& net, Val x);

// Gradient of a scalar objective with respect to the network input.
// `objective` maps the network output value to a scalar graph value.
Tensor grad_input(const MlpNet& net, const Tensor& input,
                  const std::function<Val(Graph&, Val)>& objective);

struct ParamGrads {
  std::vector<Tensor> w, b;  // same shapes as the net's parameters
};

// Gradient of a scalar objective with respect to all network parameters.
ParamGrads grad_params(const MlpNet& net, const Tensor& input,
                       const std::function<Val(Graph&, Val)>& objective);

}  // namespace rolab
