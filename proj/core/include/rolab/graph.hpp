#pragma once

#include <cstdint>
#include <vector>

#include "rolab/tensor.hpp"

namespace rolab {

// Handle into a Graph's node arena.
struct Val {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation tape over batched matrices.
//
// Values are (rows, cols) tensors; a scalar is (1, 1). Forward values are
// computed eagerly as nodes are created, so intermediate results can be read
// mid-construction (needed e.g. for detached loss scalings). The tape is
// rebuilt from scratch for every loss/objective evaluation; there is no
// persistent computation graph.
//
// Leaves created with requires_grad=false are treated as constants: backward
// never accumulates into them and whole subtrees without grad-requiring
// inputs are skipped, which is what makes frozen-network objectives cheap.
class Graph {
 public:
  Graph() { nodes_.reserve(64); }

  Val leaf(Tensor value, bool requires_grad = true);

  // y = x * W^T + b, with W (out, in), x (batch, in), b (1, out).
  Val affine(Val w, Val x, Val b);

  Val relu(Val x);     // subgradient at 0 is 0
  Val tanh_act(Val x);

  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);      // elementwise
  Val minimum(Val a, Val b);  // elementwise; ties route gradient to `a`
  Val scale(Val a, double c);
  Val square(Val a);

  Val concat_cols(Val a, Val b);
  Val slice_cols(Val a, int begin, int len);

  Val row_sum(Val a);   // (B, d) -> (B, 1)
  Val sum(Val a);       // -> (1, 1)
  Val mean_all(Val a);  // -> (1, 1)

  // Seeds d(root)/d(root) = 1 and propagates through the tape in reverse.
  // root must be a single element; throws std::invalid_argument otherwise.
  void backward(Val root);

  const Tensor& value(Val v) const { return node(v).value; }
  // Gradient accumulated by the last backward(); zeros if the node was
  // constant or unreachable from the root.
  Tensor grad(Val v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Affine,
    Relu,
    Tanh,
    Add,
    Sub,
    Mul,
    Min,
    Scale,
    Square,
    ConcatCols,
    SliceCols,
    RowSum,
    Sum,
    MeanAll,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1, c = -1;
    int slice_begin = 0, slice_len = 0;
    double scalar = 0.0;
    bool needs_grad = false;
    Tensor value;
    Tensor grad;  // lazily sized at backward()
  };

  const Node& node(Val v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  Node& node(Val v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  Val push(Node n);
  void backward_node(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace rolab
