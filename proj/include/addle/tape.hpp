#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "addle/tensor.hpp"

namespace addle {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode gradient tape. Every op evaluates eagerly and appends one node;
// backward() walks the nodes in reverse creation order, visiting each once.
// Reductions accumulate left to right so results are bitwise reproducible.
class Tape {
 public:
  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Accumulated gradient of the last backward() target. Zero for parameters the
  // target does not depend on.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // out[i,j] = sum_d in[i,d] * W[d,j] + b[j]
  Var affine(Var input, Var weight, Var bias);
  // Stride-1 valid cross-correlation: [B x Cin x L] * [Cout x Cin x k] -> [B x Cout x (L-k+1)].
  Var conv1d(Var input, Var kernels, Var bias);
  // out[i,c] = sum_m rows[i,m] * A[c,m]
  Var matmul_transposed(Var rows, Var matrix);
  Var add(Var a, Var b);
  // x[B x C x L] + v[B x C] replicated along L.
  Var add_replicated(Var x, Var per_channel);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var scale(Var x, double factor);
  Var sum(Var x);
  Var sum_squares(Var x);
  Var mul(Var a, Var b);
  Var reshape(Var x, Shape shape);
  // Rows of table[R x M] picked by index, [n x M]. Backward scatter-adds.
  Var gather_rows(Var table, std::span<const std::size_t> rows);
  // Row i of x[B x (H*width)] restricted to columns [block[i]*width, (block[i]+1)*width).
  Var select_blocks(Var x, std::span<const std::size_t> block, std::size_t width);
  // sum_ij softplus(l_ij) - t_ij * l_ij, computed from logits in the stable form.
  Var bce_with_logits_sum(Var logits, const Tensor& targets);

  void backward(Var target);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Node&)> backprop;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&, const Node&)> backprop);
  Tensor& grad_ref(std::size_t id) { return nodes_[id].grad; }
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::deque<Node> nodes_;  // references from value() stay valid as the tape grows
};

double sigmoid(double x);
// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace addle
