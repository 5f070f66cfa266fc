#include "addle/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace addle {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void expect_rank(const char* op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    shape_error(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                        shape_string(t.shape()));
  }
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, const Node&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Tensor value) { return push(std::move(value), true, nullptr); }

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.requires_grad) throw std::logic_error("tape: gradient requested for a constant");
  if (n.grad.shape() != n.value.shape()) throw std::logic_error("tape: backward() has not been run");
  return n.grad;
}

Var Tape::affine(Var input, Var weight, Var bias) {
  const Tensor& x = value(input);
  const Tensor& w = value(weight);
  const Tensor& b = value(bias);
  expect_rank("affine", "input", x, 2);
  expect_rank("affine", "weight", w, 2);
  expect_rank("affine", "bias", b, 1);
  const std::size_t B = x.dim(0), D = x.dim(1), C = w.dim(1);
  if (w.dim(0) != D || b.dim(0) != C) {
    shape_error("affine", "input " + shape_string(x.shape()) + ", weight " + shape_string(w.shape()) +
                              ", bias " + shape_string(b.shape()) + " do not conform");
  }
  Tensor out({B, C});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      double acc = b[j];
      for (std::size_t d = 0; d < D; ++d) acc += x.at(i, d) * w.at(d, j);
      out.at(i, j) = acc;
    }
  }
  const bool rg = needs(input) || needs(weight) || needs(bias);
  return push(std::move(out), rg, [input, weight, bias, B, D, C](Tape& t, const Node& self) {
    const Tensor& g = self.grad;
    if (t.needs(input)) {
      const Tensor& w = t.value(weight);
      Tensor& gx = t.grad_ref(input.id);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t d = 0; d < D; ++d) {
          double acc = 0.0;
          for (std::size_t j = 0; j < C; ++j) acc += g.at(i, j) * w.at(d, j);
          gx.at(i, d) += acc;
        }
    }
    if (t.needs(weight)) {
      const Tensor& x = t.value(input);
      Tensor& gw = t.grad_ref(weight.id);
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t j = 0; j < C; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < B; ++i) acc += x.at(i, d) * g.at(i, j);
          gw.at(d, j) += acc;
        }
    }
    if (t.needs(bias)) {
      Tensor& gb = t.grad_ref(bias.id);
      for (std::size_t j = 0; j < C; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < B; ++i) acc += g.at(i, j);
        gb[j] += acc;
      }
    }
  });
}

Var Tape::conv1d(Var input, Var kernels, Var bias) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernels);
  const Tensor& b = value(bias);
  expect_rank("conv1d", "input", x, 3);
  expect_rank("conv1d", "kernels", k, 3);
  expect_rank("conv1d", "bias", b, 1);
  const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  const std::size_t Cout = k.dim(0), K = k.dim(2);
  if (k.dim(1) != Cin || b.dim(0) != Cout) {
    shape_error("conv1d", "input " + shape_string(x.shape()) + ", kernels " + shape_string(k.shape()) +
                              ", bias " + shape_string(b.shape()) + " do not conform");
  }
  if (K == 0 || K > L) {
    shape_error("conv1d", "kernel size " + std::to_string(K) + " exceeds input length " + std::to_string(L));
  }
  const std::size_t Lout = L - K + 1;
  Tensor out({B, Cout, Lout});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t co = 0; co < Cout; ++co)
      for (std::size_t p = 0; p < Lout; ++p) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < Cin; ++ci)
          for (std::size_t q = 0; q < K; ++q) acc += x.at(n, ci, p + q) * k.at(co, ci, q);
        out.at(n, co, p) = acc;
      }
  const bool rg = needs(input) || needs(kernels) || needs(bias);
  return push(std::move(out), rg, [=](Tape& t, const Node& self) {
    const Tensor& g = self.grad;
    const Tensor& x = t.value(input);
    const Tensor& k = t.value(kernels);
    if (t.needs(input)) {
      Tensor& gx = t.grad_ref(input.id);
      for (std::size_t n = 0; n < B; ++n)
        for (std::size_t co = 0; co < Cout; ++co)
          for (std::size_t p = 0; p < Lout; ++p) {
            const double gv = g.at(n, co, p);
            for (std::size_t ci = 0; ci < Cin; ++ci)
              for (std::size_t q = 0; q < K; ++q) gx.at(n, ci, p + q) += gv * k.at(co, ci, q);
          }
    }
    if (t.needs(kernels)) {
      Tensor& gk = t.grad_ref(kernels.id);
      for (std::size_t co = 0; co < Cout; ++co)
        for (std::size_t ci = 0; ci < Cin; ++ci)
          for (std::size_t q = 0; q < K; ++q) {
            double acc = 0.0;
            for (std::size_t n = 0; n < B; ++n)
              for (std::size_t p = 0; p < Lout; ++p) acc += g.at(n, co, p) * x.at(n, ci, p + q);
            gk.at(co, ci, q) += acc;
          }
    }
    if (t.needs(bias)) {
      Tensor& gb = t.grad_ref(bias.id);
      for (std::size_t co = 0; co < Cout; ++co) {
        double acc = 0.0;
        for (std::size_t n = 0; n < B; ++n)
          for (std::size_t p = 0; p < Lout; ++p) acc += g.at(n, co, p);
        gb[co] += acc;
      }
    }
  });
}

Var Tape::matmul_transposed(Var rows, Var matrix) {
  const Tensor& z = value(rows);
  const Tensor& a = value(matrix);
  expect_rank("matmul_transposed", "rows", z, 2);
  expect_rank("matmul_transposed", "matrix", a, 2);
  const std::size_t B = z.dim(0), M = z.dim(1), C = a.dim(0);
  if (a.dim(1) != M) {
    shape_error("matmul_transposed",
                "rows " + shape_string(z.shape()) + " incompatible with matrix " + shape_string(a.shape()));
  }
  Tensor out({B, C});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += a.at(c, m) * z.at(i, m);
      out.at(i, c) = acc;
    }
  const bool rg = needs(rows) || needs(matrix);
  return push(std::move(out), rg, [=](Tape& t, const Node& self) {
    const Tensor& g = self.grad;
    if (t.needs(rows)) {
      const Tensor& a = t.value(matrix);
      Tensor& gz = t.grad_ref(rows.id);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t m = 0; m < M; ++m) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c) acc += g.at(i, c) * a.at(c, m);
          gz.at(i, m) += acc;
        }
    }
    if (t.needs(matrix)) {
      const Tensor& z = t.value(rows);
      Tensor& ga = t.grad_ref(matrix.id);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m) {
          double acc = 0.0;
          for (std::size_t i = 0; i < B; ++i) acc += g.at(i, c) * z.at(i, m);
          ga.at(c, m) += acc;
        }
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) {
    shape_error("add", "shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()) + " differ");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
    for (Var p : {a, b}) {
      if (!t.needs(p)) continue;
      Tensor& gp = t.grad_ref(p.id);
      for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += self.grad[i];
    }
  });
}

Var Tape::add_replicated(Var x, Var per_channel) {
  const Tensor& a = value(x);
  const Tensor& v = value(per_channel);
  expect_rank("add_replicated", "input", a, 3);
  expect_rank("add_replicated", "per-channel term", v, 2);
  const std::size_t B = a.dim(0), C = a.dim(1), L = a.dim(2);
  if (v.dim(0) != B || v.dim(1) != C) {
    shape_error("add_replicated", "per-channel term " + shape_string(v.shape()) + " does not match feature map " +
                                      shape_string(a.shape()));
  }
  Tensor out = a;
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < L; ++p) out.at(n, c, p) += v.at(n, c);
  return push(std::move(out), needs(x) || needs(per_channel), [=](Tape& t, const Node& self) {
    if (t.needs(x)) {
      Tensor& gx = t.grad_ref(x.id);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i];
    }
    if (t.needs(per_channel)) {
      Tensor& gv = t.grad_ref(per_channel.id);
      for (std::size_t n = 0; n < B; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (std::size_t p = 0; p < L; ++p) acc += self.grad.at(n, c, p);
          gv.at(n, c) += acc;
        }
    }
  });
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return push(std::move(out), needs(x), [x](Tape& t, const Node& self) {
    const Tensor& in = t.value(x);
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i)
      if (in[i] > 0.0) gx[i] += self.grad[i];
  });
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = addle::sigmoid(out[i]);
  return push(std::move(out), needs(x), [x](Tape& t, const Node& self) {
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      const double s = self.value[i];
      gx[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var Tape::scale(Var x, double factor) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= factor;
  return push(std::move(out), needs(x), [x, factor](Tape& t, const Node& self) {
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i] * factor;
  });
}

Var Tape::sum(Var x) {
  const Tensor& in = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < in.numel(); ++i) acc += in[i];
  return push(Tensor::scalar(acc), needs(x), [x](Tape& t, const Node& self) {
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[0];
  });
}

Var Tape::sum_squares(Var x) {
  const Tensor& in = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < in.numel(); ++i) acc += in[i] * in[i];
  return push(Tensor::scalar(acc), needs(x), [x](Tape& t, const Node& self) {
    const Tensor& in = t.value(x);
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += 2.0 * in[i] * self.grad[0];
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) {
    shape_error("mul", "shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()) + " differ");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= y[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
    if (t.needs(a)) {
      const Tensor& y = t.value(b);
      Tensor& ga = t.grad_ref(a.id);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += self.grad[i] * y[i];
    }
    if (t.needs(b)) {
      const Tensor& x = t.value(a);
      Tensor& gb = t.grad_ref(b.id);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += self.grad[i] * x[i];
    }
  });
}

Var Tape::reshape(Var x, Shape shape) {
  Tensor out = value(x).reshaped(std::move(shape));
  return push(std::move(out), needs(x), [x](Tape& t, const Node& self) {
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i];
  });
}

Var Tape::gather_rows(Var table, std::span<const std::size_t> rows) {
  const Tensor& tab = value(table);
  expect_rank("gather_rows", "table", tab, 2);
  const std::size_t R = tab.dim(0), M = tab.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out({idx.size(), M});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= R) {
      shape_error("gather_rows", "row index " + std::to_string(idx[i]) + " out of range for " + std::to_string(R) +
                                     " rows");
    }
    for (std::size_t m = 0; m < M; ++m) out.at(i, m) = tab.at(idx[i], m);
  }
  return push(std::move(out), needs(table), [table, idx = std::move(idx), M](Tape& t, const Node& self) {
    Tensor& gt = t.grad_ref(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t m = 0; m < M; ++m) gt.at(idx[i], m) += self.grad.at(i, m);
  });
}

Var Tape::select_blocks(Var x, std::span<const std::size_t> block, std::size_t width) {
  const Tensor& in = value(x);
  expect_rank("select_blocks", "input", in, 2);
  const std::size_t B = in.dim(0), W = in.dim(1);
  if (block.size() != B) shape_error("select_blocks", "one block index per row is required");
  std::vector<std::size_t> blk(block.begin(), block.end());
  Tensor out({B, width});
  for (std::size_t i = 0; i < B; ++i) {
    if ((blk[i] + 1) * width > W) {
      shape_error("select_blocks", "block " + std::to_string(blk[i]) + " of width " + std::to_string(width) +
                                       " exceeds " + std::to_string(W) + " columns");
    }
    for (std::size_t j = 0; j < width; ++j) out.at(i, j) = in.at(i, blk[i] * width + j);
  }
  return push(std::move(out), needs(x), [x, blk = std::move(blk), width](Tape& t, const Node& self) {
    Tensor& gx = t.grad_ref(x.id);
    for (std::size_t i = 0; i < blk.size(); ++i)
      for (std::size_t j = 0; j < width; ++j) gx.at(i, blk[i] * width + j) += self.grad.at(i, j);
  });
}

Var Tape::bce_with_logits_sum(Var logits, const Tensor& targets) {
  const Tensor& l = value(logits);
  if (l.shape() != targets.shape()) {
    shape_error("bce_with_logits_sum",
                "targets " + shape_string(targets.shape()) + " do not match logits " + shape_string(l.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < l.numel(); ++i) acc += softplus(l[i]) - targets[i] * l[i];
  return push(Tensor::scalar(acc), needs(logits), [logits, targets](Tape& t, const Node& self) {
    const Tensor& l = t.value(logits);
    Tensor& gl = t.grad_ref(logits.id);
    for (std::size_t i = 0; i < gl.numel(); ++i) gl[i] += self.grad[0] * (addle::sigmoid(l[i]) - targets[i]);
  });
}

void Tape::backward(Var target) {
  Node& root = nodes_.at(target.id);
  if (root.value.numel() != 1) {
    throw std::invalid_argument("tape: backward target must be a scalar, got " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor(n.value.shape(), 0.0);
  }
  if (!root.requires_grad) return;
  root.grad[0] = 1.0;
  for (std::size_t i = target.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.requires_grad && n.backprop) n.backprop(*this, n);
  }
}

}  // namespace addle
