#include <doctest.h>

#include <cmath>

#include "addle/grad_check.hpp"
#include "addle/seeds.hpp"
#include "addle/tape.hpp"
#include "oracles.hpp"

using namespace addle;

TEST_CASE("tensor shape invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS(t.reshaped({4, 2}));
}

TEST_CASE("affine examples") {
  Tape tape;
  const Var x = tape.constant(Tensor::matrix({{1, 2}}));
  const Var id = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Var zero_b = tape.constant(Tensor::vector({0, 0}));
  CHECK(tape.value(tape.affine(x, id, zero_b)) == Tensor::matrix({{1, 2}}));
  const Var zero_w = tape.constant(Tensor::matrix({{0, 0}, {0, 0}}));
  const Var b = tape.constant(Tensor::vector({3, 4}));
  CHECK(tape.value(tape.affine(x, zero_w, b)) == Tensor::matrix({{3, 4}}));
  const Var bad = tape.constant(Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(tape.affine(x, id, bad), std::invalid_argument);
}

TEST_CASE("conv1d examples") {
  Tape tape;
  const Var x = tape.constant(Tensor({1, 1, 3}, {1, 2, 3}));
  const Var k1 = tape.constant(Tensor({1, 1, 1}, {1}));
  const Var b = tape.constant(Tensor::vector({0}));
  CHECK(tape.value(tape.conv1d(x, k1, b)) == Tensor({1, 1, 3}, {1, 2, 3}));
  const Var ones = tape.constant(Tensor({1, 1, 3}, {1, 1, 1}));
  const Var box = tape.constant(Tensor({1, 1, 2}, {1, 1}));
  CHECK(tape.value(tape.conv1d(ones, box, b)) == Tensor({1, 1, 2}, {2, 2}));
  const Var wide = tape.constant(Tensor({1, 1, 4}, {1, 1, 1, 1}));
  CHECK_THROWS_AS(tape.conv1d(x, wide, b), std::invalid_argument);
}

TEST_CASE("conv1d identity kernel with k=1 is exact on random input") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Tape tape;
    const Tensor in = oracle::random_tensor({2, 3, 7}, s);
    Tensor k({3, 3, 1}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) k.at(c, c, 0) = 1.0;
    const Var out = tape.conv1d(tape.constant(in), tape.constant(k), tape.constant(Tensor({3}, 0.0)));
    CHECK(tape.value(out) == in);
  }
}

TEST_CASE("sigmoid is stable and has derivative 1/4 at zero") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-700.0)));
  Tape tape;
  const Var x = tape.parameter(Tensor::vector({0.0}));
  const Var y = tape.sum(tape.sigmoid(x));
  tape.backward(y);
  CHECK(tape.grad(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("grad_check examples") {
  const ScalarGraph square = [](Tape& t, std::span<const Var> p) { return t.sum_squares(p[0]); };
  const auto ok = grad_check(square, {Tensor::vector({3.0})}, 1e-5);
  CHECK(ok.max_relative_error < 1e-9);
  CHECK(ok.analytic == doctest::Approx(6.0));
  const auto bad = grad_check(square, {Tensor::vector({3.0})}, 1e-5, [](std::vector<Tensor>& g) {
    for (auto& t : g)
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= 2.0;
  });
  CHECK(bad.max_relative_error == doctest::Approx(0.5).epsilon(1e-6));
  // finite at the point, overflows once entry 1 is nudged up
  const ScalarGraph blowup = [](Tape& t, std::span<const Var> p) {
    return t.add(t.sum(p[0]), t.sum(t.scale(p[1], 1e308)));
  };
  CHECK_THROWS_WITH_AS(grad_check(blowup, {Tensor::vector({0.5}), Tensor::vector({1.79769})}, 1e-5),
                       doctest::Contains("parameter 1, entry 0"), std::runtime_error);
}

TEST_CASE("every primitive passes the finite-difference check over 20 seeds") {
  using Case = std::pair<const char*, std::function<GradCheckResult(std::uint64_t)>>;
  auto rt = [](addle::Shape s, std::uint64_t seed) { return oracle::random_tensor(std::move(s), seed); };
  // Random linear readout, so the scalar is no more curved than the primitive itself.
  const auto readout = [](Tape& t, Var v) {
    const Tensor& val = t.value(v);
    return t.sum(t.mul(v, t.constant(oracle::random_tensor(val.shape(), 4242))));
  };
  const std::vector<Case> cases = {
      {"affine",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.affine(p[0], p[1], p[2])); },
                           {rt({2, 3}, s), rt({3, 2}, s + 100), rt({2}, s + 200)}, 1e-5);
       }},
      {"conv1d",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.conv1d(p[0], p[1], p[2])); },
                           {rt({2, 2, 6}, s), rt({3, 2, 3}, s + 100), rt({3}, s + 200)}, 1e-5);
       }},
      {"matmul_transposed",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.matmul_transposed(p[0], p[1])); },
                           {rt({3, 4}, s), rt({2, 4}, s + 100)}, 1e-5);
       }},
      {"add_replicated",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.add_replicated(p[0], p[1])); },
                           {rt({2, 3, 4}, s), rt({2, 3}, s + 100)}, 1e-5);
       }},
      {"sigmoid",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.sigmoid(p[0])); },
                           {rt({5}, s)}, 1e-5);
       }},
      {"mul",
       [&](std::uint64_t s) {
         return grad_check([readout](Tape& t, std::span<const Var> p) { return readout(t, t.mul(p[0], p[1])); },
                           {rt({4}, s), rt({4}, s + 100)}, 1e-5);
       }},
      {"gather_rows",
       [&](std::uint64_t s) {
         const std::size_t rows[] = {2, 0, 2, 1};
         return grad_check(
             [readout, rows](Tape& t, std::span<const Var> p) { return readout(t, t.gather_rows(p[0], rows)); },
             {rt({3, 2}, s)}, 1e-5);
       }},
      {"select_blocks",
       [&](std::uint64_t s) {
         const std::size_t blocks[] = {1, 0, 2};
         return grad_check(
             [readout, blocks](Tape& t, std::span<const Var> p) { return readout(t, t.select_blocks(p[0], blocks, 2)); },
             {rt({3, 6}, s)}, 1e-5);
       }},
      {"bce_with_logits_sum",
       [&](std::uint64_t s) {
         const Tensor targets({2, 3}, {1, 1, 0, 1, 0, 0});
         return grad_check(
             [targets](Tape& t, std::span<const Var> p) { return t.bce_with_logits_sum(p[0], targets); },
             {rt({2, 3}, s)}, 1e-5);
       }},
      {"sum_squares",
       [&](std::uint64_t s) {
         return grad_check([](Tape& t, std::span<const Var> p) { return t.sum_squares(p[0]); }, {rt({5}, s)}, 1e-5);
       }},
      {"scale+sum+add+reshape",
       [&](std::uint64_t s) {
         return grad_check(
             [readout](Tape& t, std::span<const Var> p) {
               const Var r = t.reshape(t.add(p[0], p[1]), {6});
               return t.sum(t.mul(t.scale(r, 0.7), r));
             },
             {rt({2, 3}, s), rt({2, 3}, s + 100)}, 1e-5);
       }},
  };
  for (const auto& [name, run] : cases) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, run(s).max_relative_error);
    INFO(std::string(name));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("relu passes the finite-difference check away from the kink") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tensor x = oracle::random_tensor({6}, s);
    for (std::size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x[i]) < 1e-3) x[i] = 0.5;
    const auto r = grad_check([](Tape& t, std::span<const Var> p) { return t.sum_squares(t.relu(p[0])); }, {x}, 1e-5);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("unused parameters receive zero gradient") {
  Tape tape;
  const Var a = tape.parameter(Tensor::vector({1, 2}));
  const Var unused = tape.parameter(Tensor::vector({5, 6}));
  tape.backward(tape.sum_squares(a));
  CHECK(tape.grad(unused) == Tensor::vector({0, 0}));
  CHECK(tape.grad(a) == Tensor::vector({2, 4}));
}

TEST_CASE("forward results are bitwise deterministic") {
  const Tensor x = oracle::random_tensor({4, 5}, 1), w = oracle::random_tensor({5, 3}, 2), b = oracle::random_tensor({3}, 3);
  Tape t1, t2;
  const Var o1 = t1.affine(t1.constant(x), t1.constant(w), t1.constant(b));
  const Var o2 = t2.affine(t2.constant(x), t2.constant(w), t2.constant(b));
  CHECK(t1.value(o1) == t2.value(o2));
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));
  // splitmix64 reference value for input 0
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}
