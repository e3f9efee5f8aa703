#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

using namespace signet;
using TensorD = TensorT<double>;
using TapeD = TapeT<double>;

namespace {

TensorD random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t = TensorD::zeros(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping", "[tensor]") {
    Tensor t = Tensor::zeros({2, 3, 4});
    REQUIRE(t.size() == 24);
    REQUIRE(t.shape() == std::vector<std::size_t>{2, 3, 4});
    REQUIRE_THROWS_AS(Tensor::from({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
    REQUIRE_THROWS_AS(t.item(), std::invalid_argument);
}

TEST_CASE("backward of sum is all ones", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({4}, {1.0, -2.0, 3.0, 0.5});
    x.set_requires_grad(true);
    TensorD loss = sum(x);
    backward(tape, loss);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(x.grad()[i] == 1.0);
}

TEST_CASE("backward of sum of squares is 2x", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({3}, {1.0, -2.0, 3.0});
    x.set_requires_grad(true);
    TensorD loss = sum(mul(x, x));
    backward(tape, loss);
    REQUIRE(x.grad()[0] == Catch::Approx(2.0));
    REQUIRE(x.grad()[1] == Catch::Approx(-4.0));
    REQUIRE(x.grad()[2] == Catch::Approx(6.0));
}

TEST_CASE("backward requires a scalar root", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    TensorD y = mul(x, x);
    REQUIRE_THROWS_AS(backward(tape, y), std::invalid_argument);
}

TEST_CASE("backward over an empty tape is a no-op", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::scalar(3.0);
    x.set_requires_grad(true);
    backward(tape, x);
    REQUIRE(tape.entries.empty());
}

TEST_CASE("repeated backward accumulates additively", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    TensorD loss = sum(x);
    backward(tape, loss);
    backward(tape, loss);
    REQUIRE(x.grad()[0] == 2.0);
    REQUIRE(x.grad()[1] == 2.0);
}

TEST_CASE("matmul gradients match finite differences", "[tensor]") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        TensorD a = random_tensor({3, 4}, rng);
        TensorD b = random_tensor({4, 2}, rng);
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        auto run = [&]() {
            TapeD tape;
            TapeScope<double> scope(tape);
            return sum(square(matmul(a, b))).item();
        };
        auto fd_a = oracle::finite_diff(a.data(), run);
        auto fd_b = oracle::finite_diff(b.data(), run);

        TapeD tape;
        TapeScope<double> scope(tape);
        TensorD loss = sum(square(matmul(a, b)));
        backward(tape, loss);
        REQUIRE(oracle::max_rel_err(a.grad(), fd_a) < 1e-6);
        REQUIRE(oracle::max_rel_err(b.grad(), fd_b) < 1e-6);
    }
}

TEST_CASE("elementwise op gradients match finite differences", "[tensor]") {
    Rng rng(12);
    TensorD x = random_tensor({6}, rng, 0.3, 2.0);  // positive, sqrt/reciprocal safe
    x.set_requires_grad(true);
    auto run = [&]() {
        TapeD tape;
        TapeScope<double> scope(tape);
        TensorD y = add(sqrt_t(x), reciprocal(add_scalar(x, 0.5)));
        return mean(square(y)).item();
    };
    auto fd = oracle::finite_diff(x.data(), run);
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD y = add(sqrt_t(x), reciprocal(add_scalar(x, 0.5)));
    backward(tape, mean(square(y)));
    REQUIRE(oracle::max_rel_err(x.grad(), fd) < 1e-6);
}

TEST_CASE("row and column reductions invert their broadcasts", "[tensor]") {
    Rng rng(13);
    TensorD x = random_tensor({4, 3}, rng);
    x.set_requires_grad(true);
    auto run = [&]() {
        TapeD tape;
        TapeScope<double> scope(tape);
        TensorD r = row_sums(x);
        TensorD c = col_sums(x);
        return add(sum(square(r)), sum(square(c))).item();
    };
    auto fd = oracle::finite_diff(x.data(), run);
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD loss = add(sum(square(row_sums(x))), sum(square(col_sums(x))));
    backward(tape, loss);
    REQUIRE(oracle::max_rel_err(x.grad(), fd) < 1e-6);
}

TEST_CASE("grad_of returns zeros for disconnected tensors", "[tensor]") {
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({2}, {1.0, 2.0});
    TensorD z = TensorD::from({2}, {5.0, 6.0});
    x.set_requires_grad(true);
    z.set_requires_grad(true);
    TensorD loss = sum(square(x));
    auto grads = grad_of(tape, loss, {z}, false);
    REQUIRE(grads[0].data() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("second-order gradient through grad_of", "[tensor]") {
    // f(x) = sum(x^3); g = df/dx = 3x^2; h = sum(g) has dh/dx = 6x.
    TapeD tape;
    TapeScope<double> scope(tape);
    TensorD x = TensorD::from({3}, {1.0, 2.0, -1.5});
    x.set_requires_grad(true);
    TensorD f = sum(mul(x, square(x)));
    TensorD g = grad_of(tape, f, {x}, /*create_graph=*/true)[0];
    TensorD h = sum(g);
    backward(tape, h);
    REQUIRE(x.grad()[0] == Catch::Approx(6.0));
    REQUIRE(x.grad()[1] == Catch::Approx(12.0));
    REQUIRE(x.grad()[2] == Catch::Approx(-9.0));
}

TEST_CASE("tape replay determinism", "[tensor]") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        TapeD tape;
        TapeScope<double> scope(tape);
        TensorD a = random_tensor({5, 5}, rng);
        TensorD b = random_tensor({5, 5}, rng);
        a.set_requires_grad(true);
        TensorD loss = sum(square(matmul(a, b)));
        backward(tape, loss);
        return std::make_pair(loss.item(), a.grad());
    };
    auto r1 = run(99);
    auto r2 = run(99);
    REQUIRE(r1.first == r2.first);
    REQUIRE(r1.second == r2.second);
}

TEST_CASE("rng streams are deterministic and forkable", "[rng]") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    // fork depends on the seed, not the draw position
    Rng c(7);
    REQUIRE(c.fork(3).next_u64() == a.fork(3).next_u64());
    // distinct streams diverge
    REQUIRE(Rng(7, 1).next_u64() != Rng(7, 2).next_u64());
}
