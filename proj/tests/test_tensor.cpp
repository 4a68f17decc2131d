#include <doctest.h>

#include <cmath>
#include <random>

#include "idte/error.hpp"
#include "idte/tensor.hpp"
#include "support/oracles.hpp"

using namespace idte;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(shape);
    std::normal_distribution<double> nd(0.0, scale);
    for (auto& x : t.data()) x = nd(rng);
    return t;
}

// Gradient of a scalar function of named inputs, checked by central differences.
double fd_worst(ModelParams params, const std::function<Var(graph::ParamBinder&)>& build) {
    auto eval = [&](const ModelParams& p) {
        Tape tape;
        graph::ParamBinder bind(tape, p);
        return build(bind).value().item();
    };
    Tape tape;
    graph::ParamBinder bind(tape, params);
    Var loss = build(bind);
    auto grads = tape.backward(loss, &params);
    return oracle::check_gradients(params, grads, eval).worst;
}

}  // namespace

TEST_CASE("matmul by identity returns the input") {
    std::mt19937_64 rng(1);
    Tape tape;
    Tensor a = random_tensor({3, 4}, rng);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
    Var out = ops::matmul(tape.constant(a), tape.constant(eye));
    CHECK(out.value().vec() == a.vec());
}

TEST_CASE("softmax of equal logits is uniform") {
    Tape tape;
    Var out = ops::softmax_rows(tape.constant(Tensor({1, 3}, {0.0, 0.0, 0.0})));
    for (double v : out.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("layer_norm on 1,2,3") {
    Tape tape;
    Var out = ops::layer_norm(tape.constant(Tensor({1, 3}, {1.0, 2.0, 3.0})));
    const double expect = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
    CHECK(out.value()(0, 0) == doctest::Approx(-expect).epsilon(1e-12));
    CHECK(std::abs(out.value()(0, 1)) < 1e-15);
    CHECK(out.value()(0, 2) == doctest::Approx(1.22474).epsilon(1e-5));
}

TEST_CASE("softmax rows are distributions") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        Var out = ops::softmax_rows(tape.constant(random_tensor({5, 7}, rng, 20.0)));
        for (std::size_t r = 0; r < 5; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) {
                CHECK(out.value()(r, c) >= 0.0);
                s += out.value()(r, c);
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
    std::mt19937_64 rng(3);
    for (double scale : {0.05, 1.0, 3.0, 20.0}) {
        Tape tape;
        Tensor in = random_tensor({4, 9}, rng, scale);
        Var out = ops::layer_norm(tape.constant(in));
        for (std::size_t r = 0; r < 4; ++r) {
            double mi = 0.0, vi = 0.0, m = 0.0, v = 0.0;
            for (std::size_t c = 0; c < 9; ++c) mi += in(r, c), m += out.value()(r, c);
            mi /= 9, m /= 9;
            for (std::size_t c = 0; c < 9; ++c) {
                vi += (in(r, c) - mi) * (in(r, c) - mi);
                v += (out.value()(r, c) - m) * (out.value()(r, c) - m);
            }
            vi /= 9, v /= 9;
            CHECK(std::abs(m) < 1e-9);
            // the stabilizer shrinks the variance to vi / (vi + eps)
            CHECK(std::abs(v - vi / (vi + kLayerNormEps)) < 1e-12);
            if (vi >= 10.0) CHECK(std::abs(v - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("product rule on scalars") {
    ModelParams p;
    p.tensors["x"] = Tensor({1}, {3.0});
    p.tensors["y"] = Tensor({1}, {-2.5});
    Tape tape;
    Var loss = ops::mul(tape.param("x", p.at("x")), tape.param("y", p.at("y")));
    auto g = tape.backward(loss);
    CHECK(g.at("x").data()[0] == -2.5);
    CHECK(g.at("y").data()[0] == 3.0);
}

TEST_CASE("sum of softmax has zero gradient") {
    std::mt19937_64 rng(4);
    ModelParams p;
    p.tensors["z"] = random_tensor({3, 5}, rng);
    Tape tape;
    Var loss = ops::sum(ops::softmax_rows(tape.param("z", p.at("z"))));
    auto g = tape.backward(loss);
    for (double v : g.at("z").data()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("gradients accumulate over usage sites and unreached params are zero") {
    ModelParams p;
    p.tensors["x"] = Tensor({1}, {2.0});
    p.tensors["unused"] = Tensor({2, 2}, 1.0);
    Tape tape;
    Var x = tape.param("x", p.at("x"));
    Var loss = ops::add(ops::mul(x, x), x);  // x^2 + x
    auto g = tape.backward(loss, &p);
    CHECK(g.at("x").data()[0] == doctest::Approx(5.0));
    REQUIRE(g.count("unused") == 1);
    for (double v : g.at("unused").data()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
    Tape tape;
    Var v = tape.constant(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(v), ContractError);
}

TEST_CASE("shape mismatch names the op and shapes") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 3}));
    Var b = tape.constant(Tensor({2, 3}));
    try {
        ops::matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string what = e.what();
        CHECK(what.find("matmul") != std::string::npos);
        CHECK(what.find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(ops::add(a, tape.constant(Tensor({3, 2}))), DimensionError);
}

TEST_CASE("non-finite output raises NumericError") {
    Tape tape;
    Var a = tape.constant(Tensor({1}, {1e300}));
    CHECK_THROWS_AS(ops::mul(a, a), NumericError);
}

TEST_CASE("tensor_op dispatch matches direct calls") {
    std::mt19937_64 rng(5);
    Tape tape;
    Var a = tape.constant(random_tensor({2, 3}, rng));
    Var b = tape.constant(random_tensor({3, 2}, rng));
    std::vector<Var> mm{a, b};
    CHECK(tensor_op(OpKind::matmul, mm).value().vec() == ops::matmul(a, b).value().vec());
    std::vector<Var> one{a};
    CHECK(tensor_op(OpKind::gelu, one).value().vec() == ops::gelu(a).value().vec());
    Var table = tape.constant(random_tensor({5, 3}, rng));
    Var ids = tape.constant(Tensor({2}, {4.0, 1.0}));
    std::vector<Var> emb{table, ids};
    Var rows = tensor_op(OpKind::embedding_lookup, emb);
    CHECK(rows.value()(0, 2) == table.value()(4, 2));
    CHECK(rows.value()(1, 0) == table.value()(1, 0));
}

TEST_CASE("finite-difference agreement per op") {
    std::mt19937_64 rng(6);
    ModelParams p;
    p.tensors["a"] = random_tensor({3, 4}, rng);
    p.tensors["b"] = random_tensor({4, 2}, rng);
    p.tensors["c"] = random_tensor({3, 4}, rng);
    p.tensors["r"] = random_tensor({1, 4}, rng);
    p.tensors["w"] = random_tensor({3, 4}, rng);  // fixed weights to make scalars non-trivial
    auto weigh = [](graph::ParamBinder& b, Var x) { return ops::sum(ops::mul(x, b("w"))); };

    SUBCASE("matmul") {
        CHECK(fd_worst(p, [](auto& b) { return ops::sum(ops::mul(ops::matmul(b("a"), b("b")), ops::matmul(b("a"), b("b")))); }) < 1e-6);
    }
    SUBCASE("add and broadcast") {
        CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::mul(ops::add(b("a"), b("r")), b("c"))); }) < 1e-6);
    }
    SUBCASE("softmax") { CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::softmax_rows(b("a"))); }) < 1e-6); }
    SUBCASE("layer_norm") { CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::layer_norm(b("a"))); }) < 1e-6); }
    SUBCASE("gelu") { CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::gelu(b("a"))); }) < 1e-6); }
    SUBCASE("sigmoid") { CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::sigmoid(b("a"))); }) < 1e-6); }
    SUBCASE("embedding with repeated ids") {
        std::vector<int> ids{2, 0, 2};
        CHECK(fd_worst(p, [&](auto& b) { return weigh(b, ops::embedding_lookup(b("c"), ids)); }) < 1e-6);
    }
    SUBCASE("concat, slice, transpose, mean, reshape, scale") {
        CHECK(fd_worst(p, [&](auto& b) {
                  std::vector<Var> rows{ops::slice_rows(b("a"), 1, 2), ops::mean_rows(b("c"))};
                  Var x = ops::concat_rows(rows);
                  std::vector<Var> cols{ops::slice_cols(x, 0, 2), ops::slice_cols(ops::scale(b("c"), 0.5), 2, 2)};
                  Var y = ops::concat_cols(cols);
                  Var z = ops::reshape(ops::transpose(ops::transpose(y)), {3, 4});
                  return weigh(b, ops::mul(z, z));
              }) < 1e-6);
    }
}
