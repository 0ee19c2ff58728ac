#include <doctest.h>

#include <random>

#include "avtrack/autodiff.hpp"
#include "gradcheck.hpp"

using namespace avtrack;
using namespace avtrack::nn;
using testutil::grad_check;
using testutil::randn;

namespace {
Var weighted(const Var& x, std::mt19937_64& rng) {
    // Reduce to a scalar through fixed random weights so every element of x
    // influences the output with a distinct coefficient.
    auto w = constant(randn(x->val.rows, x->val.cols, rng));
    return sum_all(mul(x, w));
}
}  // namespace

TEST_CASE("elementwise and broadcast op gradients match finite differences") {
    std::mt19937_64 rng(7);
    auto a = leaf(randn(3, 4, rng));
    auto b = leaf(randn(3, 4, rng));
    auto rv = leaf(randn(1, 4, rng));
    std::vector<Var> leaves = {a, b, rv};

    auto res = grad_check(leaves, [&] {
        std::mt19937_64 wrng(11);
        auto t1 = mul(add(a, b), sub(a, scale(b, 0.7)));
        auto t2 = add_rowvec(t1, rv);
        auto t3 = silu(t2);
        auto t4 = add(sigmoid(t1), softplus(scale(t2, 0.3)));
        return add(weighted(t3, wrng), weighted(t4, wrng));
    });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("exp/log/abs/clamp gradients") {
    std::mt19937_64 rng(13);
    auto a = leaf(randn(2, 5, rng));
    auto res = grad_check({a}, [&] {
        std::mt19937_64 wrng(3);
        auto e = exp_op(scale(a, 0.5));
        auto l = log_clamped(add_scalar(mul(a, a), 0.5), 1e-12);
        auto ab = abs_op(add_scalar(a, 0.3));
        auto cl = clamp_op(a, -0.5, 0.5);
        return add(add(weighted(e, wrng), weighted(l, wrng)),
                   add(weighted(ab, wrng), weighted(cl, wrng)));
    });
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("matmul / transpose / concat / slice gradients") {
    std::mt19937_64 rng(17);
    auto a = leaf(randn(3, 4, rng));
    auto b = leaf(randn(4, 2, rng));
    auto c = leaf(randn(2, 4, rng));
    auto res = grad_check({a, b, c}, [&] {
        std::mt19937_64 wrng(5);
        auto m = matmul(a, b);                      // 3x2
        auto t = transpose_op(m);                   // 2x3
        auto cat = concat_rows({a, c});             // 5x4
        auto sl = slice_rows(cat, 1, 3);            // 3x4
        auto sc = slice_cols(cat, 1, 2);            // 5x2
        auto cc = concat_cols({sl, slice_rows(sc, 0, 3)});  // 3x6
        auto fl = flip_rows(cc);
        return add(weighted(t, wrng), add(weighted(fl, wrng), weighted(m, wrng)));
    });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax / rmsnorm / dwconv gradients") {
    std::mt19937_64 rng(23);
    auto x = leaf(randn(5, 6, rng));
    auto g = leaf(randn(1, 6, rng, 0.5));
    auto w = leaf(randn(4, 6, rng, 0.4));
    auto b = leaf(randn(1, 6, rng, 0.1));
    auto res = grad_check({x, g, w, b}, [&] {
        std::mt19937_64 wrng(29);
        auto sm = softmax_rows(x);
        auto rn = rmsnorm_rows(x, g);
        auto cv = dwconv_causal(x, w, b);
        return add(weighted(sm, wrng), add(weighted(rn, wrng), weighted(cv, wrng)));
    });
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("selective scan gradients (zoh and euler)") {
    std::mt19937_64 rng(31);
    const int T = 6, P = 3, S = 4;
    for (bool zoh : {true, false}) {
        CAPTURE(zoh);
        auto u = leaf(randn(T, P, rng));
        auto draw = randn(T, P, rng);
        for (double& v : draw.v) v = 0.05 + std::fabs(v) * 0.3;  // delta > 0
        auto delta = leaf(draw);
        auto A = randn(P, S, rng);
        for (double& v : A.v) v = -0.2 - std::fabs(v);  // strictly negative
        auto Av = leaf(A);
        auto B = leaf(randn(T, S, rng));
        auto C = leaf(randn(T, S, rng));
        auto res = grad_check({u, delta, Av, B, C}, [&] {
            std::mt19937_64 wrng(37);
            return weighted(selective_scan(u, delta, Av, B, C, zoh), wrng);
        });
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("scale_by scalar and detach") {
    std::mt19937_64 rng(41);
    auto x = leaf(randn(2, 3, rng));
    auto s = leaf(Tensor::scalar(0.7));
    auto res = grad_check({x, s}, [&] {
        std::mt19937_64 wrng(43);
        return weighted(scale_by(x, s), wrng);
    });
    CHECK(res.max_rel_err < 1e-6);

    // detach blocks gradient flow entirely
    zero_grad({x});
    auto out = sum_all(mul(detach(x), x));
    backward(out);
    for (size_t i = 0; i < x->val.v.size(); ++i)
        CHECK(x->grad.v[i] == doctest::Approx(x->val.v[i]));  // only the non-detached path
}

TEST_CASE("graph reuse accumulates gradients once per path") {
    auto x = leaf(Tensor::scalar(3.0));
    auto y = mul(x, x);        // x^2
    auto z = add(y, y);        // 2 x^2, reuses node y
    backward(sum_all(z));
    CHECK(x->grad.v[0] == doctest::Approx(12.0));  // d/dx 2x^2 = 4x
}

TEST_CASE("selective_scan rejects bad inputs") {
    auto u = constant(Tensor::zeros(3, 2));
    auto A = constant(Tensor::full(2, 2, -1.0));
    auto B = constant(Tensor::zeros(3, 2));
    auto C = constant(Tensor::zeros(3, 2));
    auto bad_delta = constant(Tensor::zeros(3, 2));  // not > 0
    CHECK_THROWS_AS(selective_scan(u, bad_delta, A, B, C), NumericError);
    auto bad_B = constant(Tensor::zeros(2, 2));
    auto delta = constant(Tensor::full(3, 2, 0.1));
    CHECK_THROWS_AS(selective_scan(u, delta, A, bad_B, C), ShapeError);
}
