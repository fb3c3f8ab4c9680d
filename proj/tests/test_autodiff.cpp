#include <cmath>
#include <vector>

#include "doctest.h"
#include "segdesic/autodiff.hpp"
#include "segdesic/errors.hpp"
#include "segdesic/parallel.hpp"
#include "segdesic/rng.hpp"
#include "support/fd_check.hpp"

using namespace segdesic;
using segdesic::testing::fd_check_input;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Nested-loop cross-correlation, written independently of the library kernel.
Tensor conv2d_loops(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({n, co, oh, ow});
    for (int ni = 0; ni < n; ++ni)
        for (int c = 0; c < co; ++c)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double acc = b.numel() > 0 ? b[static_cast<std::size_t>(c)] : 0.0;
                    for (int ic = 0; ic < ci; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                int iy = y * stride + ky - pad;
                                int ix = xx * stride + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                acc += x.at4(ni, ic, iy, ix) * w.at4(c, ic, ky, kx);
                            }
                    out.at4(ni, c, y, xx) = acc;
                }
    return out;
}

Variable leaf(Tensor t, bool grad = true) { return Variable(std::move(t), grad); }

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("tensor shape checks") {
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
}

TEST_CASE("conv2d of all-ones sums the window") {
    Variable x = leaf(Tensor::full({1, 1, 3, 3}, 1.0), false);
    Variable w = leaf(Tensor::full({1, 1, 3, 3}, 1.0), false);
    Variable b = leaf(Tensor({1}), false);
    Variable y = conv2d(x, w, b, 1, 0);
    REQUIRE(y.value().shape() == std::vector<int>{1, 1, 1, 1});
    CHECK(y.value()[0] == 9.0);
}

TEST_CASE("identity kernel reproduces the input") {
    Rng rng(1);
    Variable x = leaf(random_tensor({2, 1, 4, 5}, rng), false);
    Tensor wt({1, 1, 3, 3});
    wt.at4(0, 0, 1, 1) = 1.0;
    Variable w = leaf(std::move(wt), false);
    Variable y = conv2d(x, w, Variable(), 1, 1);
    REQUIRE(y.value().same_shape(x.value()));
    for (std::size_t i = 0; i < y.value().numel(); ++i)
        CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Rng rng(2);
    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            Tensor xt = random_tensor({1, 2, 5, 5}, rng);
            Tensor wt = random_tensor({3, 2, 3, 3}, rng);
            Tensor bt = random_tensor({3}, rng);
            Variable y = conv2d(leaf(xt, false), leaf(wt, false), leaf(bt, false), stride, pad);
            Tensor expect = conv2d_loops(xt, wt, bt, stride, pad);
            REQUIRE(y.value().same_shape(expect));
            for (std::size_t i = 0; i < expect.numel(); ++i)
                CHECK(std::fabs(y.value()[i] - expect[i]) < 1e-12);
        }
    }
}

TEST_CASE("conv2d is linear in its input") {
    Rng rng(3);
    Tensor xt = random_tensor({1, 2, 6, 6}, rng);
    Tensor yt = random_tensor({1, 2, 6, 6}, rng);
    Tensor wt = random_tensor({2, 2, 3, 3}, rng);
    double a = 1.7, c = -0.6;
    Tensor mix({1, 2, 6, 6});
    for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * xt[i] + c * yt[i];
    Variable w = leaf(wt, false);
    Variable lhs = conv2d(leaf(mix, false), w, Variable(), 1, 1);
    Variable fx = conv2d(leaf(xt, false), w, Variable(), 1, 1);
    Variable fy = conv2d(leaf(yt, false), w, Variable(), 1, 1);
    for (std::size_t i = 0; i < lhs.value().numel(); ++i)
        CHECK(std::fabs(lhs.value()[i] - (a * fx.value()[i] + c * fy.value()[i])) < 1e-10);
}

TEST_CASE("conv2d shape errors") {
    Variable x = leaf(Tensor({1, 2, 4, 4}), false);
    Variable w = leaf(Tensor({1, 3, 3, 3}), false);
    CHECK_THROWS_AS(conv2d(x, w, Variable(), 1, 0), ShapeError);
    Variable w2 = leaf(Tensor({1, 2, 5, 5}), false);
    CHECK_THROWS_AS(conv2d(x, w2, Variable(), 1, 0), ShapeError);
}

TEST_CASE("conv2d is deterministic across worker counts") {
    Rng rng(4);
    Tensor xt = random_tensor({2, 3, 8, 8}, rng);
    Tensor wt = random_tensor({4, 3, 3, 3}, rng);
    Tensor bt = random_tensor({4}, rng);
    set_worker_count(1);
    Variable y1 = conv2d(leaf(xt, false), leaf(wt, false), leaf(bt, false), 2, 1);
    set_worker_count(3);
    Variable y3 = conv2d(leaf(xt, false), leaf(wt, false), leaf(bt, false), 2, 1);
    set_worker_count(0);
    for (std::size_t i = 0; i < y1.value().numel(); ++i)
        CHECK(y1.value()[i] == y3.value()[i]);
}

TEST_CASE("transposed conv doubles the spatial dims at stride 2") {
    Variable x = leaf(Tensor::full({1, 1, 2, 2}, 1.0), false);
    Variable w = leaf(Tensor::full({1, 1, 2, 2}, 1.0), false);
    Variable y = conv2d_transpose(x, w, Variable(), 2, 0);
    CHECK(y.value().shape() == std::vector<int>{1, 1, 4, 4});
}

TEST_CASE("transposed conv of zeros broadcasts the bias") {
    Variable x = leaf(Tensor({1, 2, 3, 3}), false);
    Rng rng(5);
    Variable w = leaf(random_tensor({2, 4, 2, 2}, rng), false);
    Tensor bt({4});
    bt[0] = 0.5;
    bt[1] = -1.5;
    bt[2] = 2.0;
    bt[3] = 0.0;
    Variable y = conv2d_transpose(x, w, leaf(bt, false), 2, 0);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) CHECK(y.value().at4(0, c, i, j) == bt[c]);
}

TEST_CASE("transposed conv equals the conv2d input gradient") {
    Rng rng(6);
    for (int stride : {1, 2}) {
        Tensor xt = random_tensor({1, 2, 5, 5}, rng);
        Tensor wt = random_tensor({3, 2, 3, 3}, rng); // conv weight [co, ci, kh, kw]
        int pad = 1;
        Variable xv = leaf(xt, true);
        Variable y = conv2d(xv, leaf(wt, false), Variable(), stride, pad);
        Tensor g = random_tensor(y.value().shape(), rng);
        Variable loss = sum(mul_const(y, g));
        backward(loss);

        // same raw buffer viewed as [ci=co, co=ci, kh, kw] for the transpose
        Variable z = conv2d_transpose(leaf(g, false), leaf(wt, false), Variable(), stride, pad);
        REQUIRE(z.value().same_shape(xv.grad()));
        for (std::size_t i = 0; i < z.value().numel(); ++i)
            CHECK(std::fabs(z.value()[i] - xv.grad()[i]) < 1e-12);
    }
}

TEST_CASE("max pool basics and tie-break") {
    Tensor xt({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    Variable x = leaf(xt, true);
    Variable y = max_pool2(x);
    CHECK(y.value()[0] == 4.0);

    Variable c = leaf(Tensor::full({1, 1, 2, 2}, 7.0), true);
    Variable yc = max_pool2(c);
    CHECK(yc.value()[0] == 7.0);
    backward(sum(yc));
    CHECK(c.grad()[0] == 1.0); // first element of the window wins ties
    CHECK(c.grad()[1] == 0.0);
    CHECK(c.grad()[2] == 0.0);
    CHECK(c.grad()[3] == 0.0);
}

TEST_CASE("max pool matches a loop oracle") {
    Rng rng(7);
    Tensor xt = random_tensor({2, 3, 6, 8}, rng);
    Variable y = max_pool2(leaf(xt, false));
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 4; ++j) {
                    double m = xt.at4(n, c, 2 * i, 2 * j);
                    m = std::max(m, xt.at4(n, c, 2 * i, 2 * j + 1));
                    m = std::max(m, xt.at4(n, c, 2 * i + 1, 2 * j));
                    m = std::max(m, xt.at4(n, c, 2 * i + 1, 2 * j + 1));
                    CHECK(y.value().at4(n, c, i, j) == m);
                }
    CHECK_THROWS_AS(max_pool2(leaf(Tensor({1, 1, 1, 4}), false)), ShapeError);
}

TEST_CASE("global max pool reduces the plane") {
    Rng rng(8);
    Tensor xt = random_tensor({2, 3, 4, 4}, rng);
    Variable x = leaf(xt, true);
    Variable y = global_max_pool(x);
    REQUIRE(y.value().shape() == std::vector<int>{2, 3});
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c) {
            double m = -1e300;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) m = std::max(m, xt.at4(n, c, i, j));
            CHECK(y.value().at2(n, c) == m);
        }
    backward(sum(y));
    double total = 0.0;
    for (std::size_t i = 0; i < x.grad().numel(); ++i) total += x.grad()[i];
    CHECK(total == 6.0); // one unit per (n, c) plane
}

TEST_CASE("batch norm train mode standardizes per feature") {
    Rng rng(9);
    Tensor xt = random_tensor({8, 5}, rng, -3.0, 5.0);
    Variable x = leaf(xt, false);
    Variable gamma = leaf(Tensor::full({5}, 1.0), false);
    Variable beta = leaf(Tensor({5}), false);
    Variable rm = leaf(Tensor({5}), false);
    Variable rv = leaf(Tensor::full({5}, 1.0), false);
    Variable y = batch_norm(x, gamma, beta, rm, rv, true);
    for (int f = 0; f < 5; ++f) {
        double mean = 0.0, var = 0.0;
        for (int n = 0; n < 8; ++n) mean += y.value().at2(n, f);
        mean /= 8.0;
        for (int n = 0; n < 8; ++n) {
            double d = y.value().at2(n, f) - mean;
            var += d * d;
        }
        var /= 8.0;
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(std::fabs(var - 1.0) < 1e-4);
    }
    // running stats moved toward the batch stats
    CHECK(rm.value()[0] != 0.0);
}

TEST_CASE("batch norm eval mode with unit stats is a near identity") {
    Rng rng(10);
    Tensor xt = random_tensor({4, 3}, rng);
    Variable x = leaf(xt, false);
    Variable gamma = leaf(Tensor::full({3}, 1.0), false);
    Variable beta = leaf(Tensor({3}), false);
    Variable rm = leaf(Tensor({3}), false);
    Variable rv = leaf(Tensor::full({3}, 1.0), false);
    Variable y = batch_norm(x, gamma, beta, rm, rv, false);
    for (std::size_t i = 0; i < xt.numel(); ++i)
        CHECK(std::fabs(y.value()[i] - xt[i]) < 1e-4 * std::fabs(xt[i]) + 1e-9);
}

TEST_CASE("batch norm rejects a train-mode batch of one") {
    Variable x = leaf(Tensor({1, 3}), false);
    Variable gamma = leaf(Tensor::full({3}, 1.0), false);
    Variable beta = leaf(Tensor({3}), false);
    Variable rm = leaf(Tensor({3}), false);
    Variable rv = leaf(Tensor::full({3}, 1.0), false);
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, rm, rv, true), ValueError);
    CHECK_NOTHROW(batch_norm(x, gamma, beta, rm, rv, false));
}

TEST_CASE("relu clamps negatives") {
    Tensor xt({1, 4}, {-2.0, -0.1, 0.0, 3.5});
    Variable y = relu(leaf(xt, false));
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == 0.0);
    CHECK(y.value()[2] == 0.0);
    CHECK(y.value()[3] == 3.5);
}

TEST_CASE("softmax of zeros is uniform") {
    Variable y = softmax_over_classes(leaf(Tensor({2, 5}), false));
    for (std::size_t i = 0; i < y.value().numel(); ++i)
        CHECK(y.value()[i] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax is positive, normalized and shift-stable") {
    Rng rng(11);
    Tensor xt = random_tensor({2, 4, 3, 3}, rng, -30.0, 30.0);
    Variable y = softmax_over_classes(leaf(xt, false));
    for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) {
                    CHECK(y.value().at4(n, k, i, j) > 0.0);
                    s += y.value().at4(n, k, i, j);
                }
                CHECK(std::fabs(s - 1.0) < 1e-9);
            }
    // large offsets do not overflow
    Tensor big = xt;
    for (std::size_t i = 0; i < big.numel(); ++i) big[i] += 5000.0;
    Variable yb = softmax_over_classes(leaf(big, false));
    CHECK(yb.value().all_finite());
}

TEST_CASE("cross entropy of the uniform prediction is log K") {
    int k = 6;
    Tensor probs = Tensor::full({1, k, 2, 2}, 1.0 / k);
    Tensor labels({1, 2, 2}, {0.0, 1.0, 5.0, 3.0});
    Variable loss = cross_entropy(leaf(probs, false), labels);
    CHECK(loss.value()[0] == doctest::Approx(1.791759469228055).epsilon(1e-12));
}

TEST_CASE("cross entropy of a clamped one-hot is about 1e-7") {
    int k = 3;
    Tensor probs({1, k, 1, 1});
    probs.at4(0, 0, 0, 0) = 1.0 - 1e-7;
    probs.at4(0, 1, 0, 0) = 5e-8;
    probs.at4(0, 2, 0, 0) = 5e-8;
    Tensor labels({1, 1, 1}, {0.0});
    Variable loss = cross_entropy(leaf(probs, false), labels);
    CHECK(loss.value()[0] == doctest::Approx(1e-7).epsilon(1e-4));
}

TEST_CASE("cross entropy two-pixel hand case") {
    Tensor probs({1, 2, 1, 2});
    probs.at4(0, 0, 0, 0) = 0.7;
    probs.at4(0, 1, 0, 0) = 0.3;
    probs.at4(0, 0, 0, 1) = 0.2;
    probs.at4(0, 1, 0, 1) = 0.8;
    Tensor labels({1, 1, 2}, {0.0, 0.0});
    Variable loss = cross_entropy(leaf(probs, false), labels);
    CHECK(loss.value()[0] == doctest::Approx(0.9830564281864164).epsilon(1e-12));
}

TEST_CASE("cross entropy ignore semantics and errors") {
    Tensor probs = Tensor::full({1, 2, 1, 2}, 0.5);
    Tensor labels({1, 1, 2}, {0.0, 255.0});
    Variable loss = cross_entropy(leaf(probs, false), labels, 255);
    CHECK(loss.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor all_ignored({1, 1, 2}, {255.0, 255.0});
    CHECK_THROWS_AS(cross_entropy(leaf(probs, false), all_ignored, 255), ValueError);
    Tensor bad({1, 1, 2}, {0.0, 7.0});
    CHECK_THROWS_AS(cross_entropy(leaf(probs, false), bad, 255), ValueError);
    Tensor frac({1, 1, 2}, {0.0, 0.5});
    CHECK_THROWS_AS(cross_entropy(leaf(probs, false), frac, 255), ValueError);
}

TEST_CASE("normalize_rows l1 gives unit l1 rows") {
    Rng rng(12);
    Tensor xt = random_tensor({3, 6}, rng, -2.0, 2.0);
    Variable y = normalize_rows(leaf(xt, false), NormKind::L1);
    for (int r = 0; r < 3; ++r) {
        double l1 = 0.0;
        for (int c = 0; c < 6; ++c) l1 += std::fabs(y.value().at2(r, c));
        CHECK(std::fabs(l1 - 1.0) < 1e-12);
    }
}

TEST_CASE("cosine dissimilarity loss gradient is orthogonal to the prediction") {
    Rng rng(13);
    Tensor pred = random_tensor({2, 8}, rng, -1.0, 1.0);
    Tensor target = random_tensor({2, 8}, rng, -1.0, 1.0);
    Variable p = leaf(pred, true);
    Variable loss = cosine_dissimilarity_mean(p, target);
    backward(loss);
    for (int r = 0; r < 2; ++r) {
        double dot = 0.0, gnorm = 0.0, pnorm = 0.0;
        for (int c = 0; c < 8; ++c) {
            dot += p.grad().at2(r, c) * pred.at2(r, c);
            gnorm += p.grad().at2(r, c) * p.grad().at2(r, c);
            pnorm += pred.at2(r, c) * pred.at2(r, c);
        }
        CHECK(std::fabs(dot) < 1e-10 * std::sqrt(gnorm) * std::sqrt(pnorm) + 1e-12);
    }
}

TEST_CASE("cosine dissimilarity loss of identical rows is zero") {
    Rng rng(14);
    Tensor pred = random_tensor({3, 5}, rng);
    Variable loss = cosine_dissimilarity_mean(leaf(pred, false), pred);
    CHECK(std::fabs(loss.value()[0]) < 1e-12);
}

TEST_CASE("backward of sum is all ones and unreachable grads stay zero") {
    Rng rng(15);
    Variable x = leaf(random_tensor({2, 3}, rng), true);
    Variable unused = leaf(random_tensor({2, 2}, rng), true);
    unused.zero_grad();
    backward(sum(x));
    for (std::size_t i = 0; i < x.grad().numel(); ++i) CHECK(x.grad()[i] == 1.0);
    for (std::size_t i = 0; i < unused.grad().numel(); ++i) CHECK(unused.grad()[i] == 0.0);
}

TEST_CASE("backward requires a recorded scalar") {
    Rng rng(16);
    Variable x = leaf(random_tensor({2, 2}, rng), true);
    CHECK_THROWS_AS(backward(relu(x)), ValueError); // non-scalar
    Variable frozen = leaf(random_tensor({2, 2}, rng), false);
    CHECK_THROWS_AS(backward(sum(frozen)), ValueError); // no graph
}

TEST_CASE("gradients accumulate across shared consumers") {
    Variable x = leaf(Tensor({1, 2}, {3.0, -1.0}), true);
    Variable y = add(x, x);
    backward(sum(y));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("graphs built twice give bit-identical gradients") {
    for (int run = 0; run < 2; ++run) {
        // fresh rng per run, same seed
        Rng rng(17);
        Tensor xt = random_tensor({2, 2, 4, 4}, rng);
        Tensor wt = random_tensor({3, 2, 3, 3}, rng);
        static Tensor grad_first;
        Variable x = leaf(xt, true);
        Variable y = conv2d(x, leaf(wt, false), Variable(), 1, 1);
        backward(sum(relu(y)));
        if (run == 0) {
            grad_first = x.grad();
        } else {
            for (std::size_t i = 0; i < grad_first.numel(); ++i)
                CHECK(x.grad()[i] == grad_first[i]);
        }
    }
}

TEST_CASE("no-grad scope suppresses graph recording") {
    Rng rng(18);
    Variable x = leaf(random_tensor({2, 2}, rng), true);
    NoGradGuard guard;
    Variable y = relu(x);
    CHECK_FALSE(y.requires_grad());
}

// ---- finite-difference checks ------------------------------------------------

TEST_CASE("fd: conv2d input, weight and bias") {
    Rng rng(19);
    Tensor xt = random_tensor({2, 2, 6, 6}, rng);
    Tensor wt = random_tensor({3, 2, 3, 3}, rng);
    Tensor bt = random_tensor({3}, rng);
    Tensor weights = random_tensor({2, 3, 3, 3}, rng);

    Variable x = leaf(xt), w = leaf(wt), b = leaf(bt);
    auto loss = [&] { return sum(mul_const(conv2d(x, w, b, 2, 1), weights)); };
    CHECK(fd_check_input(x, loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(w, loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(b, loss).max_rel_err < 1e-4);
}

TEST_CASE("fd: conv2d_transpose input, weight and bias") {
    Rng rng(20);
    Tensor xt = random_tensor({2, 3, 4, 4}, rng);
    Tensor wt = random_tensor({3, 2, 2, 2}, rng);
    Tensor bt = random_tensor({2}, rng);
    Tensor weights = random_tensor({2, 2, 8, 8}, rng);

    Variable x = leaf(xt), w = leaf(wt), b = leaf(bt);
    auto loss = [&] { return sum(mul_const(conv2d_transpose(x, w, b, 2, 0), weights)); };
    CHECK(fd_check_input(x, loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(w, loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(b, loss).max_rel_err < 1e-4);
}

TEST_CASE("fd: pooling") {
    Rng rng(21);
    // well-separated values keep the argmax stable under the fd step
    Tensor xt({1, 2, 4, 4});
    std::vector<int> perm(32);
    for (int i = 0; i < 32; ++i) perm[i] = i;
    rng.shuffle(perm);
    for (int i = 0; i < 32; ++i) xt[i] = 0.05 * perm[i] + rng.uniform(0.0, 0.01);
    Tensor w_pool = random_tensor({1, 2, 2, 2}, rng);
    Tensor w_glob = random_tensor({1, 2}, rng);

    Variable x = leaf(xt);
    auto loss_pool = [&] { return sum(mul_const(max_pool2(x), w_pool)); };
    CHECK(fd_check_input(x, loss_pool).max_rel_err < 1e-4);
    auto loss_glob = [&] { return sum(mul_const(global_max_pool(x), w_glob)); };
    CHECK(fd_check_input(x, loss_glob).max_rel_err < 1e-4);
}

TEST_CASE("fd: batch norm in both modes") {
    Rng rng(22);
    Tensor xt = random_tensor({4, 3, 2, 2}, rng, 0.5, 2.5);
    Tensor gt = random_tensor({3}, rng, 0.5, 1.5);
    Tensor bt = random_tensor({3}, rng);
    Tensor weights = random_tensor({4, 3, 2, 2}, rng);

    Variable x = leaf(xt), gamma = leaf(gt), beta = leaf(bt);
    Variable rm = leaf(Tensor({3}), false);
    Variable rv = leaf(Tensor::full({3}, 1.0), false);

    auto train_loss = [&] {
        return sum(mul_const(batch_norm(x, gamma, beta, rm, rv, true, false), weights));
    };
    CHECK(fd_check_input(x, train_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(gamma, train_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(beta, train_loss).max_rel_err < 1e-4);

    auto eval_loss = [&] {
        return sum(mul_const(batch_norm(x, gamma, beta, rm, rv, false), weights));
    };
    CHECK(fd_check_input(x, eval_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(gamma, eval_loss).max_rel_err < 1e-4);
}

TEST_CASE("fd: relu, linear, concat, softmax, mul") {
    Rng rng(23);
    Tensor xt = random_tensor({3, 4}, rng, 0.2, 1.2); // away from the kink
    Tensor wt = random_tensor({5, 4}, rng);
    Tensor bt = random_tensor({5}, rng);
    Tensor w_lin = random_tensor({3, 5}, rng);

    Variable x = leaf(xt), w = leaf(wt), b = leaf(bt);
    auto lin_loss = [&] { return sum(mul_const(relu(linear(x, w, b)), w_lin)); };
    CHECK(fd_check_input(x, lin_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(w, lin_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(b, lin_loss).max_rel_err < 1e-4);

    Tensor at = random_tensor({1, 2, 3, 3}, rng);
    Tensor ct = random_tensor({1, 3, 3, 3}, rng);
    Tensor w_cat = random_tensor({1, 5, 3, 3}, rng);
    Variable av = leaf(at), cv = leaf(ct);
    auto cat_loss = [&] { return sum(mul_const(concat_channels(av, cv), w_cat)); };
    CHECK(fd_check_input(av, cat_loss).max_rel_err < 1e-4);
    CHECK(fd_check_input(cv, cat_loss).max_rel_err < 1e-4);

    Tensor st = random_tensor({2, 4, 2, 2}, rng, -2.0, 2.0);
    Tensor w_soft = random_tensor({2, 4, 2, 2}, rng);
    Variable sv = leaf(st);
    auto soft_loss = [&] { return sum(mul_const(softmax_over_classes(sv), w_soft)); };
    CHECK(fd_check_input(sv, soft_loss).max_rel_err < 1e-4);

    Tensor mt = random_tensor({2, 3}, rng);
    Variable mv = leaf(mt), m2 = leaf(random_tensor({2, 3}, rng));
    auto mul_loss = [&] { return sum(mul(mv, m2)); };
    CHECK(fd_check_input(mv, mul_loss).max_rel_err < 1e-4);
}

TEST_CASE("fd: softmax into cross entropy") {
    Rng rng(24);
    Tensor logits = random_tensor({2, 3, 2, 2}, rng, -1.5, 1.5);
    Tensor labels({2, 2, 2});
    for (std::size_t i = 0; i < labels.numel(); ++i)
        labels[i] = static_cast<double>(rng.uniform_int(0, 2));

    Variable x = leaf(logits);
    auto loss = [&] { return cross_entropy(softmax_over_classes(x), labels); };
    CHECK(fd_check_input(x, loss).max_rel_err < 1e-4);
}

TEST_CASE("fd: normalize_rows and cosine loss") {
    Rng rng(25);
    Tensor xt = random_tensor({2, 6}, rng, 0.3, 1.3);
    Tensor target = random_tensor({2, 6}, rng, -1.0, 1.0);
    Variable x = leaf(xt);
    for (NormKind kind : {NormKind::L1, NormKind::L2}) {
        auto loss = [&] { return cosine_dissimilarity_mean(normalize_rows(x, kind), target); };
        CHECK(fd_check_input(x, loss).max_rel_err < 1e-4);
    }
}

} // TEST_SUITE
