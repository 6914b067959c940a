#include "spectex/errors.hpp"
#include "spectex/tensor.hpp"
#include "support.hpp"

#include <doctest.h>
#include <omp.h>

using namespace spectex;
using namespace spectex::testing;

namespace {

ConvWeights<double> ones_kernel() {
    return ConvWeights<double>(1, 1, std::vector<double>(9, 1.0), {0.0});
}

ConvWeights<double> delta_kernel(std::size_t channels) {
    std::vector<double> k(channels * channels * 9, 0.0);
    for (std::size_t c = 0; c < channels; ++c) k[(c * channels + c) * 9 + 4] = 1.0;
    return ConvWeights<double>(channels, channels, std::move(k), std::vector<double>(channels, 0.0));
}

} // namespace

TEST_CASE("conv2d_forward of ones matches direct summation") {
    const Tensor<double> x(1, 3, 3, 1.0);
    const auto out = conv2d_forward(x, ones_kernel());
    const auto oracle = direct_conv(x, ones_kernel());
    const std::vector<double> expected{4, 6, 4, 6, 9, 6, 4, 6, 4};
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(oracle[i] == expected[i]);
        CHECK(out[i] == expected[i]);
    }
}

TEST_CASE("conv2d_forward with a centred delta is the identity") {
    std::mt19937_64 rng(1);
    const auto x = random_tensor({3, 5, 7}, rng);
    CHECK(conv2d_forward(x, delta_kernel(3)) == x);
}

TEST_CASE("conv2d_forward with a zero kernel gives the bias") {
    std::mt19937_64 rng(2);
    const auto x = random_tensor({2, 4, 4}, rng);
    const ConvWeights<double> w(3, 2, std::vector<double>(54, 0.0), {0.5, -1.0, 2.0});
    const auto out = conv2d_forward(x, w);
    for (std::size_t c = 0; c < 3; ++c) {
        for (double v : out.channel(c)) CHECK(v == w.bias()[c]);
    }
}

TEST_CASE("conv2d_forward matches the direct oracle on random data") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_tensor({3, 6 + std::size_t(trial), 9}, rng);
        const auto w = random_conv(4, 3, rng);
        CHECK(rel_l2(conv2d_forward(x, w), direct_conv(x, w)) < 1e-14);
    }
}

TEST_CASE("conv2d rejects channel mismatches") {
    std::mt19937_64 rng(4);
    const auto w = random_conv(4, 3, rng);
    CHECK_THROWS_AS(conv2d_forward(Tensor<double>(2, 4, 4), w), ConfigError);
    CHECK_THROWS_AS(conv2d_backward_data(Tensor<double>(3, 4, 4), w), ConfigError);
    CHECK_THROWS_AS(ConvWeights<double>(2, 2, std::vector<double>(10), {0, 0}), ConfigError);
}

TEST_CASE("conv2d_backward_data examples") {
    const auto w = ones_kernel();
    CHECK(conv2d_backward_data(Tensor<double>(1, 5, 5), w) == Tensor<double>(1, 5, 5));

    Tensor<double> g(1, 5, 5);
    g(0, 2, 2) = 1.0;
    const auto gi = conv2d_backward_data(g, w);
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 5; ++x) {
            const bool inside = y >= 1 && y <= 3 && x >= 1 && x <= 3;
            CHECK(gi(0, y, x) == (inside ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("conv2d_backward_data matches finite differences of <g, conv(x)>") {
    std::mt19937_64 rng(5);
    const auto x = random_tensor({3, 5, 6}, rng);
    const auto w = random_conv(2, 3, rng);
    const auto g = random_tensor({2, 5, 6}, rng);
    const auto grad = conv2d_backward_data(g, w);
    auto f = [&](const std::vector<double>& v) {
        return dot(g, conv2d_forward(Tensor<double>(x.shape(), v), w));
    };
    const std::vector<double> x0(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(rel_err(central_difference(f, x0, i, 1e-4), grad[i]) < 1e-5);
    }
}

TEST_CASE("conv2d adjoint identity and linearity hold on random tensors") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Shape in_shape{3, 4 + std::size_t(trial % 3), 5 + std::size_t(trial % 4)};
        const auto w = random_conv(5, 3, rng);
        const auto x = random_tensor(in_shape, rng);
        const auto y = random_tensor(in_shape, rng);
        const auto g = random_tensor({5, in_shape.height, in_shape.width}, rng);

        // Remove the bias to get the linear part.
        auto lin = conv2d_forward(x, w);
        for (std::size_t o = 0; o < 5; ++o) {
            for (auto& v : lin.channel(o)) v -= w.bias()[o];
        }
        CHECK(rel_err(dot(g, lin), dot(conv2d_backward_data(g, w), x)) < 1e-6);

        const double a = 0.7, b = -1.3;
        Tensor<double> combo = x;
        for (auto& v : combo.values()) v *= a;
        combo.add_scaled(y, b);
        auto lhs = conv2d_forward(combo, w);
        auto rhs = conv2d_forward(x, w);
        for (auto& v : rhs.values()) v *= a;
        rhs.add_scaled(conv2d_forward(y, w), b);
        for (std::size_t o = 0; o < 5; ++o) {
            for (auto& v : rhs.channel(o)) v -= (a + b - 1.0) * w.bias()[o];
        }
        CHECK(rel_l2(lhs, rhs) < 1e-13);
    }
}

TEST_CASE("conv2d results do not depend on the thread count") {
    std::mt19937_64 rng(7);
    const auto x = random_tensor<float>({8, 16, 16}, rng);
    const auto w = random_conv<float>(8, 8, rng);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto f1 = conv2d_forward(x, w);
    const auto b1 = conv2d_backward_data(f1, w);
    omp_set_num_threads(4);
    const auto f4 = conv2d_forward(x, w);
    const auto b4 = conv2d_backward_data(f4, w);
    omp_set_num_threads(saved);
    CHECK(f1 == f4);
    CHECK(b1 == b4);
}

TEST_CASE("float and double convolution agree") {
    std::mt19937_64 rng(8);
    const auto x = random_tensor({3, 8, 8}, rng);
    const auto w = random_conv(4, 3, rng);
    const auto d = conv2d_forward(x, w);
    const auto f = conv2d_forward(x.cast<float>(), w.cast<float>());
    CHECK(rel_l2(d, f.cast<double>()) < 1e-6);
}

TEST_CASE("relu forward and backward") {
    const Tensor<double> x({1, 1, 3}, std::vector<double>{-1, 0, 2});
    CHECK(relu_forward(x) == Tensor<double>({1, 1, 3}, std::vector<double>{0, 0, 2}));
    const Tensor<double> ones(1, 1, 3, 1.0);
    CHECK(relu_backward(ones, x) == Tensor<double>({1, 1, 3}, std::vector<double>{0, 0, 1}));

    std::mt19937_64 rng(9);
    const auto pos = random_tensor({2, 3, 3}, rng, 0.1, 2.0);
    CHECK(relu_forward(pos) == pos);
    const auto g = random_tensor({2, 3, 3}, rng);
    CHECK(relu_backward(g, pos) == g);

    const auto r = random_tensor({2, 4, 5}, rng);
    const auto out = relu_forward(r);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(out[i] == std::max(r[i], 0.0));

    CHECK_THROWS_AS(relu_backward(Tensor<double>(1, 2, 2), Tensor<double>(1, 2, 3)), ConfigError);
}

TEST_CASE("relu_backward matches finite differences away from the kink") {
    std::mt19937_64 rng(10);
    auto x = random_tensor({2, 3, 4}, rng);
    for (auto& v : x.values()) {
        if (std::abs(v) < 0.05) v = 0.5;
    }
    const auto weights = random_tensor({2, 3, 4}, rng);
    const auto grad = relu_backward(weights, x);
    auto f = [&](const std::vector<double>& v) { return dot(weights, relu_forward(Tensor<double>(x.shape(), v))); };
    const std::vector<double> x0(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(central_difference(f, x0, i, 1e-4) - grad[i]) <= 1e-5 * std::max(1.0, std::abs(grad[i])));
    }
}

TEST_CASE("avgpool forward examples") {
    const Tensor<double> x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    const auto p = avgpool_forward(x);
    CHECK(p.shape() == Shape{1, 1, 1});
    CHECK(p[0] == 2.5);

    const auto c = avgpool_forward(Tensor<double>(2, 6, 4, 3.25));
    CHECK(c == Tensor<double>(2, 3, 2, 3.25));

    std::mt19937_64 rng(11);
    const auto r = random_tensor({2, 4, 4}, rng);
    const auto pr = avgpool_forward(r);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        for (std::size_t y = 0; y < 2; ++y) {
            for (std::size_t xx = 0; xx < 2; ++xx) {
                double s = 0;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) s += r(ch, 2 * y + dy, 2 * xx + dx);
                }
                CHECK(pr(ch, y, xx) == doctest::Approx(s / 4).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("avgpool drops trailing odd rows and columns") {
    std::mt19937_64 rng(12);
    const auto x = random_tensor({1, 5, 3}, rng);
    const auto p = avgpool_forward(x);
    CHECK(p.shape() == Shape{1, 2, 1});
    const auto g = avgpool_backward(Tensor<double>(1, 2, 1, 1.0), x.shape());
    CHECK(g.shape() == x.shape());
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t xx = 0; xx < 3; ++xx) CHECK(g(0, y, xx) == (y < 4 && xx < 2 ? 0.25 : 0.0));
    }
    CHECK_THROWS_AS(avgpool_forward(Tensor<double>(1, 1, 4)), ConfigError);
    CHECK_THROWS_AS(avgpool_forward(Tensor<double>(1, 4, 1)), ConfigError);
}

TEST_CASE("avgpool backward examples, adjoint and finite differences") {
    const auto g = avgpool_backward(Tensor<double>(1, 1, 1, 1.0), Shape{1, 2, 2});
    CHECK(g == Tensor<double>(1, 2, 2, 0.25));
    CHECK(avgpool_backward(Tensor<double>(1, 2, 2), Shape{1, 4, 4}) == Tensor<double>(1, 4, 4));

    std::mt19937_64 rng(13);
    const auto x = random_tensor({2, 6, 7}, rng);
    const auto go = random_tensor({2, 3, 3}, rng);
    const auto gi = avgpool_backward(go, x.shape());
    CHECK(rel_err(dot(go, avgpool_forward(x)), dot(gi, x)) < 1e-14);

    auto f = [&](const std::vector<double>& v) { return dot(go, avgpool_forward(Tensor<double>(x.shape(), v))); };
    const std::vector<double> x0(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(central_difference(f, x0, i, 1e-4) - gi[i]) <= 1e-6 * std::max(1.0, std::abs(gi[i])));
    }
}
