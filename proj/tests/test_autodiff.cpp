#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stdk/autodiff.hpp"
#include "test_util.hpp"

using namespace stdk;
using namespace stdk::ad;
using Catch::Approx;
using testutil::conv_ref;
using testutil::random_vec;

TEST_CASE("relu forward and subgradient convention") {
    Tensor x = Tensor::from({3}, {-1.0, 0.0, 2.0}, true);
    Tensor y = relu(x);
    REQUIRE(y.data() == std::vector<double>{0.0, 0.0, 2.0});
    backward(sum(y));
    REQUIRE(x.grad() == std::vector<double>{0.0, 0.0, 1.0});  // relu'(0) = 0
}

TEST_CASE("softplus closed form and overflow safety") {
    REQUIRE(stdk::softplus(0.0) == Approx(std::log(2.0)).epsilon(1e-15));
    REQUIRE(stdk::softplus(0.0) == Approx(0.693147180559945).epsilon(1e-12));
    REQUIRE(stdk::softplus(100.0) == 100.0);
    REQUIRE(stdk::softplus(-100.0) == Approx(0.0).margin(1e-40));
    Tensor x = Tensor::from({2}, {0.0, 50.0});
    Tensor y = ad::softplus(x);
    REQUIRE(y.data()[0] == Approx(std::log(2.0)));
    REQUIRE(y.data()[1] == 50.0);
}

TEST_CASE("conv2d with a 1x1 identity kernel is the identity") {
    Rng rng(1);
    Tensor x = Tensor::from({2, 4, 5}, random_vec(2 * 4 * 5, rng));
    Tensor w = Tensor::from({2, 2, 1, 1}, {1.0, 0.0, 0.0, 1.0});
    Tensor y = conv2d(x, w);
    REQUIRE(y.shape() == Shape{2, 4, 5});
    for (size_t i = 0; i < x.size(); ++i) REQUIRE(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d matches the brute-force reference") {
    Rng rng(7);
    size_t cin = 2, H = 8, W = 8, cout = 3, kh = 3, kw = 3;
    for (int trial = 0; trial < 10; ++trial) {
        auto xv = random_vec(cin * H * W, rng);
        auto wv = random_vec(cout * cin * kh * kw, rng);
        Tensor y = conv2d(Tensor::from({cin, H, W}, xv), Tensor::from({cout, cin, kh, kw}, wv));
        auto ref = conv_ref(xv, cin, H, W, wv, cout, kh, kw);
        for (size_t i = 0; i < ref.size(); ++i)
            REQUIRE(y.data()[i] == Approx(ref[i]).margin(1e-12));
    }
}

TEST_CASE("shape errors name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        matmul(a, b);
        FAIL("expected shape_error");
    } catch (const shape_error& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("[2 x 3]") != std::string::npos);
        REQUIRE(msg.find("[4 x 5]") != std::string::npos);
    }
    REQUIRE_THROWS_AS(add(a, Tensor::zeros({4})), shape_error);
    REQUIRE_THROWS_AS(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({3, 1, 3, 3})), shape_error);
}

TEST_CASE("broadcast add over leading dimension") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor b = Tensor::from({3}, {10, 20, 30}, true);
    Tensor c = add(a, b);
    REQUIRE(c.data() == std::vector<double>{11, 22, 33, 14, 25, 36});
    backward(sum(c));
    REQUIRE(a.grad() == std::vector<double>(6, 1.0));
    REQUIRE(b.grad() == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("backward on sum gives all-ones") {
    Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    backward(sum(x));
    REQUIRE(x.grad() == std::vector<double>(4, 1.0));
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    REQUIRE_THROWS_AS(backward(relu(x)), invalid_argument_error);
}

TEST_CASE("backward is deterministic across graph rebuilds") {
    Rng rng(11);
    auto w1 = Parameter::make("w1", {3, 4}, random_vec(12, rng));
    auto b1 = Parameter::make("b1", {4}, random_vec(4, rng));
    auto w2 = Parameter::make("w2", {4, 1}, random_vec(4, rng));
    Tensor x = Tensor::from({5, 3}, random_vec(15, rng));

    auto run = [&] {
        w1.value.zero_grad();
        b1.value.zero_grad();
        w2.value.zero_grad();
        Tensor h = relu(add(matmul(x, w1.value), b1.value));
        Tensor out = matmul(h, w2.value);
        backward(sum(mul(out, out)));
        std::vector<double> grads = w1.value.grad();
        auto& g2 = w2.value.grad();
        grads.insert(grads.end(), g2.begin(), g2.end());
        auto& gb = b1.value.grad();
        grads.insert(grads.end(), gb.begin(), gb.end());
        return grads;
    };
    auto g1 = run();
    auto g2 = run();
    REQUIRE(g1 == g2);  // bit-identical
}

TEST_CASE("every op passes central finite differences") {
    // One parameter block flows through each op; checked across seeds.
    for (uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed * 31 + 1);
        auto p = Parameter::make("p", {2, 6}, random_vec(12, rng));
        auto q = Parameter::make("q", {6}, random_vec(6, rng));
        Tensor x = Tensor::from({6, 2}, random_vec(12, rng));

        std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
            {"add", [&] { return sum(add(p.value, q.value)); }},
            {"sub", [&] { return sum(mul(sub(p.value, q.value), sub(p.value, q.value))); }},
            {"mul", [&] { return sum(mul(p.value, q.value)); }},
            {"scale", [&] { return sum(scale(p.value, -2.5)); }},
            {"relu", [&] { return sum(relu(p.value)); }},
            {"softplus", [&] { return sum(ad::softplus(p.value)); }},
            {"sigmoid", [&] { return sum(ad::sigmoid(p.value)); }},
            {"tanh", [&] { return sum(ad::tanh(p.value)); }},
            {"matmul", [&] { return sum(matmul(p.value, x)); }},
            {"column", [&] { return sum(mul(column(p.value, 1), column(p.value, 1))); }},
        };
        for (auto& [name, fn] : cases) {
            INFO(name << " seed " << seed);
            auto report = grad_check(fn, std::vector<Parameter*>{&p, &q}, 1e-4);
            CHECK(report.pass);
        }
    }
}

TEST_CASE("conv ops pass central finite differences") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 100);
        auto w = Parameter::make("w", {2, 2, 3, 3}, random_vec(36, rng));
        auto b = Parameter::make("b", {2}, random_vec(2, rng));
        auto xp = Parameter::make("x", {2, 5, 4}, random_vec(40, rng));
        auto build = [&] {
            Tensor y = add_channel_bias(conv2d(xp.value, w.value), b.value);
            Tensor z = slice_channel(ad::tanh(y), 1);
            return sum(mul(z, z));
        };
        auto report = grad_check(build, std::vector<Parameter*>{&w, &b, &xp}, 1e-4);
        CHECK(report.pass);
    }
}

TEST_CASE("two-layer MLP gradients match finite differences") {
    Rng rng(5);
    auto w1 = Parameter::make("w1", {4, 8}, random_vec(32, rng, -0.5, 0.5));
    auto b1 = Parameter::make("b1", {8}, random_vec(8, rng, -0.1, 0.1));
    auto w2 = Parameter::make("w2", {8, 1}, random_vec(8, rng, -0.5, 0.5));
    Tensor x = Tensor::from({6, 4}, random_vec(24, rng));
    auto build = [&] {
        Tensor h = relu(add(matmul(x, w1.value), b1.value));
        Tensor out = matmul(h, w2.value);
        return sum(mul(out, out));
    };
    auto report = grad_check(build, std::vector<Parameter*>{&w1, &b1, &w2}, 1e-4);
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err < 1e-4);
}

TEST_CASE("grad_check: hand-computed linear case is exact") {
    auto w = Parameter::make("w", {1, 1}, {3.0});
    Tensor x = Tensor::from({1, 1}, {2.0});
    auto build = [&] {
        Tensor y = matmul(x, w.value);
        return sum(mul(y, y));
    };
    w.value.zero_grad();
    backward(build());
    REQUIRE(w.value.grad()[0] == Approx(24.0).epsilon(1e-12));  // 2*y*x = 2*6*2
    auto report = grad_check(build, std::vector<Parameter*>{&w}, 1e-4);
    REQUIRE(report.pass);
}

TEST_CASE("grad_check: constant model passes at any tolerance") {
    auto w = Parameter::make("w", {3}, {1.0, -2.0, 0.5});
    auto build = [&] { return Tensor::scalar(7.0); };
    auto report = grad_check(build, std::vector<Parameter*>{&w}, 1e-12);
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err == 0.0);
}

TEST_CASE("unreachable parameters keep zero gradients") {
    auto used = Parameter::make("used", {2}, {1.0, 2.0});
    auto unused = Parameter::make("unused", {2}, {3.0, 4.0});
    backward(sum(mul(used.value, used.value)));
    REQUIRE(unused.value.grad() == std::vector<double>{0.0, 0.0});
    REQUIRE(used.value.grad() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
    auto p = Parameter::make("p", {2}, {1.5, -2.0});
    std::vector<Parameter*> params{&p};
    adam_step(params, 0.1);
    REQUIRE(p.value.data() == std::vector<double>{1.5, -2.0});
    REQUIRE(p.steps == 1);
}

TEST_CASE("adam: first step is approximately -lr * sign(grad)") {
    auto p = Parameter::make("p", {2}, {0.0, 0.0});
    p.value.grad() = {0.37, -42.0};
    std::vector<Parameter*> params{&p};
    adam_step(params, 1e-3);
    REQUIRE(p.value.data()[0] == Approx(-1e-3).epsilon(1e-6));
    REQUIRE(p.value.data()[1] == Approx(+1e-3).epsilon(1e-6));
    REQUIRE(p.value.grad() == std::vector<double>{0.0, 0.0});  // zeroed afterwards
}

TEST_CASE("adam: two steps match the hand recurrence to 1e-12") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g1 = 0.8, g2 = -0.3, x0 = 1.25;

    auto p = Parameter::make("p", {1}, {x0});
    std::vector<Parameter*> params{&p};
    p.value.grad() = {g1};
    adam_step(params, lr, b1, b2, eps);
    p.value.grad() = {g2};
    adam_step(params, lr, b1, b2, eps);

    // Independent scalar recurrence.
    double m = 0, v = 0, x = x0;
    for (int t = 1; t <= 2; ++t) {
        double g = t == 1 ? g1 : g2;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    REQUIRE(p.value.data()[0] == Approx(x).margin(1e-12));
    REQUIRE_THROWS_AS(adam_step(params, 0.0), invalid_argument_error);
}

TEST_CASE("NoGradGuard disables tape recording") {
    auto p = Parameter::make("p", {2}, {1.0, 2.0});
    NoGradGuard guard;
    Tensor y = mul(p.value, p.value);
    REQUIRE(!y.requires_grad());
}

TEST_CASE("grad_check flags NaN gradients as numeric failure") {
    auto p = Parameter::make("p", {1}, {std::nan("")});
    auto build = [&] { return sum(mul(p.value, p.value)); };
    auto report = grad_check(build, std::vector<Parameter*>{&p}, 1e-4);
    REQUIRE(report.numeric_failure);
    REQUIRE(!report.pass);
}
