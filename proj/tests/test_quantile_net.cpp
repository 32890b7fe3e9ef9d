#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stdk/quantile_net.hpp"
#include "test_util.hpp"

using namespace stdk;
using Catch::Approx;
using testutil::pinball_ref;
using testutil::random_vec;

TEST_CASE("output activation: zero raw head gives a log-2 band") {
    QuantileTriple t = output_activation(0.0, 0.0, 0.0);
    REQUIRE(t.median == 0.0);
    REQUIRE(t.lower == Approx(-0.6931471805599453).epsilon(1e-14));
    REQUIRE(t.upper == Approx(+0.6931471805599453).epsilon(1e-14));
}

TEST_CASE("output activation: offsets vanish as raw offsets go to -inf") {
    QuantileTriple t = output_activation(1.5, -700.0, -700.0);
    REQUIRE(t.lower == Approx(1.5).margin(1e-300));
    REQUIRE(t.upper == Approx(1.5).margin(1e-300));
    REQUIRE(t.median == 1.5);
}

TEST_CASE("output activation never crosses") {
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        QuantileTriple t =
            output_activation(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
        REQUIRE(t.lower <= t.median);
        REQUIRE(t.median <= t.upper);
    }
}

TEST_CASE("pinball loss: spot values from the definition") {
    REQUIRE(pinball(0.5, 2.0 - 1.0) == Approx(0.5));
    REQUIRE(pinball(0.025, -2.0) == Approx(1.95));
    REQUIRE(pinball(0.975, 4.0) == Approx(3.9));
    QuantileLevels q;
    QuantileTriple pred{1.0, 1.0, 1.0};
    REQUIRE(pinball_loss(pred, 2.0, q) ==
            Approx(pinball_ref(0.025, 1.0) + pinball_ref(0.5, 1.0) + pinball_ref(0.975, 1.0)));
    REQUIRE_THROWS_AS(pinball_loss(pred, kMissing, q), numeric_error);
}

TEST_CASE("batch pinball loss matches the elementwise reference to 1e-12") {
    Rng rng(13);
    QuantileLevels q;
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 1 + rng.below(40);
        std::vector<double> lo(n), med(n), up(n), y(n), mask(n);
        double ref = 0.0;
        size_t n_obs = 0;
        for (size_t i = 0; i < n; ++i) {
            med[i] = rng.uniform(-2, 2);
            lo[i] = med[i] - rng.uniform(0, 2);
            up[i] = med[i] + rng.uniform(0, 2);
            bool observed = rng.uniform() > 0.2;
            y[i] = observed ? rng.uniform(-3, 3) : 0.0;
            mask[i] = observed ? 1.0 : 0.0;
            if (observed) {
                ref += pinball_ref(q.low, y[i] - lo[i]) + pinball_ref(q.mid, y[i] - med[i]) +
                       pinball_ref(q.high, y[i] - up[i]);
                ++n_obs;
            }
        }
        if (n_obs == 0) continue;
        ref /= static_cast<double>(n_obs);
        QuantileNet::QuantileColumns cols{ad::Tensor::from({n}, lo), ad::Tensor::from({n}, med),
                                          ad::Tensor::from({n}, up)};
        ad::Tensor loss = batch_pinball_loss(cols, ad::Tensor::from({n}, y),
                                             ad::Tensor::from({n}, mask), q, n_obs);
        REQUIRE(loss.item() == Approx(ref).margin(1e-12));
    }
}

TEST_CASE("parameter count matches the closed-form counter") {
    std::vector<size_t> layout = {100, 100, 100, 100, 100, 50, 50, 50, 50};
    // 8156*100+100 + 4*(100*100+100) + (100*50+50) + 3*(50*50+50) + (50*3+3)
    REQUIRE(dense_parameter_count(8156, layout) == 868953);

    StdkConfig cfg;
    cfg.hidden_layout = layout;
    QuantileNet model(cfg, 8156, 1);
    REQUIRE(model.parameter_count() == dense_parameter_count(8156, layout));

    StdkConfig tiny;
    tiny.hidden_layout = {1};
    QuantileNet minimal(tiny, 1, 1);
    REQUIRE(minimal.parameter_count() == dense_parameter_count(1, {1}));
    REQUIRE(minimal.parameter_count() == 1 * 1 + 1 + 1 * 3 + 3);
}

TEST_CASE("same seed gives identical initial parameters") {
    StdkConfig cfg;
    cfg.hidden_layout = {16, 8};
    QuantileNet a(cfg, 24, 77), b(cfg, 24, 77), c(cfg, 24, 78);
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    bool any_diff_c = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->value.data() == pb[i]->value.data());
        if (pa[i]->value.data() != pc[i]->value.data()) any_diff_c = true;
    }
    REQUIRE(any_diff_c);
}

TEST_CASE("predict: empty batch, duplicates and non-crossing") {
    StdkConfig cfg;
    cfg.hidden_layout = {8, 8};
    QuantileNet model(cfg, 5, 3);

    EmbeddingMatrix empty;
    empty.rows = 0;
    empty.cols = 5;
    REQUIRE(model.predict(empty).empty());

    Rng rng(4);
    EmbeddingMatrix m;
    m.rows = 6;
    m.cols = 5;
    m.data = random_vec(30, rng, 0.0, 1.0);
    // duplicate row 0 into row 5
    std::copy(m.row(0), m.row(0) + 5, m.row(5));
    auto preds = model.predict(m);
    REQUIRE(preds.size() == 6);
    for (const auto& t : preds) {
        REQUIRE(t.lower <= t.median);
        REQUIRE(t.median <= t.upper);
    }
    REQUIRE(preds[5].lower == preds[0].lower);
    REQUIRE(preds[5].median == preds[0].median);
    REQUIRE(preds[5].upper == preds[0].upper);

    EmbeddingMatrix wrong;
    wrong.rows = 1;
    wrong.cols = 4;
    wrong.data.assign(4, 0.0);
    REQUIRE_THROWS_AS(model.predict(wrong), shape_error);
}

TEST_CASE("quantile network gradients pass the finite-difference check") {
    StdkConfig cfg;
    cfg.hidden_layout = {8, 6};
    QuantileNet model(cfg, 10, 21);
    Rng rng(22);
    ad::Tensor x = ad::Tensor::from({8, 10}, random_vec(80, rng, 0.0, 1.0));
    std::vector<double> y = random_vec(8, rng);
    auto build = [&] {
        auto cols = model.forward_quantiles(x);
        return batch_pinball_loss(cols, ad::Tensor::from({8}, y),
                                  ad::Tensor::from({8}, std::vector<double>(8, 1.0)),
                                  cfg.quantiles, 8);
    };
    auto report = ad::grad_check(build, model.parameters(), 1e-4);
    REQUIRE(report.pass);
}

TEST_CASE("training halves the loss on a synthetic linear target") {
    Rng rng(99);
    size_t n = 200, dim = 6;
    EmbeddingMatrix m;
    m.rows = n;
    m.cols = dim;
    m.data = random_vec(n * dim, rng, 0.0, 1.0);
    std::vector<double> w = random_vec(dim, rng), y(n);
    for (size_t i = 0; i < n; ++i) {
        y[i] = 0.0;
        for (size_t j = 0; j < dim; ++j) y[i] += m.at(i, j) * w[j];
    }
    StdkConfig cfg;
    cfg.hidden_layout = {32, 16};
    cfg.epochs = 50;
    cfg.batch_size = 32;
    cfg.lr = 3e-3;
    QuantileNet model(cfg, dim, 7);
    auto result = train_interpolator(model, m, y, 7);
    REQUIRE(result.loss_history.size() == 50);
    REQUIRE(result.loss_history.back() < 0.25 * result.loss_history.front());
}

TEST_CASE("capacity-rich model memorizes 8 points") {
    Rng rng(55);
    size_t n = 8, dim = 4;
    EmbeddingMatrix m;
    m.rows = n;
    m.cols = dim;
    m.data = random_vec(n * dim, rng, 0.0, 1.0);
    std::vector<double> y = random_vec(n, rng);

    StdkConfig cfg;
    cfg.hidden_layout = {64, 64};
    cfg.epochs = 2000;
    cfg.batch_size = 8;
    cfg.lr = 3e-3;
    QuantileNet model(cfg, dim, 5);
    train_interpolator(model, m, y, 5);

    auto preds = model.predict(m);
    double mse = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = preds[i].median - y[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    REQUIRE(mse < 1e-3);
}

TEST_CASE("training is deterministic given the seed") {
    Rng rng(31);
    EmbeddingMatrix m;
    m.rows = 40;
    m.cols = 5;
    m.data = random_vec(200, rng, 0.0, 1.0);
    std::vector<double> y = random_vec(40, rng);
    StdkConfig cfg;
    cfg.hidden_layout = {8};
    cfg.epochs = 10;
    cfg.batch_size = 16;
    auto run = [&] {
        QuantileNet model(cfg, 5, 11);
        return train_interpolator(model, m, y, 11).loss_history;
    };
    REQUIRE(run() == run());
}

TEST_CASE("missing targets are excluded from the loss") {
    EmbeddingMatrix m;
    m.rows = 4;
    m.cols = 2;
    m.data = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    std::vector<double> y = {1.0, kMissing, 2.0, kMissing};
    StdkConfig cfg;
    cfg.hidden_layout = {4};
    cfg.epochs = 3;
    cfg.batch_size = 4;
    QuantileNet model(cfg, 2, 9);
    auto result = train_interpolator(model, m, y, 9);
    for (double l : result.loss_history) REQUIRE(std::isfinite(l));

    std::vector<double> all_missing = {kMissing, kMissing, kMissing, kMissing};
    QuantileNet fresh(cfg, 2, 9);
    REQUIRE_THROWS_AS(train_interpolator(fresh, m, all_missing, 9), insufficient_data_error);
}

TEST_CASE("training loss is non-increasing on the convex fixture") {
    // Single linear layer, median-only pinball loss, full batch: convex.
    Rng rng(17);
    size_t n = 64, dim = 3;
    std::vector<double> xv = random_vec(n * dim, rng, 0.0, 1.0), y(n);
    for (size_t i = 0; i < n; ++i)
        y[i] = 0.3 * xv[i * dim] - 0.7 * xv[i * dim + 1] + 0.1;

    auto w = ad::Parameter::make("w", {dim, 1}, std::vector<double>(dim, 0.0));
    auto b = ad::Parameter::make("b", {1}, {0.0});
    std::vector<ad::Parameter*> params{&w, &b};
    ad::Tensor x = ad::Tensor::from({n, dim}, xv);
    ad::Tensor yt = ad::Tensor::from({n}, y);
    ad::Tensor ones = ad::Tensor::from({n}, std::vector<double>(n, 1.0));

    std::vector<double> history;
    for (int epoch = 0; epoch < 60; ++epoch) {
        ad::Tensor pred = ad::column(ad::add(ad::matmul(x, w.value), b.value), 0);
        ad::Tensor loss = ad::scale(pinball_terms(pred, yt, 0.5, ones), 1.0 / n);
        history.push_back(loss.item());
        ad::backward(loss);
        ad::adam_step(params, 1e-3);
    }
    for (size_t e = 1; e < history.size(); ++e) REQUIRE(history[e] <= history[e - 1] + 1e-6);
}
