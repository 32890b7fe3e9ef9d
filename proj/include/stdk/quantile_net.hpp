#pragma once

// The interpolation model: a deep feedforward network from basis embeddings
// to a non-crossing (lower, median, upper) quantile triple, trained with
// pinball loss. The raw 3-unit head is mapped to
//   median = a,  lower = a - softplus(b),  upper = a + softplus(c)
// so the ordering lower <= median <= upper holds for every parameter value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "stdk/autodiff.hpp"
#include "stdk/basis.hpp"
#include "stdk/checkpoint.hpp"
#include "stdk/common.hpp"

namespace stdk {

struct QuantileLevels {
    double low = 0.025;
    double mid = 0.5;
    double high = 0.975;

    bool valid() const { return 0.0 < low && low < mid && mid < high && high < 1.0; }
};

struct StdkConfig {
    std::vector<size_t> hidden_layout = {100, 100, 100, 100, 100, 50, 50, 50, 50};
    QuantileLevels quantiles;
    size_t epochs = 100;
    size_t batch_size = 256;
    double lr = 1e-3;
};

struct QuantileTriple {
    double lower = 0.0;
    double median = 0.0;
    double upper = 0.0;
};

inline QuantileTriple output_activation(double a, double b, double c) {
    return QuantileTriple{a - softplus(b), a, a + softplus(c)};
}

// Pinball (quantile) loss rho_tau(u) = u * (tau - 1[u < 0]).
inline double pinball(double tau, double u) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

inline double pinball_loss(const QuantileTriple& pred, double y, const QuantileLevels& q) {
    if (is_missing(y) || !std::isfinite(y))
        throw numeric_error("pinball_loss: observation must be finite");
    return pinball(q.low, y - pred.lower) + pinball(q.mid, y - pred.median) +
           pinball(q.high, y - pred.upper);
}

// ---------------------------------------------------------------------------

class QuantileNet {
  public:
    QuantileNet(StdkConfig config, size_t input_dim, uint64_t seed)
        : config_(std::move(config)), input_dim_(input_dim) {
        if (input_dim_ < 1) throw invalid_argument_error("QuantileNet: input_dim must be >= 1");
        for (size_t w : config_.hidden_layout)
            if (w < 1) throw invalid_argument_error("QuantileNet: layer widths must be >= 1");
        if (!config_.quantiles.valid())
            throw invalid_argument_error("QuantileNet: quantile levels must satisfy 0 < low < mid < high < 1");
        Rng rng(seed);
        size_t fan_in = input_dim_;
        std::vector<size_t> widths = config_.hidden_layout;
        widths.push_back(3);  // raw output head
        for (size_t li = 0; li < widths.size(); ++li) {
            size_t fan_out = widths[li];
            weights_.push_back(ad::Parameter::make(
                strf("layer%zu.weight", li), {fan_in, fan_out},
                ad::glorot_uniform(fan_in * fan_out, fan_in, fan_out, rng)));
            biases_.push_back(ad::Parameter::make(strf("layer%zu.bias", li), {fan_out},
                                                  std::vector<double>(fan_out, 0.0)));
            fan_in = fan_out;
        }
    }

    size_t input_dim() const { return input_dim_; }
    const StdkConfig& config() const { return config_; }

    std::vector<ad::Parameter*> parameters() {
        std::vector<ad::Parameter*> out;
        for (size_t i = 0; i < weights_.size(); ++i) {
            out.push_back(&weights_[i]);
            out.push_back(&biases_[i]);
        }
        return out;
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& w : weights_) n += w.value.size();
        for (const auto& b : biases_) n += b.value.size();
        return n;
    }

    // Raw [batch x 3] head outputs; ReLU between hidden layers only.
    ad::Tensor forward_raw(const ad::Tensor& x) {
        if (x.shape().size() != 2 || x.shape()[1] != input_dim_)
            throw shape_error(strf("QuantileNet: input shape %s does not match input_dim %zu",
                                   ad::shape_str(x.shape()).c_str(), input_dim_));
        ad::Tensor h = x;
        for (size_t li = 0; li < weights_.size(); ++li) {
            h = ad::add(ad::matmul(h, weights_[li].value), biases_[li].value);
            if (li + 1 < weights_.size()) h = ad::relu(h);
        }
        return h;
    }

    // (lower, median, upper) column tensors, non-crossing by construction.
    struct QuantileColumns {
        ad::Tensor lower, median, upper;
    };

    QuantileColumns forward_quantiles(const ad::Tensor& x) {
        ad::Tensor raw = forward_raw(x);
        ad::Tensor med = ad::column(raw, 0);
        ad::Tensor lo = ad::sub(med, ad::softplus(ad::column(raw, 1)));
        ad::Tensor hi = ad::add(med, ad::softplus(ad::column(raw, 2)));
        return {lo, med, hi};
    }

    std::vector<QuantileTriple> predict(const EmbeddingMatrix& rows) {
        if (rows.rows == 0) return {};
        if (rows.cols != input_dim_)
            throw shape_error(strf("QuantileNet: embedding width %zu does not match input_dim %zu",
                                   rows.cols, input_dim_));
        ad::NoGradGuard no_grad;
        std::vector<QuantileTriple> out;
        out.reserve(rows.rows);
        // Bounded batches keep the inference graph memory flat.
        size_t step = std::max<size_t>(1, config_.batch_size);
        for (size_t r0 = 0; r0 < rows.rows; r0 += step) {
            size_t r1 = std::min(rows.rows, r0 + step);
            ad::Tensor x = ad::Tensor::from(
                {r1 - r0, rows.cols},
                std::vector<double>(rows.row(r0), rows.row(r0) + (r1 - r0) * rows.cols));
            ad::Tensor raw = forward_raw(x);
            const auto& rv = raw.data();
            for (size_t i = 0; i < r1 - r0; ++i)
                out.push_back(output_activation(rv[i * 3], rv[i * 3 + 1], rv[i * 3 + 2]));
        }
        return out;
    }

    std::vector<TensorBlock> snapshot() {
        auto params = parameters();
        std::vector<const ad::Parameter*> view(params.begin(), params.end());
        return snapshot_parameters({view.data(), view.size()});
    }

    void restore(const std::vector<TensorBlock>& blocks) {
        auto params = parameters();
        restore_parameters({params.data(), params.size()}, blocks);
    }

  private:
    StdkConfig config_;
    size_t input_dim_;
    std::vector<ad::Parameter> weights_;
    std::vector<ad::Parameter> biases_;
};

// Closed-form parameter count for a layout (used as an independent check).
inline size_t dense_parameter_count(size_t input_dim, const std::vector<size_t>& hidden_layout) {
    size_t n = 0, fan_in = input_dim;
    std::vector<size_t> widths = hidden_layout;
    widths.push_back(3);
    for (size_t w : widths) {
        n += fan_in * w + w;
        fan_in = w;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Training. Mean pinball loss over the three quantiles; observations whose
// target is missing are excluded via a 0/1 mask.

// Sum of masked pinball terms for one quantile level.
inline ad::Tensor pinball_terms(const ad::Tensor& pred, const ad::Tensor& y, double tau,
                                const ad::Tensor& mask) {
    ad::Tensor u = ad::sub(y, pred);
    ad::Tensor t =
        ad::add(ad::scale(ad::relu(u), tau), ad::scale(ad::relu(ad::neg(u)), 1.0 - tau));
    return ad::sum(ad::mul(t, mask));
}

// Mean-per-observation pinball loss of a quantile-column batch.
inline ad::Tensor batch_pinball_loss(const QuantileNet::QuantileColumns& cols, const ad::Tensor& y,
                                     const ad::Tensor& mask, const QuantileLevels& q,
                                     size_t n_observed) {
    ad::Tensor total = ad::add(ad::add(pinball_terms(cols.lower, y, q.low, mask),
                                       pinball_terms(cols.median, y, q.mid, mask)),
                               pinball_terms(cols.upper, y, q.high, mask));
    return ad::scale(total, 1.0 / static_cast<double>(n_observed));
}

struct TrainResult {
    std::vector<double> loss_history;  // one mean-loss entry per epoch
};

inline TrainResult train_interpolator(QuantileNet& model, const EmbeddingMatrix& embeddings,
                                      const std::vector<double>& targets, uint64_t seed) {
    const StdkConfig& cfg = model.config();
    if (embeddings.rows != targets.size())
        throw shape_error(strf("train_interpolator: %zu embedding rows vs %zu targets",
                               embeddings.rows, targets.size()));
    if (embeddings.rows < cfg.batch_size)
        throw insufficient_data_error(strf("train_interpolator: %zu rows < batch_size %zu",
                                           embeddings.rows, cfg.batch_size));

    size_t n_obs_total = 0;
    for (double y : targets)
        if (!is_missing(y)) ++n_obs_total;
    if (n_obs_total == 0)
        throw insufficient_data_error("train_interpolator: all targets missing");

    auto params = model.parameters();
    Rng rng(seed ^ 0x5f3759df);
    std::vector<size_t> order(embeddings.rows);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t epoch_obs = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            size_t bsize = b1 - b0;

            std::vector<double> xb(bsize * embeddings.cols);
            std::vector<double> yb(bsize), mb(bsize);
            size_t n_obs = 0;
            for (size_t i = 0; i < bsize; ++i) {
                size_t r = order[b0 + i];
                std::copy(embeddings.row(r), embeddings.row(r) + embeddings.cols,
                          xb.begin() + i * embeddings.cols);
                bool obs = !is_missing(targets[r]);
                yb[i] = obs ? targets[r] : 0.0;
                mb[i] = obs ? 1.0 : 0.0;
                n_obs += obs;
            }
            if (n_obs == 0) continue;

            ad::Tensor x = ad::Tensor::from({bsize, embeddings.cols}, std::move(xb));
            ad::Tensor y = ad::Tensor::from({bsize}, std::move(yb));
            ad::Tensor mask = ad::Tensor::from({bsize}, std::move(mb));
            ad::Tensor loss =
                batch_pinball_loss(model.forward_quantiles(x), y, mask, cfg.quantiles, n_obs);

            double lval = loss.item();
            if (!std::isfinite(lval)) {
                double max_abs = 0.0;
                for (auto* p : params)
                    for (double w : p->value.data()) max_abs = std::max(max_abs, std::abs(w));
                throw numeric_error(strf(
                    "train_interpolator: non-finite loss at epoch %zu batch %zu (max |param| = %s)",
                    epoch, b0 / cfg.batch_size, fmt_double(max_abs).c_str()));
            }
            ad::backward(loss);
            ad::adam_step(params, cfg.lr);
            epoch_loss += lval * static_cast<double>(n_obs);
            epoch_obs += n_obs;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_obs));
    }
    return result;
}

}  // namespace stdk
