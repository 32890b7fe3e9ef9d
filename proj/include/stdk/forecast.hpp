#pragma once

// Quantile ConvLSTM forecasting over gridded precipitation images.
//
// Cell (standard gated convolutional LSTM, no peephole terms):
//   i = sigmoid(Wxi*x + Whi*h + bi)      f = sigmoid(Wxf*x + Whf*h + bf)
//   o = sigmoid(Wxo*x + Who*h + bo)      g = tanh   (Wxg*x + Whg*h + bg)
//   c' = f (.) c + i (.) g               h' = o (.) tanh(c')
// with same-padding convolutions. Three input frames are unrolled and the
// final hidden state is mapped by a 1x1 convolution to three raw channels;
// the quantile-net output activation is applied pixelwise, so intervals are
// non-crossing per pixel. The "STDK" forecaster variant augments each input
// frame with rasterized Wendland basis channels before the first cell.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "stdk/autodiff.hpp"
#include "stdk/basis.hpp"
#include "stdk/checkpoint.hpp"
#include "stdk/common.hpp"
#include "stdk/gridstack.hpp"
#include "stdk/quantile_net.hpp"

namespace stdk {

// ---------------------------------------------------------------------------
// Sequence dataset: sliding windows of three consecutive frames predicting
// the frame `lead` steps past the last input (default lead 3: inputs
// t, t+1, t+2 -> target t+5).

struct ImageSequenceSample {
    std::array<size_t, 3> input_idx;
    size_t target_idx;
};

inline std::vector<ImageSequenceSample> build_sequences(size_t t_count, size_t lead = 3) {
    if (lead < 1) throw invalid_argument_error("build_sequences: lead must be >= 1");
    size_t span = 2 + lead;  // last index used by a window starting at 0
    if (t_count < span + 1)
        throw insufficient_data_error(
            strf("build_sequences: need at least %zu grids, got %zu", span + 1, t_count));
    std::vector<ImageSequenceSample> out;
    out.reserve(t_count - span);
    for (size_t t = 0; t + span < t_count; ++t)
        out.push_back(ImageSequenceSample{{t, t + 1, t + 2}, t + span});
    return out;
}

// ---------------------------------------------------------------------------

struct ForecastConfig {
    size_t hidden_channels = 16;
    size_t kernel = 3;
    QuantileLevels quantiles;
    size_t epochs = 50;
    size_t batch_size = 8;
    double lr = 1e-3;
};

struct ConvLstmState {
    ad::Tensor hidden;  // [C x H x W]
    ad::Tensor cell;    // [C x H x W]
};

class ConvLstmForecaster {
  public:
    // aux_levels: spatial knot levels rasterized into constant per-pixel
    // channels appended to every input frame. Empty = plain ConvLSTM.
    ConvLstmForecaster(ForecastConfig config, uint64_t seed,
                       std::vector<SpatialKnotLevel> aux_levels = {})
        : config_(std::move(config)), aux_levels_(std::move(aux_levels)) {
        if (config_.hidden_channels < 1)
            throw invalid_argument_error("ConvLstmForecaster: hidden_channels must be >= 1");
        if (config_.kernel % 2 == 0)
            throw invalid_argument_error("ConvLstmForecaster: kernel must be odd");
        if (!config_.quantiles.valid())
            throw invalid_argument_error("ConvLstmForecaster: bad quantile levels");
        aux_channels_ = total_knots(aux_levels_);
        in_channels_ = 1 + aux_channels_;

        Rng rng(seed);
        size_t ch = config_.hidden_channels;
        size_t k = config_.kernel;
        static constexpr const char* kGateNames[4] = {"i", "f", "o", "g"};
        for (int gate = 0; gate < 4; ++gate) {
            wx_[gate] = ad::Parameter::make(
                strf("cell.wx.%s", kGateNames[gate]), {ch, in_channels_, k, k},
                ad::glorot_uniform(ch * in_channels_ * k * k, in_channels_ * k * k, ch * k * k, rng));
            wh_[gate] = ad::Parameter::make(
                strf("cell.wh.%s", kGateNames[gate]), {ch, ch, k, k},
                ad::glorot_uniform(ch * ch * k * k, ch * k * k, ch * k * k, rng));
            b_[gate] = ad::Parameter::make(strf("cell.b.%s", kGateNames[gate]), {ch},
                                           std::vector<double>(ch, 0.0));
        }
        head_w_ = ad::Parameter::make("head.weight", {3, ch, 1, 1},
                                      ad::glorot_uniform(3 * ch, ch, 3, rng));
        head_b_ = ad::Parameter::make("head.bias", {3}, std::vector<double>(3, 0.0));
    }

    const ForecastConfig& config() const { return config_; }
    size_t in_channels() const { return in_channels_; }
    size_t aux_channels() const { return aux_channels_; }

    std::vector<ad::Parameter*> parameters() {
        std::vector<ad::Parameter*> out;
        for (int gate = 0; gate < 4; ++gate) {
            out.push_back(&wx_[gate]);
            out.push_back(&wh_[gate]);
            out.push_back(&b_[gate]);
        }
        out.push_back(&head_w_);
        out.push_back(&head_b_);
        return out;
    }

    ConvLstmState initial_state(size_t h, size_t w) const {
        return {ad::Tensor::zeros({config_.hidden_channels, h, w}),
                ad::Tensor::zeros({config_.hidden_channels, h, w})};
    }

    // One gated step. x: [in_channels x H x W].
    ConvLstmState cell(const ad::Tensor& x, const ConvLstmState& state) {
        auto gate_pre = [&](int gate) {
            return ad::add_channel_bias(
                ad::add(ad::conv2d(x, wx_[gate].value), ad::conv2d(state.hidden, wh_[gate].value)),
                b_[gate].value);
        };
        ad::Tensor i = ad::sigmoid(gate_pre(0));
        ad::Tensor f = ad::sigmoid(gate_pre(1));
        ad::Tensor o = ad::sigmoid(gate_pre(2));
        ad::Tensor g = ad::tanh(gate_pre(3));
        ad::Tensor c_new = ad::add(ad::mul(f, state.cell), ad::mul(i, g));
        ad::Tensor h_new = ad::mul(o, ad::tanh(c_new));
        return {h_new, c_new};
    }

    // Wraps a raw [H x W] frame with the aux basis channels (if any) into the
    // [in_channels x H x W] cell input.
    ad::Tensor make_input(const double* frame, size_t h, size_t w) {
        std::vector<double> buf(in_channels_ * h * w);
        std::copy(frame, frame + h * w, buf.begin());
        if (aux_channels_ > 0) {
            const std::vector<double>& aux = aux_raster(h, w);
            std::copy(aux.begin(), aux.end(), buf.begin() + h * w);
        }
        return ad::Tensor::from({in_channels_, h, w}, std::move(buf));
    }

    struct QuantileGrids {
        ad::Tensor lower, median, upper;  // each [H x W]
    };

    // Unrolls the cell over three frames and maps the final hidden state to a
    // non-crossing quantile triple per pixel.
    QuantileGrids forward(const std::array<ad::Tensor, 3>& frames) {
        size_t h = frames[0].shape()[1], w = frames[0].shape()[2];
        ConvLstmState state = initial_state(h, w);
        for (const auto& x : frames) state = cell(x, state);
        ad::Tensor raw = ad::add_channel_bias(ad::conv2d(state.hidden, head_w_.value), head_b_.value);
        ad::Tensor med = ad::slice_channel(raw, 0);
        ad::Tensor lo = ad::sub(med, ad::softplus(ad::slice_channel(raw, 1)));
        ad::Tensor hi = ad::add(med, ad::softplus(ad::slice_channel(raw, 2)));
        return {lo, med, hi};
    }

    QuantileGrids forward_frames(const GridStack& stack, const std::array<size_t, 3>& idx,
                                 size_t channel = 0) {
        std::array<ad::Tensor, 3> frames = {make_input(stack.frame(idx[0], channel), stack.h, stack.w),
                                            make_input(stack.frame(idx[1], channel), stack.h, stack.w),
                                            make_input(stack.frame(idx[2], channel), stack.h, stack.w)};
        return forward(frames);
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
    // Per-pixel basis features at cell centers, cached per raster size.
    const std::vector<double>& aux_raster(size_t h, size_t w) {
        auto key = std::make_pair(h, w);
        auto it = aux_cache_.find(key);
        if (it != aux_cache_.end()) return it->second;
        std::vector<double> raster(aux_channels_ * h * w);
        std::vector<double> features(aux_channels_);
        for (size_t row = 0; row < h; ++row) {
            double v = 1.0 - (row + 0.5) / static_cast<double>(h);  // row 0 = north
            for (size_t col = 0; col < w; ++col) {
                double u = (col + 0.5) / static_cast<double>(w);
                spatial_embedding_into(u, v, aux_levels_, features.data());
                for (size_t f = 0; f < aux_channels_; ++f)
                    raster[f * h * w + row * w + col] = features[f];
            }
        }
        return aux_cache_.emplace(key, std::move(raster)).first->second;
    }

    ForecastConfig config_;
    std::vector<SpatialKnotLevel> aux_levels_;
    size_t aux_channels_ = 0;
    size_t in_channels_ = 1;
    ad::Parameter wx_[4], wh_[4], b_[4];
    ad::Parameter head_w_, head_b_;
    std::map<std::pair<size_t, size_t>, std::vector<double>> aux_cache_;
};

// ---------------------------------------------------------------------------
// Training: minibatch Adam on the mean pixelwise pinball loss over the three
// quantile maps. Missing target pixels are excluded via a 0/1 mask.

inline TrainResult train_forecaster(ConvLstmForecaster& model, const GridStack& stack,
                                    const std::vector<ImageSequenceSample>& samples, uint64_t seed,
                                    size_t channel = 0) {
    if (samples.empty()) throw insufficient_data_error("train_forecaster: no samples");
    const ForecastConfig& cfg = model.config();
    auto params = model.parameters();
    Rng rng(seed ^ 0x9e3779b9);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    size_t plane = stack.plane();
    TrainResult result;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t epoch_obs = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            ad::Tensor batch_total;
            size_t n_obs = 0;
            for (size_t s = b0; s < b1; ++s) {
                const auto& sample = samples[order[s]];
                const double* target = stack.frame(sample.target_idx, channel);
                std::vector<double> yv(plane), mv(plane);
                size_t obs = 0;
                for (size_t i = 0; i < plane; ++i) {
                    bool present = !is_missing(target[i]);
                    yv[i] = present ? target[i] : 0.0;
                    mv[i] = present ? 1.0 : 0.0;
                    obs += present;
                }
                if (obs == 0) continue;  // fully missing target contributes nothing
                n_obs += obs;
                ad::Tensor y = ad::Tensor::from({stack.h, stack.w}, std::move(yv));
                ad::Tensor mask = ad::Tensor::from({stack.h, stack.w}, std::move(mv));
                auto grids = model.forward_frames(stack, sample.input_idx, channel);
                ad::Tensor total = ad::add(
                    ad::add(pinball_terms(grids.lower, y, cfg.quantiles.low, mask),
                            pinball_terms(grids.median, y, cfg.quantiles.mid, mask)),
                    pinball_terms(grids.upper, y, cfg.quantiles.high, mask));
                batch_total = batch_total.defined() ? ad::add(batch_total, total) : total;
            }
            if (n_obs == 0) continue;
            ad::Tensor loss = ad::scale(batch_total, 1.0 / static_cast<double>(n_obs));
            double lval = loss.item();
            if (!std::isfinite(lval)) {
                double max_abs = 0.0;
                for (auto* p : params)
                    for (double wv : p->value.data()) max_abs = std::max(max_abs, std::abs(wv));
                throw numeric_error(strf(
                    "train_forecaster: non-finite loss at epoch %zu batch %zu (max |param| = %s)",
                    epoch, b0 / cfg.batch_size, fmt_double(max_abs).c_str()));
            }
            ad::backward(loss);
            ad::adam_step(params, cfg.lr);
            epoch_loss += lval * static_cast<double>(n_obs);
            epoch_obs += n_obs;
        }
        result.loss_history.push_back(epoch_obs ? epoch_loss / static_cast<double>(epoch_obs)
                                                : 0.0);
    }
    return result;
}

// Rolls the model over every window of `stack` (using `channel` as the input
// field) and writes a quantile stack: T - 5 steps, channels (lower, median,
// upper), step s holding the prediction for input time s + 5.
inline GridStack predict_forecast_stack(ConvLstmForecaster& model, const GridStack& stack,
                                        size_t channel = 0, size_t lead = 3) {
    auto samples = build_sequences(stack.t, lead);
    GridStack out = GridStack::make(samples.size(), 3, stack.h, stack.w);
    ad::NoGradGuard no_grad;
    for (size_t s = 0; s < samples.size(); ++s) {
        auto grids = model.forward_frames(stack, samples[s].input_idx, channel);
        std::copy(grids.lower.data().begin(), grids.lower.data().end(), out.frame(s, 0));
        std::copy(grids.median.data().begin(), grids.median.data().end(), out.frame(s, 1));
        std::copy(grids.upper.data().begin(), grids.upper.data().end(), out.frame(s, 2));
    }
    return out;
}

}  // namespace stdk
