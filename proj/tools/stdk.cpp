// stdk: spatio-temporal interpolation and forecasting pipeline.
//
// Subcommands: ingest, train-interp, interpolate, train-forecast, forecast,
// evaluate, render. Exit codes: 0 ok, 2 missing/invalid input, 3 provenance
// mismatch, 4 shape/index error, 5 numeric failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stdk/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "configuration file");
    if (config_required) c->required();
    cmd->add_option_function<uint64_t>(
        "--seed", [&opts](uint64_t v) { opts.seed = v; }, "override [run] seed");
    cmd->add_option_function<std::string>(
        "--out", [&opts](const std::string& v) { opts.out_dir = v; }, "override output directory");
}

stdk::RunConfig load(const CommonOpts& opts) {
    return stdk::load_run_config(opts.config_path, opts.seed, opts.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal DeepKriging pipeline"};
    app.require_subcommand(1);

    CommonOpts ingest_opts, train_interp_opts, interp_opts, train_fc_opts, fc_opts, eval_opts;

    auto* cmd_ingest = app.add_subcommand("ingest", "smooth, standardize and regrid station data");
    add_common(cmd_ingest, ingest_opts);

    auto* cmd_train_interp =
        app.add_subcommand("train-interp", "train the quantile interpolation network");
    add_common(cmd_train_interp, train_interp_opts);

    auto* cmd_interpolate =
        app.add_subcommand("interpolate", "predict quantile fields on the configured grid");
    add_common(cmd_interpolate, interp_opts);
    std::string interp_ckpt;
    cmd_interpolate->add_option("--checkpoint", interp_ckpt, "interpolation checkpoint path");

    auto* cmd_train_forecast =
        app.add_subcommand("train-forecast", "train the quantile ConvLSTM forecaster");
    add_common(cmd_train_forecast, train_fc_opts);
    std::string train_fc_stack;
    cmd_train_forecast->add_option("--stack", train_fc_stack, "input grid-stack path");

    auto* cmd_forecast = app.add_subcommand("forecast", "roll the forecaster over a grid stack");
    add_common(cmd_forecast, fc_opts);
    std::string fc_ckpt, fc_stack;
    cmd_forecast->add_option("--checkpoint", fc_ckpt, "forecast checkpoint path");
    cmd_forecast->add_option("--stack", fc_stack, "input grid-stack path");

    auto* cmd_evaluate = app.add_subcommand("evaluate", "score predictions against truth");
    add_common(cmd_evaluate, eval_opts);
    std::string truth_path, preds_path;
    bool mm_scale = false;
    cmd_evaluate->add_option("--truth", truth_path, "truth grid stack (1 channel)")->required();
    cmd_evaluate->add_option("--preds", preds_path, "prediction grid stack")->required();
    cmd_evaluate->add_flag("--mm", mm_scale, "destandardize to mm/day before scoring");

    auto* cmd_render = app.add_subcommand("render", "render a grid-stack frame as a PNG heatmap");
    std::string render_stack, render_out, palette = "viridis";
    size_t time_index = 0;
    cmd_render->add_option("--stack", render_stack, "grid-stack path")->required();
    cmd_render->add_option("--time", time_index, "time index to render")->required();
    cmd_render->add_option("--out-png", render_out, "output PNG path")->required();
    cmd_render->add_option("--palette", palette, "color palette: viridis or gray");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_ingest->parsed()) {
            stdk::cmd_ingest(load(ingest_opts));
        } else if (cmd_train_interp->parsed()) {
            stdk::cmd_train_interp(load(train_interp_opts));
        } else if (cmd_interpolate->parsed()) {
            stdk::cmd_interpolate(load(interp_opts), interp_ckpt);
        } else if (cmd_train_forecast->parsed()) {
            stdk::cmd_train_forecast(load(train_fc_opts), train_fc_stack);
        } else if (cmd_forecast->parsed()) {
            stdk::cmd_forecast(load(fc_opts), fc_ckpt, fc_stack);
        } else if (cmd_evaluate->parsed()) {
            stdk::cmd_evaluate(truth_path, preds_path, load(eval_opts), mm_scale);
        } else if (cmd_render->parsed()) {
            stdk::cmd_render(render_stack, time_index, render_out, palette);
        }
    } catch (const stdk::provenance_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const stdk::shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const stdk::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const stdk::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
