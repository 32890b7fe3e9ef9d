#pragma once

// Command implementations behind the CLI: ingest -> train-interp ->
// interpolate -> train-forecast -> forecast -> evaluate -> render.
// Every command echoes its effective configuration into the output
// directory and stamps artifacts with the config hash and seed.
//
// Provenance rules: interpolation checkpoints are bound to the basis
// contract (basis section + grid bbox + water-mask bytes + feature layout
// version + temporal span); grid stacks and forecast checkpoints are bound
// to the full effective config. Mismatches raise provenance_error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stdk/basis.hpp"
#include "stdk/checkpoint.hpp"
#include "stdk/common.hpp"
#include "stdk/config.hpp"
#include "stdk/forecast.hpp"
#include "stdk/gridstack.hpp"
#include "stdk/ingest.hpp"
#include "stdk/metrics.hpp"
#include "stdk/quantile_net.hpp"
#include "stdk/render.hpp"

namespace stdk {

// Artifact names inside the output directory.
inline constexpr const char* kStdSeriesFile = "stations_std.csv";
inline constexpr const char* kStandardizationFile = "standardization.txt";
inline constexpr const char* kInterpCheckpoint = "interp.ckpt";
inline constexpr const char* kInterpStack = "interp_stack.grds";
inline constexpr const char* kForecastCheckpoint = "forecast.ckpt";
inline constexpr const char* kForecastStack = "forecast_stack.grds";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kReportText = "report.txt";

struct RunConfig {
    ConfigFile raw;  // effective config (file + CLI overrides)

    // [paths]
    std::string stations_csv;
    std::string water_mask;  // empty = no mask
    std::string out_dir = "out";

    // [run]
    uint64_t seed = 1;

    // [ingest]
    size_t ma_window = 10;

    // [grid]
    BBox bbox;
    size_t nx = 8, ny = 8;
    size_t t_start = 0, t_end = 0;

    // [basis]
    BasisConfig basis;

    // [interp]
    StdkConfig interp;

    // [forecast]
    ForecastConfig forecast;
    std::string forecast_variant = "convlstm";  // or "stdk"
    size_t forecast_basis_side = 9;
    size_t lead = 3;

    uint64_t config_hash() const { return raw.hash(); }

    std::filesystem::path out_path(const std::string& name) const {
        return std::filesystem::path(out_dir) / name;
    }
};

namespace pipeline_detail {

inline void require_file(const std::string& path, const char* what) {
    if (path.empty())
        throw invalid_argument_error(strf("missing required path for %s", what));
    if (!std::filesystem::exists(path))
        throw io_error(strf("%s not found: %s", what, path.c_str()));
}

inline uint64_t parse_hex64(const std::string& s, const char* what) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 16);
    if (s.empty() || end != s.c_str() + s.size())
        throw parse_error(strf("bad %s hash '%s'", what, s.c_str()));
    return static_cast<uint64_t>(v);
}

}  // namespace pipeline_detail

// Parses a config file plus optional CLI overrides into a RunConfig.
// Overrides are folded into the raw config before hashing, so the effective
// configuration is exactly what the provenance hash covers.
inline RunConfig load_run_config(const std::string& path, std::optional<uint64_t> seed_override = {},
                                 std::optional<std::string> out_override = {}) {
    ConfigFile file = ConfigFile::parse_file(path);
    if (seed_override) file.set("run", "seed", std::to_string(*seed_override));
    if (out_override) file.set("paths", "out", *out_override);

    RunConfig cfg;

    // [grid] may live inline or in a standalone flat key-value file; the
    // file's keys are folded into the effective config so the hash sees them.
    if (file.has("paths", "grid")) {
        std::string gpath = file.get_string("paths", "grid");
        pipeline_detail::require_file(gpath, "grid spec file");
        std::ifstream in(gpath, std::ios::binary);
        ConfigFile gspec = ConfigFile::parse(in, gpath);
        auto flat = gspec.sections().find("");
        if (flat == gspec.sections().end() || flat->second.empty())
            throw parse_error("grid spec file has no key = value entries: " + gpath);
        for (const auto& [key, value] : flat->second) file.set("grid", key, value);
    }
    cfg.raw = file;

    cfg.stations_csv = file.get_string("paths", "stations", "");
    cfg.water_mask = file.get_string("paths", "water_mask", "");
    cfg.out_dir = file.get_string("paths", "out", "out");
    cfg.seed = file.get_u64("run", "seed", 1);
    cfg.ma_window = file.get_size("ingest", "window", 10);

    cfg.bbox.lon_min = file.get_double("grid", "lon_min", 0.0);
    cfg.bbox.lon_max = file.get_double("grid", "lon_max", 1.0);
    cfg.bbox.lat_min = file.get_double("grid", "lat_min", 0.0);
    cfg.bbox.lat_max = file.get_double("grid", "lat_max", 1.0);
    cfg.nx = file.get_size("grid", "nx", 8);
    cfg.ny = file.get_size("grid", "ny", 8);
    cfg.t_start = file.get_size("grid", "t_start", 0);
    cfg.t_end = file.get_size("grid", "t_end", 0);

    cfg.basis.spatial_sides = file.get_sizes("basis", "spatial_sides", {9, 17, 35, 73});
    cfg.basis.temporal_counts = file.get_sizes("basis", "temporal_counts", {50, 350, 1000});
    cfg.basis.support_factor = file.get_double("basis", "support_factor", 2.5);
    cfg.basis.bandwidth_factor = file.get_double("basis", "bandwidth_factor", 2.0);

    cfg.interp.hidden_layout =
        file.get_sizes("interp", "hidden", {100, 100, 100, 100, 100, 50, 50, 50, 50});
    cfg.interp.epochs = file.get_size("interp", "epochs", 100);
    cfg.interp.batch_size = file.get_size("interp", "batch_size", 256);
    cfg.interp.lr = file.get_double("interp", "lr", 1e-3);
    cfg.interp.quantiles.low = file.get_double("interp", "tau_low", 0.025);
    cfg.interp.quantiles.mid = file.get_double("interp", "tau_mid", 0.5);
    cfg.interp.quantiles.high = file.get_double("interp", "tau_high", 0.975);
    if (!cfg.interp.quantiles.valid())
        throw invalid_argument_error("config: interp quantiles must satisfy 0 < low < mid < high < 1");

    cfg.forecast.hidden_channels = file.get_size("forecast", "hidden_channels", 16);
    cfg.forecast.kernel = file.get_size("forecast", "kernel", 3);
    cfg.forecast.epochs = file.get_size("forecast", "epochs", 50);
    cfg.forecast.batch_size = file.get_size("forecast", "batch_size", 8);
    cfg.forecast.lr = file.get_double("forecast", "lr", 1e-3);
    cfg.forecast.quantiles = cfg.interp.quantiles;
    cfg.forecast_variant = file.get_string("forecast", "model", "convlstm");
    if (cfg.forecast_variant != "convlstm" && cfg.forecast_variant != "stdk")
        throw invalid_argument_error("config: forecast.model must be 'convlstm' or 'stdk'");
    cfg.forecast_basis_side = file.get_size("forecast", "basis_side", 9);
    cfg.lead = file.get_size("forecast", "lead", 3);
    return cfg;
}

// ---------------------------------------------------------------------------
// Provenance.

// Hash of everything the embedding layout depends on. Checkpoints produced
// under one basis contract refuse to serve another.
inline uint64_t basis_contract_hash(const RunConfig& cfg) {
    std::string material = strf("layout_version = %u\n", kFeatureLayoutVersion);
    material += "spatial_sides =";
    for (size_t s : cfg.basis.spatial_sides) material += strf(" %zu", s);
    material += "\ntemporal_counts =";
    for (size_t c : cfg.basis.temporal_counts) material += strf(" %zu", c);
    material += strf("\nsupport_factor = %s\nbandwidth_factor = %s\n",
                     fmt_double(cfg.basis.support_factor).c_str(),
                     fmt_double(cfg.basis.bandwidth_factor).c_str());
    material += strf("bbox = %s %s %s %s\n", fmt_double(cfg.bbox.lon_min).c_str(),
                     fmt_double(cfg.bbox.lon_max).c_str(), fmt_double(cfg.bbox.lat_min).c_str(),
                     fmt_double(cfg.bbox.lat_max).c_str());
    if (!cfg.water_mask.empty()) {
        std::ifstream in(cfg.water_mask, std::ios::binary);
        if (!in) throw io_error("water mask not found: " + cfg.water_mask);
        std::ostringstream ss;
        ss << in.rdbuf();
        material += "mask = " + ss.str();
    }
    return fnv1a64(material);
}

inline void echo_config(const RunConfig& cfg, const std::string& command) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream os(cfg.out_path("echo_" + command + ".txt"), std::ios::binary);
    os << "# effective configuration, hash " << hex64(cfg.config_hash()) << "\n"
       << cfg.raw.canonical();
}

// ---------------------------------------------------------------------------
// Shared ingest artifacts.

struct IngestMeta {
    StandardizationParams params;
    size_t window = 10;
    size_t n_times = 0;       // global time-axis length (days)
    Date start_date;          // global time-axis origin
    size_t n_stations = 0;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
};

inline void save_ingest_meta(const std::string& path, const IngestMeta& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    os << "mean = " << fmt_double(m.params.mean) << "\n"
       << "std = " << fmt_double(m.params.std) << "\n"
       << "window = " << m.window << "\n"
       << "n_times = " << m.n_times << "\n"
       << "start_date = " << to_iso_string(m.start_date) << "\n"
       << "n_stations = " << m.n_stations << "\n"
       << "seed = " << m.seed << "\n"
       << "config = " << hex64(m.config_hash) << "\n";
}

inline IngestMeta load_ingest_meta(const std::string& path) {
    pipeline_detail::require_file(path, "standardization params file");
    std::ifstream in(path, std::ios::binary);
    ConfigFile kv = ConfigFile::parse(in, path);
    IngestMeta m;
    m.params.mean = kv.get_double("", "mean");
    m.params.std = kv.get_double("", "std");
    m.window = kv.get_size("", "window");
    m.n_times = kv.get_size("", "n_times");
    m.start_date = parse_iso_date(kv.get_string("", "start_date"), 0);
    m.n_stations = kv.get_size("", "n_stations");
    m.seed = kv.get_u64("", "seed");
    m.config_hash = pipeline_detail::parse_hex64(kv.get_string("", "config"), "config");
    return m;
}

// ---------------------------------------------------------------------------
// Commands.

inline void cmd_ingest(const RunConfig& cfg) {
    pipeline_detail::require_file(cfg.stations_csv, "stations CSV");
    std::vector<StationSeries> stations = parse_station_csv(cfg.stations_csv);

    for (auto& s : stations) s.values = moving_average(s.values, cfg.ma_window);
    StandardizationParams params = standardize_stations(stations);

    int64_t day_min = 0, day_max = 0;
    bool first = true;
    for (const auto& s : stations) {
        int64_t d0 = days_from_civil(s.start_date);
        int64_t d1 = d0 + static_cast<int64_t>(s.values.size()) - 1;
        if (first || d0 < day_min) day_min = d0;
        if (first || d1 > day_max) day_max = d1;
        first = false;
    }

    echo_config(cfg, "ingest");
    {
        std::ofstream os(cfg.out_path(kStdSeriesFile), std::ios::binary);
        if (!os) throw io_error("cannot write standardized series");
        write_station_csv(os, stations);
    }
    IngestMeta meta;
    meta.params = params;
    meta.window = cfg.ma_window;
    meta.n_times = static_cast<size_t>(day_max - day_min + 1);
    meta.start_date = civil_from_days(day_min);
    meta.n_stations = stations.size();
    meta.seed = cfg.seed;
    meta.config_hash = cfg.config_hash();
    save_ingest_meta(cfg.out_path(kStandardizationFile).string(), meta);
    std::cout << "wrote " << cfg.out_path(kStdSeriesFile).string() << " ("
              << stations.size() << " stations, " << meta.n_times << " time steps)\n";
}

// Knot levels under the configured mask. Warns (stderr) when masking removes
// every knot.
inline std::vector<SpatialKnotLevel> build_masked_knots(const RunConfig& cfg) {
    auto levels = make_spatial_knots(cfg.basis.spatial_sides, cfg.basis.support_factor);
    if (!cfg.water_mask.empty()) {
        pipeline_detail::require_file(cfg.water_mask, "water mask");
        WaterMask mask = parse_water_mask(cfg.water_mask);
        size_t removed = 0;
        levels = apply_water_mask(levels, mask, cfg.bbox, &removed);
        if (total_knots(levels) == 0)
            std::cerr << "warning: water mask removed all " << removed << " spatial knots\n";
    }
    return levels;
}

struct InterpMeta {
    uint64_t basis_hash = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    size_t input_dim = 0;
    size_t n_times = 0;
    StdkConfig net;
    StandardizationParams params;
};

inline void save_interp_meta(const std::string& path, const InterpMeta& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    os << "[provenance]\n"
       << "basis = " << hex64(m.basis_hash) << "\n"
       << "config = " << hex64(m.config_hash) << "\n"
       << "layout_version = " << kFeatureLayoutVersion << "\n"
       << "seed = " << m.seed << "\n"
       << "[model]\n"
       << "input_dim = " << m.input_dim << "\n"
       << "n_times = " << m.n_times << "\n"
       << "hidden =";
    for (size_t i = 0; i < m.net.hidden_layout.size(); ++i)
        os << (i ? "," : " ") << m.net.hidden_layout[i];
    os << "\n"
       << "tau_low = " << fmt_double(m.net.quantiles.low) << "\n"
       << "tau_mid = " << fmt_double(m.net.quantiles.mid) << "\n"
       << "tau_high = " << fmt_double(m.net.quantiles.high) << "\n"
       << "epochs = " << m.net.epochs << "\n"
       << "batch_size = " << m.net.batch_size << "\n"
       << "lr = " << fmt_double(m.net.lr) << "\n"
       << "[standardization]\n"
       << "mean = " << fmt_double(m.params.mean) << "\n"
       << "std = " << fmt_double(m.params.std) << "\n";
}

inline InterpMeta load_interp_meta(const std::string& path) {
    pipeline_detail::require_file(path, "interpolation checkpoint sidecar");
    std::ifstream in(path, std::ios::binary);
    ConfigFile kv = ConfigFile::parse(in, path);
    InterpMeta m;
    m.basis_hash = pipeline_detail::parse_hex64(kv.get_string("provenance", "basis"), "basis");
    m.config_hash = pipeline_detail::parse_hex64(kv.get_string("provenance", "config"), "config");
    if (kv.get_size("provenance", "layout_version") != kFeatureLayoutVersion)
        throw provenance_error("checkpoint uses a different feature layout version");
    m.seed = kv.get_u64("provenance", "seed");
    m.input_dim = kv.get_size("model", "input_dim");
    m.n_times = kv.get_size("model", "n_times");
    m.net.hidden_layout = kv.get_sizes("model", "hidden");
    m.net.quantiles.low = kv.get_double("model", "tau_low");
    m.net.quantiles.mid = kv.get_double("model", "tau_mid");
    m.net.quantiles.high = kv.get_double("model", "tau_high");
    m.net.epochs = kv.get_size("model", "epochs");
    m.net.batch_size = kv.get_size("model", "batch_size");
    m.net.lr = kv.get_double("model", "lr");
    m.params.mean = kv.get_double("standardization", "mean");
    m.params.std = kv.get_double("standardization", "std");
    return m;
}

inline void cmd_train_interp(const RunConfig& cfg) {
    std::string series_path = cfg.out_path(kStdSeriesFile).string();
    pipeline_detail::require_file(series_path, "standardized series (run ingest first)");
    IngestMeta ingest = load_ingest_meta(cfg.out_path(kStandardizationFile).string());
    std::vector<StationSeries> stations = parse_station_csv(series_path);

    auto spatial = build_masked_knots(cfg);
    auto temporal = make_temporal_centers(cfg.basis.temporal_counts, cfg.basis.bandwidth_factor);

    int64_t day0 = days_from_civil(ingest.start_date);
    double t_denom = ingest.n_times > 1 ? static_cast<double>(ingest.n_times - 1) : 1.0;
    std::vector<SpaceTimePoint> points;
    std::vector<double> targets;
    size_t skipped_outside = 0;
    for (const auto& s : stations) {
        double u = (s.lon - cfg.bbox.lon_min) / (cfg.bbox.lon_max - cfg.bbox.lon_min);
        double v = (s.lat - cfg.bbox.lat_min) / (cfg.bbox.lat_max - cfg.bbox.lat_min);
        if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
            ++skipped_outside;
            continue;
        }
        int64_t offset = days_from_civil(s.start_date) - day0;
        for (size_t i = 0; i < s.values.size(); ++i) {
            if (is_missing(s.values[i])) continue;
            double t = static_cast<double>(offset + static_cast<int64_t>(i)) / t_denom;
            points.push_back({u, v, t});
            targets.push_back(s.values[i]);
        }
    }
    if (skipped_outside)
        std::cerr << "warning: " << skipped_outside << " stations outside the grid bbox were skipped\n";
    if (points.empty()) throw insufficient_data_error("train-interp: no observations inside the bbox");

    EmbeddingMatrix embeddings = embed_space_time(points, spatial, temporal);
    QuantileNet model(cfg.interp, embeddings.cols, cfg.seed);
    TrainResult trained = train_interpolator(model, embeddings, targets, cfg.seed);

    echo_config(cfg, "train-interp");
    save_checkpoint(cfg.out_path(kInterpCheckpoint).string(), model.snapshot());
    InterpMeta meta;
    meta.basis_hash = basis_contract_hash(cfg);
    meta.config_hash = cfg.config_hash();
    meta.seed = cfg.seed;
    meta.input_dim = embeddings.cols;
    meta.n_times = ingest.n_times;
    meta.net = cfg.interp;
    meta.params = ingest.params;
    save_interp_meta(cfg.out_path(std::string(kInterpCheckpoint) + ".meta").string(), meta);
    std::cout << "trained interpolator on " << points.size() << " observations, final loss "
              << fmt_double(trained.loss_history.back()) << "\n";
}

inline void cmd_interpolate(const RunConfig& cfg, const std::string& checkpoint_override = "") {
    std::string ckpt_path =
        checkpoint_override.empty() ? cfg.out_path(kInterpCheckpoint).string() : checkpoint_override;
    pipeline_detail::require_file(ckpt_path, "interpolation checkpoint");
    InterpMeta meta = load_interp_meta(ckpt_path + ".meta");
    if (meta.basis_hash != basis_contract_hash(cfg))
        throw provenance_error(
            strf("checkpoint basis contract %s does not match current config %s",
                 hex64(meta.basis_hash).c_str(), hex64(basis_contract_hash(cfg)).c_str()));

    auto spatial = build_masked_knots(cfg);
    auto temporal = make_temporal_centers(cfg.basis.temporal_counts, cfg.basis.bandwidth_factor);
    size_t dim = total_centers(temporal) + total_knots(spatial);
    if (dim != meta.input_dim)
        throw shape_error(strf("embedding width %zu does not match checkpoint input_dim %zu", dim,
                               meta.input_dim));

    QuantileNet model(meta.net, meta.input_dim, meta.seed);
    model.restore(load_checkpoint(ckpt_path));

    if (cfg.t_end < cfg.t_start)
        throw invalid_argument_error("interpolate: grid t_end must be >= t_start");
    if (cfg.t_end >= meta.n_times)
        throw invalid_argument_error(
            strf("interpolate: t_end %zu outside the ingested span of %zu steps", cfg.t_end,
                 meta.n_times));
    std::vector<size_t> times;
    for (size_t t = cfg.t_start; t <= cfg.t_end; ++t) times.push_back(t);
    SpaceTimeGrid grid = make_grid(cfg.bbox, cfg.nx, cfg.ny, times);

    double t_denom = meta.n_times > 1 ? static_cast<double>(meta.n_times - 1) : 1.0;
    GridStack stack = GridStack::make(times.size(), 3, cfg.ny, cfg.nx);
    stack.config_hash = cfg.config_hash();
    stack.seed = cfg.seed;

    std::vector<SpaceTimePoint> cells(cfg.nx * cfg.ny);
    for (size_t ti = 0; ti < times.size(); ++ti) {
        double t_norm = static_cast<double>(times[ti]) / t_denom;
        size_t k = 0;
        for (size_t row = 0; row < cfg.ny; ++row) {
            size_t iy = cfg.ny - 1 - row;  // row 0 = north
            for (size_t ix = 0; ix < cfg.nx; ++ix)
                cells[k++] = {grid.center_u(ix), grid.center_v(iy), t_norm};
        }
        EmbeddingMatrix emb = embed_space_time(cells, spatial, temporal);
        std::vector<QuantileTriple> pred = model.predict(emb);
        for (size_t i = 0; i < pred.size(); ++i) {
            stack.frame(ti, 0)[i] = pred[i].lower;
            stack.frame(ti, 1)[i] = pred[i].median;
            stack.frame(ti, 2)[i] = pred[i].upper;
        }
    }

    echo_config(cfg, "interpolate");
    save_grid_stack(cfg.out_path(kInterpStack).string(), stack);
    std::cout << "wrote " << cfg.out_path(kInterpStack).string() << " (" << stack.t
              << " steps of " << stack.h << "x" << stack.w << ")\n";
}

struct ForecastMeta {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string variant;
    size_t hidden_channels = 0, kernel = 0, basis_side = 0, lead = 3;
    QuantileLevels quantiles;
};

inline void save_forecast_meta(const std::string& path, const ForecastMeta& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    os << "[provenance]\n"
       << "config = " << hex64(m.config_hash) << "\n"
       << "seed = " << m.seed << "\n"
       << "[model]\n"
       << "variant = " << m.variant << "\n"
       << "hidden_channels = " << m.hidden_channels << "\n"
       << "kernel = " << m.kernel << "\n"
       << "basis_side = " << m.basis_side << "\n"
       << "lead = " << m.lead << "\n"
       << "tau_low = " << fmt_double(m.quantiles.low) << "\n"
       << "tau_mid = " << fmt_double(m.quantiles.mid) << "\n"
       << "tau_high = " << fmt_double(m.quantiles.high) << "\n";
}

inline ForecastMeta load_forecast_meta(const std::string& path) {
    pipeline_detail::require_file(path, "forecast checkpoint sidecar");
    std::ifstream in(path, std::ios::binary);
    ConfigFile kv = ConfigFile::parse(in, path);
    ForecastMeta m;
    m.config_hash = pipeline_detail::parse_hex64(kv.get_string("provenance", "config"), "config");
    m.seed = kv.get_u64("provenance", "seed");
    m.variant = kv.get_string("model", "variant");
    m.hidden_channels = kv.get_size("model", "hidden_channels");
    m.kernel = kv.get_size("model", "kernel");
    m.basis_side = kv.get_size("model", "basis_side");
    m.lead = kv.get_size("model", "lead");
    m.quantiles.low = kv.get_double("model", "tau_low");
    m.quantiles.mid = kv.get_double("model", "tau_mid");
    m.quantiles.high = kv.get_double("model", "tau_high");
    return m;
}

inline ConvLstmForecaster make_forecaster(const RunConfig& cfg, uint64_t seed) {
    std::vector<SpatialKnotLevel> aux;
    if (cfg.forecast_variant == "stdk")
        aux = make_spatial_knots({cfg.forecast_basis_side}, cfg.basis.support_factor);
    return ConvLstmForecaster(cfg.forecast, seed, std::move(aux));
}

inline void cmd_train_forecast(const RunConfig& cfg, const std::string& stack_override = "") {
    std::string stack_path =
        stack_override.empty() ? cfg.out_path(kInterpStack).string() : stack_override;
    pipeline_detail::require_file(stack_path, "interpolated grid stack");
    GridStack stack = load_grid_stack(stack_path);
    if (stack.config_hash != cfg.config_hash())
        throw provenance_error(strf("grid stack config %s does not match current config %s",
                                    hex64(stack.config_hash).c_str(),
                                    hex64(cfg.config_hash()).c_str()));
    size_t channel = stack.c == 3 ? 1 : 0;  // median channel of quantile stacks

    auto samples = build_sequences(stack.t, cfg.lead);
    ConvLstmForecaster model = make_forecaster(cfg, cfg.seed + 1);
    TrainResult trained = train_forecaster(model, stack, samples, cfg.seed + 1, channel);

    echo_config(cfg, "train-forecast");
    save_checkpoint(cfg.out_path(kForecastCheckpoint).string(), model.snapshot());
    ForecastMeta meta;
    meta.config_hash = cfg.config_hash();
    meta.seed = cfg.seed + 1;
    meta.variant = cfg.forecast_variant;
    meta.hidden_channels = cfg.forecast.hidden_channels;
    meta.kernel = cfg.forecast.kernel;
    meta.basis_side = cfg.forecast_basis_side;
    meta.lead = cfg.lead;
    meta.quantiles = cfg.forecast.quantiles;
    save_forecast_meta(cfg.out_path(std::string(kForecastCheckpoint) + ".meta").string(), meta);
    std::cout << "trained " << cfg.forecast_variant << " forecaster on " << samples.size()
              << " sequences, final loss " << fmt_double(trained.loss_history.back()) << "\n";
}

inline void cmd_forecast(const RunConfig& cfg, const std::string& checkpoint_override = "",
                         const std::string& stack_override = "") {
    std::string ckpt_path = checkpoint_override.empty() ? cfg.out_path(kForecastCheckpoint).string()
                                                        : checkpoint_override;
    std::string stack_path =
        stack_override.empty() ? cfg.out_path(kInterpStack).string() : stack_override;
    pipeline_detail::require_file(ckpt_path, "forecast checkpoint");
    pipeline_detail::require_file(stack_path, "input grid stack");

    ForecastMeta meta = load_forecast_meta(ckpt_path + ".meta");
    if (meta.config_hash != cfg.config_hash())
        throw provenance_error(strf("forecast checkpoint config %s does not match current config %s",
                                    hex64(meta.config_hash).c_str(),
                                    hex64(cfg.config_hash()).c_str()));
    GridStack stack = load_grid_stack(stack_path);
    if (stack.config_hash != cfg.config_hash())
        throw provenance_error("input grid stack comes from a different configuration");

    ConvLstmForecaster model = make_forecaster(cfg, meta.seed);
    model.restore(load_checkpoint(ckpt_path));

    size_t channel = stack.c == 3 ? 1 : 0;
    GridStack out = predict_forecast_stack(model, stack, channel, meta.lead);
    out.config_hash = cfg.config_hash();
    out.seed = cfg.seed;

    echo_config(cfg, "forecast");
    save_grid_stack(cfg.out_path(kForecastStack).string(), out);
    std::cout << "wrote " << cfg.out_path(kForecastStack).string() << " (" << out.t
              << " forecast steps)\n";
}

// Truth stack must be single-channel; predictions may be single-channel
// (degenerate intervals) or quantile stacks. Trailing frames are aligned:
// prediction step s scores against truth frame (truth.t - preds.t + s).
inline EvalReport cmd_evaluate(const std::string& truth_path, const std::string& preds_path,
                               const RunConfig& cfg, bool destandardize_first = false) {
    pipeline_detail::require_file(truth_path, "truth grid stack");
    pipeline_detail::require_file(preds_path, "prediction grid stack");
    GridStack truth = load_grid_stack(truth_path);
    GridStack preds = load_grid_stack(preds_path);
    if (truth.c != 1)
        throw shape_error(strf("evaluate: truth stack must have 1 channel, got %zu", truth.c));
    if (preds.c != 1 && preds.c != 3)
        throw shape_error(strf("evaluate: prediction stack must have 1 or 3 channels, got %zu",
                               preds.c));
    if (truth.h != preds.h || truth.w != preds.w)
        throw shape_error(strf("evaluate: grids are %zux%zu vs %zux%zu", truth.h, truth.w, preds.h,
                               preds.w));
    if (preds.t > truth.t)
        throw shape_error(strf("evaluate: %zu prediction steps exceed %zu truth steps", preds.t,
                               truth.t));
    if (preds.t == 0) throw empty_input_error("evaluate: empty prediction stack");

    size_t offset = truth.t - preds.t;
    size_t plane = truth.plane();
    std::vector<double> y, lo, med, up;
    for (size_t s = 0; s < preds.t; ++s) {
        const double* ty = truth.frame(offset + s, 0);
        const double* pl = preds.frame(s, 0);
        const double* pm = preds.frame(s, preds.c == 3 ? 1 : 0);
        const double* pu = preds.frame(s, preds.c == 3 ? 2 : 0);
        y.insert(y.end(), ty, ty + plane);
        lo.insert(lo.end(), pl, pl + plane);
        med.insert(med.end(), pm, pm + plane);
        up.insert(up.end(), pu, pu + plane);
    }

    if (destandardize_first) {
        IngestMeta ingest = load_ingest_meta(cfg.out_path(kStandardizationFile).string());
        y = destandardize(y, ingest.params);
        lo = destandardize(lo, ingest.params);
        med = destandardize(med, ingest.params);
        up = destandardize(up, ingest.params);
    }

    EvalReport report = evaluate(y, lo, med, up);
    echo_config(cfg, "evaluate");
    {
        std::ofstream os(cfg.out_path(kReportCsv), std::ios::binary);
        os << report_csv(report);
    }
    {
        std::ofstream os(cfg.out_path(kReportText), std::ios::binary);
        os << report_text(report) << "seed                : " << cfg.seed << "\n"
           << "config              : " << hex64(cfg.config_hash()) << "\n"
           << "scale               : " << (destandardize_first ? "mm/day" : "standardized") << "\n";
    }
    std::cout << report_text(report);
    return report;
}

inline void cmd_render(const std::string& stack_path, size_t time_index,
                       const std::string& out_png, const std::string& palette) {
    pipeline_detail::require_file(stack_path, "grid stack");
    GridStack stack = load_grid_stack(stack_path);
    render_frame_png(stack, time_index, out_png, palette);
    std::cout << "wrote " << out_png << "\n";
}

}  // namespace stdk
