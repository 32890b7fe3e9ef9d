#pragma once

// Grid-stack file: versioned binary holding T frames (C channels each) of an
// H x W raster, little-endian f64, NaN = missing. Header carries the config
// hash and seed of the producing run for provenance checks. Quantile stacks
// use C = 3 with channel order (lower, median, upper); plain stacks C = 1.

#include <fstream>
#include <string>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

inline constexpr uint32_t kGridStackVersion = 1;

struct GridStack {
    size_t t = 0, c = 1, h = 0, w = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::vector<double> data;  // [t][c][h][w] row-major; row 0 = northernmost

    static GridStack make(size_t t, size_t c, size_t h, size_t w) {
        GridStack g;
        g.t = t;
        g.c = c;
        g.h = h;
        g.w = w;
        g.data.assign(t * c * h * w, kMissing);
        return g;
    }

    size_t plane() const { return h * w; }

    double* frame(size_t ti, size_t ci = 0) { return data.data() + (ti * c + ci) * plane(); }
    const double* frame(size_t ti, size_t ci = 0) const {
        return data.data() + (ti * c + ci) * plane();
    }

    double at(size_t ti, size_t ci, size_t row, size_t col) const {
        return frame(ti, ci)[row * w + col];
    }
    double& at(size_t ti, size_t ci, size_t row, size_t col) {
        return frame(ti, ci)[row * w + col];
    }
};

inline void save_grid_stack(std::ostream& os, const GridStack& g) {
    os.write("GRDS", 4);
    write_u32(os, kGridStackVersion);
    write_u64(os, g.config_hash);
    write_u64(os, g.seed);
    write_u32(os, static_cast<uint32_t>(g.t));
    write_u32(os, static_cast<uint32_t>(g.c));
    write_u32(os, static_cast<uint32_t>(g.h));
    write_u32(os, static_cast<uint32_t>(g.w));
    for (double x : g.data) write_f64(os, x);
    if (!os) throw io_error("grid-stack write failed");
}

inline void save_grid_stack(const std::string& path, const GridStack& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open grid stack for writing: " + path);
    save_grid_stack(os, g);
}

inline GridStack load_grid_stack(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string_view(magic, 4) != "GRDS")
        throw parse_error("grid stack: bad magic, expected GRDS");
    uint32_t version = read_u32(is);
    if (version != kGridStackVersion)
        throw parse_error(strf("grid stack: unsupported format version %u", version));
    GridStack g;
    g.config_hash = read_u64(is);
    g.seed = read_u64(is);
    g.t = read_u32(is);
    g.c = read_u32(is);
    g.h = read_u32(is);
    g.w = read_u32(is);
    if (g.c < 1 || g.h < 1 || g.w < 1) throw parse_error("grid stack: degenerate dimensions");
    g.data.resize(g.t * g.c * g.h * g.w);
    for (auto& x : g.data) x = read_f64(is);
    return g;
}

inline GridStack load_grid_stack(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open grid stack: " + path);
    return load_grid_stack(is);
}

}  // namespace stdk
