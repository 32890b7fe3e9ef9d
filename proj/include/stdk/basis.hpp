#pragma once

// Multi-resolution basis embeddings: compactly supported Wendland bumps on
// spatial knot lattices and Gaussian bumps on temporal center grids. Feature
// layout is temporal levels first (ascending), then spatial levels
// (ascending); versioned so checkpoints and embeddings cannot be mismatched.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stdk/common.hpp"
#include "stdk/ingest.hpp"

namespace stdk {

inline constexpr uint32_t kFeatureLayoutVersion = 1;

// ---------------------------------------------------------------------------
// Kernels.

// C^4 Wendland function ((1-d)_+)^6 (35 d^2 + 18 d + 3) / 3 on the distance
// ratio d = ||x - knot|| / support_radius. Zero for d >= 1.
inline double wendland_kernel(double d) {
    if (d < 0.0) throw invalid_argument_error("wendland_kernel: negative distance ratio");
    if (d >= 1.0) return 0.0;
    double one_m = 1.0 - d;
    double p2 = one_m * one_m;
    double p6 = p2 * p2 * p2;
    return p6 * (35.0 * d * d + 18.0 * d + 3.0) / 3.0;
}

// Max |d/dd wendland_kernel| over [0,1]; used by the Lipschitz property test.
inline double wendland_max_slope() {
    double best = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        double d = i / 10000.0;
        double f = (56.0 / 3.0) * d * (5.0 * d + 1.0) * std::pow(1.0 - d, 5.0);
        best = std::max(best, f);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Knot/center configuration.

struct BasisConfig {
    std::vector<size_t> spatial_sides = {9, 17, 35, 73};
    std::vector<size_t> temporal_counts = {50, 350, 1000};
    double support_factor = 2.5;    // support radius = factor * knot spacing
    double bandwidth_factor = 2.0;  // gaussian sigma = factor * center spacing
};

struct SpatialKnotLevel {
    size_t level_index = 0;
    size_t grid_side = 0;
    std::vector<std::pair<double, double>> knots;  // (u, v) in the unit square
    double support_radius = 0.0;
};

struct TemporalBasisLevel {
    size_t level_index = 0;
    std::vector<double> centers;  // in [0,1]
    double bandwidth = 0.0;
};

inline std::vector<SpatialKnotLevel> make_spatial_knots(const std::vector<size_t>& grid_sides,
                                                        double support_factor = 2.5) {
    if (support_factor <= 0.0)
        throw invalid_argument_error("make_spatial_knots: support_factor must be > 0");
    std::vector<SpatialKnotLevel> levels;
    levels.reserve(grid_sides.size());
    for (size_t li = 0; li < grid_sides.size(); ++li) {
        size_t side = grid_sides[li];
        if (side < 2) throw invalid_argument_error("make_spatial_knots: grid side must be >= 2");
        SpatialKnotLevel level;
        level.level_index = li;
        level.grid_side = side;
        double spacing = 1.0 / static_cast<double>(side - 1);
        level.support_radius = support_factor * spacing;
        level.knots.reserve(side * side);
        for (size_t j = 0; j < side; ++j)
            for (size_t i = 0; i < side; ++i)
                level.knots.emplace_back(i * spacing, j * spacing);
        levels.push_back(std::move(level));
    }
    return levels;
}

inline std::vector<TemporalBasisLevel> make_temporal_centers(const std::vector<size_t>& counts,
                                                             double bandwidth_factor = 2.0) {
    if (bandwidth_factor <= 0.0)
        throw invalid_argument_error("make_temporal_centers: bandwidth_factor must be > 0");
    std::vector<TemporalBasisLevel> levels;
    levels.reserve(counts.size());
    for (size_t li = 0; li < counts.size(); ++li) {
        size_t count = counts[li];
        if (count < 2) throw invalid_argument_error("make_temporal_centers: count must be >= 2");
        TemporalBasisLevel level;
        level.level_index = li;
        double spacing = 1.0 / static_cast<double>(count - 1);
        level.bandwidth = bandwidth_factor * spacing;
        level.centers.reserve(count);
        for (size_t i = 0; i < count; ++i) level.centers.push_back(i * spacing);
        levels.push_back(std::move(level));
    }
    return levels;
}

// ---------------------------------------------------------------------------
// Water mask: boolean raster over a bbox, true = water. File format is a
// header `rows cols lon_min lon_max lat_min lat_max` followed by `rows` lines
// of 0/1 characters, first line = northernmost row.

struct WaterMask {
    size_t rows = 0, cols = 0;
    BBox bbox;
    std::vector<uint8_t> water;  // row-major, row 0 = north

    bool water_at_lonlat(double lon, double lat) const {
        if (lon < bbox.lon_min || lon > bbox.lon_max || lat < bbox.lat_min || lat > bbox.lat_max)
            return false;  // outside the mask counts as land
        double fu = (lon - bbox.lon_min) / (bbox.lon_max - bbox.lon_min);
        double fv = (lat - bbox.lat_min) / (bbox.lat_max - bbox.lat_min);
        size_t col = std::min(cols - 1, static_cast<size_t>(fu * static_cast<double>(cols)));
        size_t row_from_top =
            std::min(rows - 1, static_cast<size_t>((1.0 - fv) * static_cast<double>(rows)));
        return water[row_from_top * cols + col] != 0;
    }
};

inline WaterMask parse_water_mask(std::istream& in) {
    WaterMask m;
    std::string header;
    if (!std::getline(in, header)) throw parse_error("water mask: missing header line");
    std::istringstream hs(header);
    if (!(hs >> m.rows >> m.cols >> m.bbox.lon_min >> m.bbox.lon_max >> m.bbox.lat_min >>
          m.bbox.lat_max))
        throw parse_error("water mask: bad header, expected 'rows cols lon_min lon_max lat_min lat_max'");
    if (m.rows < 1 || m.cols < 1) throw parse_error("water mask: dimensions must be >= 1x1");
    if (!m.bbox.valid()) throw parse_error("water mask: inverted bbox");
    m.water.resize(m.rows * m.cols);
    std::string line;
    for (size_t r = 0; r < m.rows; ++r) {
        if (!std::getline(in, line)) throw parse_error(strf("water mask: missing row %zu", r + 1));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.size() != m.cols)
            throw parse_error(strf("water mask: row %zu has %zu cells, expected %zu", r + 1,
                                   line.size(), m.cols));
        for (size_t c = 0; c < m.cols; ++c) {
            if (line[c] != '0' && line[c] != '1')
                throw parse_error(strf("water mask: row %zu col %zu: expected 0 or 1", r + 1, c + 1));
            m.water[r * m.cols + c] = static_cast<uint8_t>(line[c] - '0');
        }
    }
    return m;
}

inline WaterMask parse_water_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open water mask: " + path);
    return parse_water_mask(in);
}

// Removes knots over water. Knot (u,v) is interpreted in the unit square of
// `grid_bbox` (the interpolation domain), then looked up in the mask raster.
// Survivor order is preserved. Returns the surviving levels; sets
// *removed_count if given. An all-water result is allowed; callers warn.
inline std::vector<SpatialKnotLevel> apply_water_mask(const std::vector<SpatialKnotLevel>& levels,
                                                      const WaterMask& mask, const BBox& grid_bbox,
                                                      size_t* removed_count = nullptr) {
    if (!grid_bbox.valid()) throw invalid_argument_error("apply_water_mask: invalid grid bbox");
    size_t removed = 0;
    std::vector<SpatialKnotLevel> out;
    out.reserve(levels.size());
    for (const auto& level : levels) {
        SpatialKnotLevel filtered = level;
        filtered.knots.clear();
        for (const auto& [u, v] : level.knots) {
            double lon = grid_bbox.lon_min + u * (grid_bbox.lon_max - grid_bbox.lon_min);
            double lat = grid_bbox.lat_min + v * (grid_bbox.lat_max - grid_bbox.lat_min);
            if (mask.water_at_lonlat(lon, lat))
                ++removed;
            else
                filtered.knots.push_back({u, v});
        }
        out.push_back(std::move(filtered));
    }
    if (removed_count) *removed_count = removed;
    return out;
}

inline size_t total_knots(const std::vector<SpatialKnotLevel>& levels) {
    size_t n = 0;
    for (const auto& l : levels) n += l.knots.size();
    return n;
}

inline size_t total_centers(const std::vector<TemporalBasisLevel>& levels) {
    size_t n = 0;
    for (const auto& l : levels) n += l.centers.size();
    return n;
}

// ---------------------------------------------------------------------------
// Embeddings.

inline void spatial_embedding_into(double u, double v,
                                   const std::vector<SpatialKnotLevel>& levels, double* out) {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0)
        throw invalid_argument_error(strf("spatial_embedding: point (%s, %s) outside unit square",
                                          fmt_double(u).c_str(), fmt_double(v).c_str()));
    size_t k = 0;
    for (const auto& level : levels) {
        double inv_r = 1.0 / level.support_radius;
        for (const auto& [ku, kv] : level.knots) {
            double du = u - ku, dv = v - kv;
            double d = std::sqrt(du * du + dv * dv) * inv_r;
            out[k++] = d >= 1.0 ? 0.0 : wendland_kernel(d);
        }
    }
}

inline std::vector<double> spatial_embedding(double u, double v,
                                             const std::vector<SpatialKnotLevel>& levels) {
    std::vector<double> out(total_knots(levels));
    spatial_embedding_into(u, v, levels, out.data());
    return out;
}

inline void gaussian_temporal_embedding_into(double t,
                                             const std::vector<TemporalBasisLevel>& levels,
                                             double* out) {
    if (t < 0.0 || t > 1.0)
        throw invalid_argument_error(
            strf("gaussian_temporal_embedding: t=%s outside [0,1]", fmt_double(t).c_str()));
    size_t k = 0;
    for (const auto& level : levels) {
        double denom = 2.0 * level.bandwidth * level.bandwidth;
        for (double c : level.centers) {
            double d = t - c;
            out[k++] = std::exp(-d * d / denom);
        }
    }
}

inline std::vector<double> gaussian_temporal_embedding(
    double t, const std::vector<TemporalBasisLevel>& levels) {
    std::vector<double> out(total_centers(levels));
    gaussian_temporal_embedding_into(t, levels, out.data());
    return out;
}

// Dense feature rows for a batch of space-time points.
struct EmbeddingMatrix {
    size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major

    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
};

struct SpaceTimePoint {
    double u, v, t;
};

inline EmbeddingMatrix embed_space_time(const std::vector<SpaceTimePoint>& points,
                                        const std::vector<SpatialKnotLevel>& spatial_levels,
                                        const std::vector<TemporalBasisLevel>& temporal_levels) {
    size_t n_temporal = total_centers(temporal_levels);
    size_t n_spatial = total_knots(spatial_levels);
    EmbeddingMatrix m;
    m.rows = points.size();
    m.cols = n_temporal + n_spatial;
    m.data.resize(m.rows * m.cols);
    for (size_t r = 0; r < points.size(); ++r) {
        double* row = m.row(r);
        gaussian_temporal_embedding_into(points[r].t, temporal_levels, row);
        spatial_embedding_into(points[r].u, points[r].v, spatial_levels, row + n_temporal);
    }
    return m;
}

}  // namespace stdk
