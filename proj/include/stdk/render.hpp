#pragma once

// Heatmap rendering of grid-stack frames: one pixel per cell, linear color
// ramp between the frame's data min and max, missing cells grey. Quantile
// stacks (C = 3) render as a side-by-side (lower, median, upper) triptych
// with a shared ramp.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stdk/common.hpp"
#include "stdk/gridstack.hpp"
#include "stdk/png.hpp"

namespace stdk {

struct Rgb {
    uint8_t r, g, b;
};

inline constexpr Rgb kMissingGrey{128, 128, 128};

// t in [0,1] -> color. Palettes: "viridis" (default) and "gray".
inline Rgb palette_color(const std::string& palette, double t) {
    t = std::clamp(t, 0.0, 1.0);
    if (palette == "gray" || palette == "grey") {
        auto v = static_cast<uint8_t>(std::lround(t * 255.0));
        return {v, v, v};
    }
    if (palette == "viridis") {
        static constexpr Rgb anchors[] = {
            {68, 1, 84},   {72, 40, 120},  {62, 74, 137},  {49, 104, 142}, {38, 130, 142},
            {31, 158, 137}, {53, 183, 121}, {109, 205, 89}, {180, 222, 44}, {253, 231, 37}};
        constexpr size_t n = std::size(anchors);
        double pos = t * static_cast<double>(n - 1);
        size_t i = std::min(static_cast<size_t>(pos), n - 2);
        double f = pos - static_cast<double>(i);
        auto lerp = [f](uint8_t a, uint8_t b) {
            return static_cast<uint8_t>(std::lround(a + f * (b - a)));
        };
        return {lerp(anchors[i].r, anchors[i + 1].r), lerp(anchors[i].g, anchors[i + 1].g),
                lerp(anchors[i].b, anchors[i + 1].b)};
    }
    throw invalid_argument_error("unknown palette: " + palette);
}

namespace render_detail {

struct Ramp {
    double lo = 0.0, hi = 0.0;
    bool degenerate = true;  // constant or all-missing frame

    double position(double v) const {
        if (degenerate) return 0.5;
        return (v - lo) / (hi - lo);
    }
};

inline Ramp scan_range(const double* const* planes, size_t n_planes, size_t count) {
    Ramp r;
    bool any = false;
    for (size_t p = 0; p < n_planes; ++p)
        for (size_t i = 0; i < count; ++i) {
            double v = planes[p][i];
            if (is_missing(v)) continue;
            if (!any) {
                r.lo = r.hi = v;
                any = true;
            } else {
                r.lo = std::min(r.lo, v);
                r.hi = std::max(r.hi, v);
            }
        }
    r.degenerate = !any || r.lo == r.hi;
    return r;
}

inline void blit(RgbImage& img, size_t x0, const double* plane, size_t h, size_t w,
                 const Ramp& ramp, const std::string& palette) {
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            double v = plane[y * w + x];
            Rgb c = is_missing(v) ? kMissingGrey : palette_color(palette, ramp.position(v));
            img.set(x0 + x, y, c.r, c.g, c.b);
        }
}

}  // namespace render_detail

// Renders one time step of a stack. C = 1 -> W x H image; C = 3 -> 3W x H
// triptych ordered (lower, median, upper) with a shared color ramp.
inline RgbImage render_frame(const GridStack& stack, size_t time_index,
                             const std::string& palette = "viridis") {
    if (time_index >= stack.t)
        throw shape_error(strf("render: time index %zu out of range [0, %zu)", time_index,
                               stack.t));
    if (stack.c != 1 && stack.c != 3)
        throw shape_error(strf("render: expected 1 or 3 channels, got %zu", stack.c));

    size_t count = stack.plane();
    std::vector<const double*> planes;
    for (size_t ci = 0; ci < stack.c; ++ci) planes.push_back(stack.frame(time_index, ci));
    auto ramp = render_detail::scan_range(planes.data(), planes.size(), count);

    RgbImage img = RgbImage::make(stack.w * stack.c, stack.h);
    for (size_t p = 0; p < planes.size(); ++p)
        render_detail::blit(img, p * stack.w, planes[p], stack.h, stack.w, ramp, palette);
    return img;
}

inline void render_frame_png(const GridStack& stack, size_t time_index, const std::string& path,
                             const std::string& palette = "viridis") {
    RgbImage img = render_frame(stack, time_index, palette);
    write_png(path, img,
              {{"stdk:seed", std::to_string(stack.seed)},
               {"stdk:config", hex64(stack.config_hash)},
               {"stdk:time_index", std::to_string(time_index)}});
}

}  // namespace stdk
