#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "stdk/basis.hpp"

using namespace stdk;
using Catch::Approx;

TEST_CASE("wendland kernel values") {
    REQUIRE(wendland_kernel(0.0) == 1.0);
    REQUIRE(wendland_kernel(1.0) == 0.0);
    REQUIRE(wendland_kernel(2.0) == 0.0);
    // ((1-0.5)^6)(35*0.25 + 9 + 3)/3
    REQUIRE(wendland_kernel(0.5) == Approx(0.10807291666666667).epsilon(1e-14));
    REQUIRE_THROWS_AS(wendland_kernel(-0.1), invalid_argument_error);
}

TEST_CASE("wendland kernel is continuous and nonincreasing on [0,1]") {
    double prev = wendland_kernel(0.0);
    for (int i = 1; i <= 1000; ++i) {
        double d = i / 1000.0;
        double v = wendland_kernel(d);
        REQUIRE(v <= prev + 1e-15);
        REQUIRE(v >= 0.0);
        prev = v;
    }
}

TEST_CASE("spatial knot lattices match the configured sides") {
    auto levels = make_spatial_knots({9, 17, 35, 73});
    REQUIRE(levels.size() == 4);
    REQUIRE(levels[0].knots.size() == 81);
    REQUIRE(levels[1].knots.size() == 289);
    REQUIRE(levels[2].knots.size() == 1225);
    REQUIRE(levels[3].knots.size() == 5329);
    REQUIRE(total_knots(levels) == 6924);
    for (const auto& level : levels) {
        REQUIRE(level.support_radius ==
                Approx(2.5 / static_cast<double>(level.grid_side - 1)));
        for (const auto& [u, v] : level.knots) {
            REQUIRE(u >= 0.0);
            REQUIRE(u <= 1.0);
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("side-2 lattice is the unit-square corners") {
    auto levels = make_spatial_knots({2});
    REQUIRE(levels[0].knots.size() == 4);
    REQUIRE(levels[0].knots[0] == std::pair{0.0, 0.0});
    REQUIRE(levels[0].knots[1] == std::pair{1.0, 0.0});
    REQUIRE(levels[0].knots[2] == std::pair{0.0, 1.0});
    REQUIRE(levels[0].knots[3] == std::pair{1.0, 1.0});
    REQUIRE_THROWS_AS(make_spatial_knots({1}), invalid_argument_error);
}

TEST_CASE("temporal centers: level sizes, endpoints and spacing") {
    auto levels = make_temporal_centers({50, 350, 1000});
    REQUIRE(levels.size() == 3);
    REQUIRE(levels[0].centers.size() == 50);
    REQUIRE(levels[1].centers.size() == 350);
    REQUIRE(levels[2].centers.size() == 1000);
    REQUIRE(total_centers(levels) == 1400);
    REQUIRE(levels[0].centers.front() == 0.0);
    REQUIRE(levels[0].centers.back() == 1.0);
    for (size_t i = 1; i < 50; ++i)
        REQUIRE(levels[0].centers[i] - levels[0].centers[i - 1] == Approx(1.0 / 49.0));

    auto two = make_temporal_centers({2});
    REQUIRE(two[0].centers == std::vector<double>{0.0, 1.0});
    REQUIRE_THROWS_AS(make_temporal_centers({1}), invalid_argument_error);
}

namespace {

WaterMask mask_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_water_mask(in);
}

}  // namespace

TEST_CASE("water mask parsing and lookup") {
    // 2x2 over the unit square, water in the north-east cell.
    WaterMask m = mask_from_text("2 2 0 1 0 1\n01\n00\n");
    REQUIRE(m.rows == 2);
    REQUIRE(m.cols == 2);
    REQUIRE(!m.water_at_lonlat(0.25, 0.75));
    REQUIRE(m.water_at_lonlat(0.75, 0.75));
    REQUIRE(!m.water_at_lonlat(0.75, 0.25));
    REQUIRE_THROWS_AS(mask_from_text("2 2 0 1 0 1\n01\n0\n"), parse_error);
    REQUIRE_THROWS_AS(mask_from_text("2 2 0 1 0 1\n01\n0x\n"), parse_error);
}

TEST_CASE("all-land mask removes nothing; all-water removes everything") {
    auto levels = make_spatial_knots({9, 17, 35, 73});
    BBox unit{0, 1, 0, 1};

    WaterMask land = mask_from_text("1 1 0 1 0 1\n0\n");
    size_t removed = 0;
    auto kept = apply_water_mask(levels, land, unit, &removed);
    REQUIRE(removed == 0);
    REQUIRE(total_knots(kept) == 6924);

    WaterMask water = mask_from_text("1 1 0 1 0 1\n1\n");
    auto none = apply_water_mask(levels, water, unit, &removed);
    REQUIRE(removed == 6924);
    REQUIRE(total_knots(none) == 0);
}

TEST_CASE("masked knot count is total minus removed on synthetic masks") {
    auto levels = make_spatial_knots({9, 17, 35, 73});
    BBox unit{0, 1, 0, 1};
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        size_t rows = 2 + rng.below(7), cols = 2 + rng.below(7);
        std::string text = strf("%zu %zu 0 1 0 1\n", rows, cols);
        for (size_t r = 0; r < rows; ++r) {
            for (size_t c = 0; c < cols; ++c) text += (rng.uniform() < 0.3 ? '1' : '0');
            text += '\n';
        }
        WaterMask m = mask_from_text(text);
        size_t removed = 0;
        auto kept = apply_water_mask(levels, m, unit, &removed);
        REQUIRE(total_knots(kept) == 6924 - removed);
        // survivor order preserved within each level
        for (size_t li = 0; li < kept.size(); ++li) {
            size_t pos = 0;
            for (const auto& knot : levels[li].knots) {
                if (pos < kept[li].knots.size() && kept[li].knots[pos] == knot) ++pos;
            }
            REQUIRE(pos == kept[li].knots.size());
        }
    }
}

TEST_CASE("spatial embedding: knots hit exactly, remote levels zero") {
    auto levels = make_spatial_knots({9, 17});
    auto emb = spatial_embedding(0.0, 0.0, levels);  // on the corner knot of both levels
    REQUIRE(emb.size() == 81 + 289);
    REQUIRE(emb[0] == 1.0);
    REQUIRE(emb[81] == 1.0);

    // A point farther than the support radius from every level-0 knot:
    // impossible on a full lattice with factor 2.5, so shrink the support.
    auto tight = make_spatial_knots({9}, 0.2);
    auto far = spatial_embedding(0.5 + 0.0625, 0.5 + 0.0625, tight);  // mid-cell, radius 0.025
    for (double v : far) REQUIRE(v == 0.0);

    REQUIRE_THROWS_AS(spatial_embedding(1.5, 0.5, levels), invalid_argument_error);
}

TEST_CASE("spatial embedding matches the brute-force loop") {
    auto levels = make_spatial_knots({9});
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        double u = rng.uniform(), v = rng.uniform();
        auto emb = spatial_embedding(u, v, levels);
        REQUIRE(emb.size() == 81);
        for (size_t k = 0; k < 81; ++k) {
            auto [ku, kv] = levels[0].knots[k];
            double d = std::hypot(u - ku, v - kv) / levels[0].support_radius;
            double expected = d >= 1.0 ? 0.0 : wendland_kernel(d);
            REQUIRE(emb[k] == Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("temporal embedding: center hit and one-sigma value") {
    auto levels = make_temporal_centers({50, 350, 1000});
    auto emb = gaussian_temporal_embedding(0.0, levels);
    REQUIRE(emb.size() == 1400);
    REQUIRE(emb[0] == 1.0);

    auto small = make_temporal_centers({11});
    double sigma = small[0].bandwidth;
    double t = small[0].centers[5] + sigma;
    auto e = gaussian_temporal_embedding(t, small);
    REQUIRE(e[5] == Approx(std::exp(-0.5)).epsilon(1e-12));
    REQUIRE(std::exp(-0.5) == Approx(0.60653065971).epsilon(1e-9));

    REQUIRE_THROWS_AS(gaussian_temporal_embedding(-0.01, levels), invalid_argument_error);
    REQUIRE_THROWS_AS(gaussian_temporal_embedding(1.01, levels), invalid_argument_error);
}

TEST_CASE("embed_space_time: defaults give 1400 + 6924 columns") {
    auto spatial = make_spatial_knots({9, 17, 35, 73});
    auto temporal = make_temporal_centers({50, 350, 1000});
    auto m = embed_space_time({{0.5, 0.5, 0.5}}, spatial, temporal);
    REQUIRE(m.rows == 1);
    REQUIRE(m.cols == 8324);
}

TEST_CASE("embed_space_time: identical points give identical rows") {
    auto spatial = make_spatial_knots({5, 9});
    auto temporal = make_temporal_centers({4, 8});
    SpaceTimePoint p{0.3, 0.7, 0.2};
    auto m = embed_space_time({p, p, p}, spatial, temporal);
    REQUIRE(m.rows == 3);
    for (size_t c = 0; c < m.cols; ++c) {
        REQUIRE(m.at(1, c) == m.at(0, c));
        REQUIRE(m.at(2, c) == m.at(0, c));
    }
}

TEST_CASE("embedding entries live in [0,1] and respect compact support") {
    auto spatial = make_spatial_knots({5, 9});
    auto temporal = make_temporal_centers({4, 8});
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        SpaceTimePoint p{rng.uniform(), rng.uniform(), rng.uniform()};
        auto m = embed_space_time({p}, spatial, temporal);
        for (size_t c = 0; c < m.cols; ++c) {
            REQUIRE(m.at(0, c) >= 0.0);
            REQUIRE(m.at(0, c) <= 1.0);
        }
        // nonzero spatial entry => within support radius
        size_t off = total_centers(temporal);
        for (const auto& level : spatial) {
            for (const auto& [ku, kv] : level.knots) {
                double d = std::hypot(p.u - ku, p.v - kv);
                if (m.at(0, off) != 0.0) REQUIRE(d < level.support_radius);
                ++off;
            }
        }
        // every row has a nonzero spatial entry under the default overlap
        double row_max = 0.0;
        for (size_t c = total_centers(temporal); c < m.cols; ++c)
            row_max = std::max(row_max, m.at(0, c));
        REQUIRE(row_max > 0.0);
    }
}

TEST_CASE("permuting points permutes rows identically") {
    auto spatial = make_spatial_knots({5});
    auto temporal = make_temporal_centers({6});
    std::vector<SpaceTimePoint> pts = {{0.1, 0.2, 0.3}, {0.9, 0.5, 0.7}, {0.4, 0.8, 0.1}};
    auto fwd = embed_space_time(pts, spatial, temporal);
    std::vector<SpaceTimePoint> rev(pts.rbegin(), pts.rend());
    auto bwd = embed_space_time(rev, spatial, temporal);
    for (size_t r = 0; r < 3; ++r)
        for (size_t c = 0; c < fwd.cols; ++c) REQUIRE(fwd.at(r, c) == bwd.at(2 - r, c));
}

TEST_CASE("embedding is Lipschitz in the spatial point") {
    auto spatial = make_spatial_knots({9});
    double L = wendland_max_slope() / spatial[0].support_radius;
    Rng rng(31);
    double delta = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        double u = rng.uniform(0.0, 1.0 - delta);
        double v = rng.uniform();
        auto a = spatial_embedding(u, v, spatial);
        auto b = spatial_embedding(u + delta, v, spatial);
        for (size_t k = 0; k < a.size(); ++k)
            REQUIRE(std::abs(b[k] - a[k]) <= L * delta * 1.01 + 1e-12);
    }
}
