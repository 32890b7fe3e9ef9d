#pragma once

// Shared helpers for the test suites: independent reference implementations
// and small generators. These stay deliberately naive; they are the oracles
// the fast paths are checked against.

#include <vector>

#include "stdk/common.hpp"

namespace testutil {

// Quadruple-loop reference convolution (stride 1, same zero padding).
inline std::vector<double> conv_ref(const std::vector<double>& x, size_t cin, size_t H, size_t W,
                                    const std::vector<double>& w, size_t cout, size_t kh,
                                    size_t kw) {
    std::vector<double> out(cout * H * W, 0.0);
    long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
    for (size_t co = 0; co < cout; ++co)
        for (size_t y = 0; y < H; ++y)
            for (size_t xx = 0; xx < W; ++xx) {
                double acc = 0.0;
                for (size_t ci = 0; ci < cin; ++ci)
                    for (size_t ky = 0; ky < kh; ++ky)
                        for (size_t kx = 0; kx < kw; ++kx) {
                            long iy = static_cast<long>(y) + static_cast<long>(ky) - ph;
                            long ix = static_cast<long>(xx) + static_cast<long>(kx) - pw;
                            if (iy < 0 || iy >= static_cast<long>(H) || ix < 0 ||
                                ix >= static_cast<long>(W))
                                continue;
                            acc += x[(ci * H + iy) * W + ix] *
                                   w[((co * cin + ci) * kh + ky) * kw + kx];
                        }
                out[(co * H + y) * W + xx] = acc;
            }
    return out;
}

inline std::vector<double> random_vec(size_t n, stdk::Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Elementwise pinball reference: rho_tau(u) = u * (tau - 1[u < 0]).
inline double pinball_ref(double tau, double u) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

}  // namespace testutil
