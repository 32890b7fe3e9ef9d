#pragma once

// Evaluation metrics: MSPE for the median prediction, PICP (closed-interval
// coverage) and MPIW for the prediction intervals. Missing observations are
// deleted pairwise and the scored count n is reported alongside.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

struct EvalReport {
    size_t n = 0;
    double mspe = 0.0;
    double picp = 0.0;
    double mpiw = 0.0;
};

inline double mspe(const std::vector<double>& y, const std::vector<double>& median_pred) {
    if (y.size() != median_pred.size())
        throw shape_error(strf("mspe: %zu observations vs %zu predictions", y.size(),
                               median_pred.size()));
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (is_missing(y[i]) || is_missing(median_pred[i])) continue;
        double d = y[i] - median_pred[i];
        sum += d * d;
        ++n;
    }
    if (n == 0) throw empty_input_error("mspe: zero scored pairs");
    return sum / static_cast<double>(n);
}

inline double picp(const std::vector<double>& y, const std::vector<double>& lower,
                   const std::vector<double>& upper) {
    if (y.size() != lower.size() || y.size() != upper.size())
        throw shape_error("picp: length mismatch");
    size_t covered = 0, n = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (is_missing(y[i]) || is_missing(lower[i]) || is_missing(upper[i])) continue;
        if (lower[i] > upper[i])
            throw invalid_argument_error(strf("picp: crossing interval at index %zu", i));
        ++n;
        if (lower[i] <= y[i] && y[i] <= upper[i]) ++covered;  // closed interval
    }
    if (n == 0) throw empty_input_error("picp: zero scored pairs");
    return static_cast<double>(covered) / static_cast<double>(n);
}

inline double mpiw(const std::vector<double>& lower, const std::vector<double>& upper) {
    if (lower.size() != upper.size()) throw shape_error("mpiw: length mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < lower.size(); ++i) {
        if (is_missing(lower[i]) || is_missing(upper[i])) continue;
        if (lower[i] > upper[i])
            throw invalid_argument_error(strf("mpiw: crossing interval at index %zu", i));
        sum += upper[i] - lower[i];
        ++n;
    }
    if (n == 0) throw empty_input_error("mpiw: zero scored pairs");
    return sum / static_cast<double>(n);
}

// Joint report over aligned vectors; an index is scored only when the
// observation and all three quantiles are present, so the three metrics
// cover the same n pairs.
inline EvalReport evaluate(const std::vector<double>& y, const std::vector<double>& lower,
                           const std::vector<double>& median_pred,
                           const std::vector<double>& upper) {
    if (y.size() != lower.size() || y.size() != median_pred.size() || y.size() != upper.size())
        throw shape_error("evaluate: length mismatch");
    std::vector<double> ys, ls, ms, us;
    for (size_t i = 0; i < y.size(); ++i) {
        if (is_missing(y[i]) || is_missing(lower[i]) || is_missing(median_pred[i]) ||
            is_missing(upper[i]))
            continue;
        ys.push_back(y[i]);
        ls.push_back(lower[i]);
        ms.push_back(median_pred[i]);
        us.push_back(upper[i]);
    }
    if (ys.empty()) throw empty_input_error("evaluate: zero scored observations");
    EvalReport r;
    r.n = ys.size();
    r.mspe = mspe(ys, ms);
    r.picp = picp(ys, ls, us);
    r.mpiw = mpiw(ls, us);
    return r;
}

inline std::string report_csv(const EvalReport& r) {
    return strf("n,mspe,picp,mpiw\n%zu,%s,%s,%s\n", r.n, fmt_double(r.mspe).c_str(),
                fmt_double(r.picp).c_str(), fmt_double(r.mpiw).c_str());
}

inline std::string report_text(const EvalReport& r) {
    return strf(
        "scored observations : %zu\n"
        "MSPE  (median)      : %s\n"
        "PICP  (coverage)    : %s\n"
        "MPIW  (mean width)  : %s\n",
        r.n, fmt_double(r.mspe).c_str(), fmt_double(r.picp).c_str(), fmt_double(r.mpiw).c_str());
}

}  // namespace stdk
