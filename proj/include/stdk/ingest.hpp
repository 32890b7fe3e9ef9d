#pragma once

// Station-data ingestion: CSV parsing, the 10-day moving average, global
// standardization, grid construction and spatial train/test splits.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

// ---------------------------------------------------------------------------
// Calendar dates (proleptic Gregorian), needed to keep station series
// contiguous at daily resolution.

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend bool operator==(const Date&, const Date&) = default;
};

// Days since 1970-01-01. Howard Hinnant's civil-calendar algorithm.
inline int64_t days_from_civil(const Date& d) {
    int y = d.year - (d.month <= 2);
    int era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<int64_t>(era) * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline Date civil_from_days(int64_t z) {
    z += 719468;
    int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    unsigned d = doy - (153 * mp + 2) / 5 + 1;
    unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

inline bool is_valid_date(const Date& d) {
    if (d.month < 1 || d.month > 12 || d.day < 1) return false;
    static const int len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int n = len[d.month - 1];
    bool leap = (d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0;
    if (d.month == 2 && leap) n = 29;
    return d.day <= n;
}

inline Date parse_iso_date(std::string_view s, size_t line_no) {
    auto fail = [&] {
        throw parse_error(strf("line %zu: bad ISO date '%.*s'", line_no,
                               static_cast<int>(s.size()), s.data()));
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') fail();
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') fail();
    Date d;
    d.year = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    d.month = (s[5] - '0') * 10 + (s[6] - '0');
    d.day = (s[8] - '0') * 10 + (s[9] - '0');
    if (!is_valid_date(d)) fail();
    return d;
}

inline std::string to_iso_string(const Date& d) {
    return strf("%04d-%02d-%02d", d.year, d.month, d.day);
}

// ---------------------------------------------------------------------------
// Domain types.

struct StationSeries {
    std::string station_id;
    double lon = 0.0;  // degrees, [-180, 180]
    double lat = 0.0;  // degrees, [-90, 90]
    Date start_date;
    std::vector<double> values;  // daily, contiguous; NaN = missing
};

struct StandardizationParams {
    double mean = 0.0;  // mm/day
    double std = 1.0;   // mm/day, sample (n-1) convention, > 0
};

struct BBox {
    double lon_min = 0.0, lon_max = 1.0;
    double lat_min = 0.0, lat_max = 1.0;

    bool valid() const { return lon_min < lon_max && lat_min < lat_max; }
};

struct SpaceTimeGrid {
    BBox bbox;
    size_t nx = 1, ny = 1;
    std::vector<size_t> times;  // strictly increasing step indices

    // Cell centers, fractional positions (i+0.5)/nx scaled into the bbox.
    double center_lon(size_t ix) const {
        return bbox.lon_min + (ix + 0.5) / static_cast<double>(nx) * (bbox.lon_max - bbox.lon_min);
    }
    double center_lat(size_t iy) const {
        return bbox.lat_min + (iy + 0.5) / static_cast<double>(ny) * (bbox.lat_max - bbox.lat_min);
    }
    // Unit-square coordinates of a cell center.
    double center_u(size_t ix) const { return (ix + 0.5) / static_cast<double>(nx); }
    double center_v(size_t iy) const { return (iy + 0.5) / static_cast<double>(ny); }
};

// ---------------------------------------------------------------------------
// CSV parsing. Format: header `station_id,lon,lat,date,precip_mm`, ISO dates,
// empty precip field = missing. No quoting; fields may not contain commas.

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (;;) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_double_field(std::string_view f, const char* what, size_t line_no) {
    std::string tmp(f);
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.empty() || !std::isfinite(v))
        throw parse_error(strf("line %zu: bad %s '%s'", line_no, what, tmp.c_str()));
    return v;
}

}  // namespace detail

inline constexpr const char* kStationCsvHeader = "station_id,lon,lat,date,precip_mm";

inline std::vector<StationSeries> parse_station_csv(std::istream& in) {
    struct Obs {
        double value;
        size_t line_no;
    };
    struct Raw {
        double lon, lat;
        size_t first_line;
        std::map<int64_t, Obs> by_day;
    };
    std::map<std::string, Raw> stations;

    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) throw empty_input_error("station CSV is empty");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStationCsvHeader)
        throw parse_error(strf("line 1: expected header '%s', got '%s'", kStationCsvHeader,
                               line.c_str()));

    size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 5)
            throw parse_error(strf("line %zu: expected 5 fields, got %zu", line_no, fields.size()));
        std::string id(fields[0]);
        if (id.empty()) throw parse_error(strf("line %zu: empty station_id", line_no));
        double lon = detail::parse_double_field(fields[1], "lon", line_no);
        double lat = detail::parse_double_field(fields[2], "lat", line_no);
        if (lon < -180.0 || lon > 180.0 || lat < -90.0 || lat > 90.0)
            throw parse_error(strf("line %zu: lon/lat out of range (%s, %s)", line_no,
                                   fmt_double(lon).c_str(), fmt_double(lat).c_str()));
        Date date = parse_iso_date(fields[3], line_no);
        double value = fields[4].empty()
                           ? kMissing
                           : detail::parse_double_field(fields[4], "precip_mm", line_no);

        auto [it, inserted] = stations.try_emplace(id, Raw{lon, lat, line_no, {}});
        Raw& raw = it->second;
        if (!inserted && (raw.lon != lon || raw.lat != lat))
            throw conflict_error(strf(
                "line %zu: station '%s' location differs from line %zu", line_no, id.c_str(),
                raw.first_line));
        int64_t day = days_from_civil(date);
        auto [oit, fresh] = raw.by_day.try_emplace(day, Obs{value, line_no});
        if (!fresh)
            throw conflict_error(strf("line %zu: duplicate (station '%s', date %s), first at line %zu",
                                      line_no, id.c_str(), to_iso_string(date).c_str(),
                                      oit->second.line_no));
        ++data_rows;
    }
    if (data_rows == 0) throw empty_input_error("station CSV has a header but no data rows");

    std::vector<StationSeries> out;
    out.reserve(stations.size());
    for (auto& [id, raw] : stations) {
        StationSeries s;
        s.station_id = id;
        s.lon = raw.lon;
        s.lat = raw.lat;
        int64_t first = raw.by_day.begin()->first;
        int64_t last = raw.by_day.rbegin()->first;
        s.start_date = civil_from_days(first);
        s.values.assign(static_cast<size_t>(last - first + 1), kMissing);
        for (const auto& [day, obs] : raw.by_day) s.values[static_cast<size_t>(day - first)] = obs.value;
        out.push_back(std::move(s));
    }
    return out;  // sorted by station_id via the map
}

inline std::vector<StationSeries> parse_station_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open station CSV: " + path);
    return parse_station_csv(in);
}

inline void write_station_csv(std::ostream& os, const std::vector<StationSeries>& stations) {
    os << kStationCsvHeader << '\n';
    for (const auto& s : stations) {
        int64_t day0 = days_from_civil(s.start_date);
        for (size_t t = 0; t < s.values.size(); ++t) {
            os << s.station_id << ',' << fmt_double(s.lon) << ',' << fmt_double(s.lat) << ','
               << to_iso_string(civil_from_days(day0 + static_cast<int64_t>(t))) << ',';
            if (!is_missing(s.values[t])) os << fmt_double(s.values[t]);
            os << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Moving average. Trailing window ending at t, averaged over the non-missing
// entries. Leading edges use the shrinking window of available entries; an
// output is missing when fewer than ceil(w_eff/2) entries in its window are
// observed, w_eff being the effective (possibly shrunken) window size.

inline std::vector<double> moving_average(const std::vector<double>& series, size_t window = 10) {
    if (window == 0) throw invalid_argument_error("moving_average: window must be >= 1");
    std::vector<double> out(series.size(), kMissing);
    for (size_t t = 0; t < series.size(); ++t) {
        size_t w_eff = std::min(window, t + 1);
        size_t begin = t + 1 - w_eff;
        double sum = 0.0;
        size_t count = 0;
        for (size_t i = begin; i <= t; ++i) {
            if (!is_missing(series[i])) {
                sum += series[i];
                ++count;
            }
        }
        size_t needed = (w_eff + 1) / 2;  // ceil(w_eff / 2)
        if (count >= needed && count > 0) out[t] = sum / static_cast<double>(count);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standardization with the sample (n-1) standard deviation.

inline StandardizationParams compute_standardization(const std::vector<double>& values) {
    double sum = 0.0;
    size_t n = 0;
    for (double v : values)
        if (!is_missing(v)) {
            sum += v;
            ++n;
        }
    if (n < 2) throw degenerate_data_error("standardize: need at least 2 non-missing values");
    double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values)
        if (!is_missing(v)) ss += (v - mean) * (v - mean);
    double var = ss / static_cast<double>(n - 1);
    if (var <= 0.0) throw degenerate_data_error("standardize: zero variance");
    return StandardizationParams{mean, std::sqrt(var)};
}

inline std::vector<double> apply_standardization(const std::vector<double>& values,
                                                 const StandardizationParams& p) {
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        out[i] = is_missing(values[i]) ? kMissing : (values[i] - p.mean) / p.std;
    return out;
}

inline std::vector<double> destandardize(const std::vector<double>& values,
                                         const StandardizationParams& p) {
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        out[i] = is_missing(values[i]) ? kMissing : values[i] * p.std + p.mean;
    return out;
}

inline std::pair<std::vector<double>, StandardizationParams> standardize(
    const std::vector<double>& values) {
    StandardizationParams p = compute_standardization(values);
    return {apply_standardization(values, p), p};
}

// Global transform over every observation of every station, per the single
// mean/std convention.
inline StandardizationParams standardize_stations(std::vector<StationSeries>& stations) {
    std::vector<double> all;
    for (const auto& s : stations)
        for (double v : s.values)
            if (!is_missing(v)) all.push_back(v);
    StandardizationParams p = compute_standardization(all);
    for (auto& s : stations) s.values = apply_standardization(s.values, p);
    return p;
}

// ---------------------------------------------------------------------------
// Grid construction.

inline SpaceTimeGrid make_grid(const BBox& bbox, size_t nx, size_t ny, std::vector<size_t> times) {
    if (!bbox.valid()) throw invalid_argument_error("make_grid: inverted or degenerate bbox");
    if (nx < 1 || ny < 1) throw invalid_argument_error("make_grid: nx and ny must be >= 1");
    for (size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            throw invalid_argument_error("make_grid: times must be strictly increasing");
    return SpaceTimeGrid{bbox, nx, ny, std::move(times)};
}

// ---------------------------------------------------------------------------
// Spatial holdout split: whole stations go to test. Deterministic in the
// seed; test count = clamp(floor(n * fraction), 1, n-1).

inline std::pair<std::vector<StationSeries>, std::vector<StationSeries>> split_train_test(
    const std::vector<StationSeries>& stations, double holdout_fraction, uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw invalid_argument_error("split_train_test: holdout_fraction must be in (0,1)");
    size_t n = stations.size();
    if (n < 2) throw insufficient_data_error("split_train_test: need at least 2 stations");
    size_t n_test = static_cast<size_t>(std::floor(static_cast<double>(n) * holdout_fraction));
    n_test = std::clamp<size_t>(n_test, 1, n - 1);

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);

    std::vector<bool> is_test(n, false);
    for (size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;

    std::pair<std::vector<StationSeries>, std::vector<StationSeries>> out;
    for (size_t i = 0; i < n; ++i) (is_test[i] ? out.second : out.first).push_back(stations[i]);
    return out;
}

}  // namespace stdk
