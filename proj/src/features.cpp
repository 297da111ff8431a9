#include "plantcast/features.hpp"

#include "plantcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace plantcast::features {

using timeseries::GridSeries;
using timeseries::PreparedDataset;

void WindowSpec::validate(Minutes step) const {
    if (windows.empty()) throw ConfigError("window spec is empty");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto w = windows[i];
        if (w.count() <= 0 || w.count() % step.count() != 0) {
            throw ConfigError("window of " + std::to_string(w.count()) + " min is not a positive multiple of the " +
                              std::to_string(step.count()) + " min grid step");
        }
        if (i > 0 && w <= windows[i - 1]) throw ConfigError("windows must be strictly increasing");
    }
}

std::vector<std::string> feature_names(const WindowSpec& spec) {
    static constexpr const char* per_window[] = {"mean", "peak_fraction", "pct_change",
                                                 "slope", "simple_prediction", "slope_ratio"};
    std::vector<std::string> names;
    names.reserve(spec.feature_count());
    for (const auto w : spec.windows) {
        for (const char* n : per_window) names.push_back("w" + std::to_string(w.count()) + "_" + n);
    }
    names.emplace_back("last_value");
    names.emplace_back("max_value");
    names.emplace_back("last_over_max");
    return names;
}

std::optional<std::vector<WindowPoint>> window_points(const GridSeries& series, Timestamp anchor, Minutes window) {
    const auto k = series.index_of(anchor);
    if (!k) throw AlignmentError("anchor " + format_timestamp(anchor) + " is not a cell of " + series.sensor_id);
    const auto step = series.step.count();
    if (window.count() <= 0 || window.count() % step != 0) {
        throw AlignmentError("window is not a multiple of the grid step");
    }
    const auto n = static_cast<std::size_t>(window.count() / step);
    if (*k + 1 < n) return std::nullopt;
    std::vector<WindowPoint> pts;
    pts.reserve(n);
    for (std::size_t j = *k + 1 - n; j <= *k; ++j) {
        const auto& cell = series.cells[j];
        if (!cell) return std::nullopt;
        pts.push_back({-static_cast<double>((*k - j) * static_cast<std::size_t>(step)), *cell});
    }
    return pts;
}

namespace {

// Double-double value hi + lo. Window sums are carried at roughly twice double
// precision so features that cancel to zero (a flat slope, a prediction that
// crosses zero) come out as zero instead of rounding noise.
struct Wide {
    double hi = 0.0;
    double lo = 0.0;
};

Wide two_sum(double a, double b) {
    const double s = a + b;
    const double v = s - a;
    return {s, (a - (s - v)) + (b - v)};
}

Wide normalize(double hi, double lo) {
    const double s = hi + lo;
    return {s, lo - (s - hi)};
}

Wide operator+(Wide a, Wide b) {
    const auto s = two_sum(a.hi, b.hi);
    return normalize(s.hi, s.lo + a.lo + b.lo);
}

Wide operator*(Wide a, Wide b) {
    const double p = a.hi * b.hi;
    const double e = std::fma(a.hi, b.hi, -p);
    return normalize(p, e + a.hi * b.lo + a.lo * b.hi);
}

Wide operator-(Wide a) { return {-a.hi, -a.lo}; }

Wide wide(double v) { return {v, 0.0}; }

double quotient(Wide a, Wide b) {
    const double q = a.hi / b.hi;
    const auto r = a + -(wide(q) * b);
    return q + r.hi / b.hi;
}

struct Moments {
    double n = 0.0;
    Wide mean_x;
    Wide sy;   // sum of y
    Wide sxx;  // centered
    Wide sxy;  // centered

    explicit Moments(std::span<const WindowPoint> points) {
        if (points.size() < 2) throw DegenerateWindowError("line fit needs at least two points");
        n = static_cast<double>(points.size());
        Wide sx;
        for (const auto& p : points) {
            sx = sx + wide(p.x);
            sy = sy + wide(p.value);
        }
        mean_x = wide(quotient(sx, wide(n)));
        Wide sdx;
        for (const auto& p : points) {
            const Wide dx = wide(p.x) + -mean_x;
            sdx = sdx + dx;
            sxx = sxx + dx * dx;
            sxy = sxy + dx * wide(p.value);
        }
        // Zero on a regular grid; keeps the centered cross sum honest otherwise.
        sxy = sxy + -(sdx * wide(quotient(sy, wide(n))));
        if (sxx.hi == 0.0) throw DegenerateWindowError("line fit needs at least two distinct x");
    }

    double mean() const { return quotient(sy, wide(n)); }
    double slope() const { return quotient(sxy, sxx); }

    // Value of the fitted line at x, as one quotient:
    // (sy * sxx + sxy * (x - mean_x) * n) / (n * sxx).
    double at(double x) const {
        const Wide offset = (wide(x) + -mean_x) * wide(n);
        return quotient(sy * sxx + sxy * offset, sxx * wide(n));
    }

    // slope / other.slope, also as one quotient.
    double slope_ratio(const Moments& other) const { return quotient(sxy * other.sxx, sxx * other.sxy); }
};

} // namespace

LineFit fit_line(std::span<const WindowPoint> points) {
    const Moments m(points);
    return {m.at(0.0), m.slope()};
}

double fraction_of_peaks(std::span<const double> values) {
    if (values.empty()) return 0.0;
    std::size_t peaks = 0;
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        if (values[i] > values[i - 1] && values[i] > values[i + 1]) ++peaks;
    }
    return static_cast<double>(peaks) / static_cast<double>(values.size());
}

std::optional<FeatureVector> compute_features(const GridSeries& series, Timestamp anchor, Minutes horizon,
                                              const WindowSpec& spec) {
    // Windows are nested suffixes of the reference window.
    const auto reference = window_points(series, anchor, spec.reference());
    if (!reference) return std::nullopt;
    const auto step = series.step.count();
    const double h = static_cast<double>(horizon.count());

    FeatureVector fv;
    fv.values.assign(spec.feature_count(), 0.0);
    std::vector<Moments> fits;
    fits.reserve(spec.windows.size());
    std::vector<double> values;
    for (std::size_t w = 0; w < spec.windows.size(); ++w) {
        const auto n = static_cast<std::size_t>(spec.windows[w].count() / step);
        const std::span<const WindowPoint> pts = std::span(*reference).last(n);
        values.clear();
        for (const auto& p : pts) values.push_back(p.value);
        const double first = values.front();
        const double last = values.back();
        const auto& fit = fits.emplace_back(pts);
        double* block = fv.values.data() + w * kPerWindow;
        block[kMean] = fit.mean();
        block[kPeakFraction] = fraction_of_peaks(values);
        block[kPctChange] =
            std::clamp((last - first) / std::max(std::abs(first), kEpsilon), -kPctChangeClamp, kPctChangeClamp);
        block[kSlope] = fit.slope();
        block[kSimplePrediction] = fit.at(h);
    }
    const auto& reference_fit = fits.back();
    const bool flat = std::abs(reference_fit.slope()) < kEpsilon;
    for (std::size_t w = 0; w < spec.windows.size(); ++w) {
        fv.values[w * kPerWindow + kSlopeRatio] = flat ? 0.0 : fits[w].slope_ratio(reference_fit);
    }

    double max_value = reference->front().value;
    for (const auto& p : *reference) max_value = std::max(max_value, p.value);
    const double last_value = reference->back().value;
    double* globals = fv.values.data() + spec.global_offset();
    globals[kLastValue] = last_value;
    globals[kMaxValue] = max_value;
    globals[kLastOverMax] = max_value != 0.0 ? last_value / max_value : 0.0;
    return fv;
}

std::vector<Sample> build_samples(const PreparedDataset& ds, std::string_view sensor_id, Minutes horizon,
                                  const WindowSpec& spec) {
    const auto& series = ds.find(sensor_id);
    const auto step = series.step.count();
    if (horizon.count() <= 0 || horizon.count() % step != 0) {
        throw AlignmentError("horizon is not a positive multiple of the grid step");
    }
    const auto ahead = static_cast<std::size_t>(horizon.count() / step);
    std::vector<Sample> samples;
    for (std::size_t k = 0; k + ahead < series.cells.size(); ++k) {
        const auto& target = series.cells[k + ahead];
        if (!target || !series.cells[k]) continue;
        const auto anchor = series.cell_time(k);
        auto fv = compute_features(series, anchor, horizon, spec);
        if (!fv) continue;
        samples.push_back({series.sensor_id, anchor, horizon, std::move(*fv), *target});
    }
    return samples;
}

SampleSplit split_samples(std::span<const Sample> samples, Timestamp boundary) {
    SampleSplit split;
    for (const auto& s : samples) {
        if (s.anchor + s.horizon <= boundary) {
            split.train.push_back(s);
        } else if (s.anchor >= boundary) {
            split.test.push_back(s);
        }
    }
    return split;
}

Matrix feature_matrix(std::span<const Sample> samples) {
    Matrix m;
    for (const auto& s : samples) m.push_row(s.features.values);
    return m;
}

std::vector<double> targets(std::span<const Sample> samples) {
    std::vector<double> y;
    y.reserve(samples.size());
    for (const auto& s : samples) y.push_back(s.target);
    return y;
}

void write_samples_csv(std::ostream& out, std::span<const Sample> samples, std::size_t feature_count,
                       const std::optional<Stamp>& stamp) {
    if (stamp) out << stamp_line(*stamp) << '\n';
    out << "sensor_id,anchor,horizon";
    for (std::size_t i = 1; i <= feature_count; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, ",f%02zu", i);
        out << buf;
    }
    out << ",target\n";
    for (const auto& s : samples) {
        if (s.features.size() != feature_count) throw ShapeError("sample feature count mismatch");
        out << s.sensor_id << ',' << format_timestamp(s.anchor) << ',' << s.horizon.count();
        for (const double v : s.features.values) out << ',' << csv::format_double(v);
        out << ',' << csv::format_double(s.target) << '\n';
    }
    if (!out) throw IoError("failed to write samples");
}

std::vector<Sample> read_samples_csv(std::istream& in) {
    std::string line;
    if (!csv::next_data_line(in, line)) throw FormatError("samples: missing header");
    const auto header = csv::split(line);
    if (header.size() < 5 || header[0] != "sensor_id" || header[1] != "anchor" || header[2] != "horizon" ||
        header.back() != "target") {
        throw FormatError("samples: unexpected header");
    }
    const std::size_t n_features = header.size() - 4;
    std::vector<Sample> samples;
    while (csv::next_data_line(in, line)) {
        const auto f = csv::split(line);
        if (f.size() != header.size()) throw FormatError("samples: malformed row");
        Sample s;
        s.sensor_id = std::string(f[0]);
        s.anchor = parse_timestamp(f[1]);
        const auto h = csv::parse_int(f[2]);
        if (!h || *h <= 0) throw FormatError("samples: bad horizon");
        s.horizon = Minutes{*h};
        s.features.values.resize(n_features);
        for (std::size_t i = 0; i < n_features; ++i) {
            const auto v = csv::parse_double(f[3 + i]);
            if (!v) throw FormatError("samples: bad feature value");
            s.features.values[i] = *v;
        }
        const auto t = csv::parse_double(f.back());
        if (!t) throw FormatError("samples: bad target");
        s.target = *t;
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace plantcast::features
