#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/matrix.hpp"
#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace plantcast::features {

// Per-window block layout, in order.
enum WindowFeature : std::size_t {
    kMean = 0,
    kPeakFraction,
    kPctChange,
    kSlope,
    kSimplePrediction,
    kSlopeRatio,
    kPerWindow
};

// Global block (computed on the reference window), after all window blocks.
enum GlobalFeature : std::size_t { kLastValue = 0, kMaxValue, kLastOverMax, kGlobalCount };

inline constexpr double kEpsilon = 1e-9;
inline constexpr double kPctChangeClamp = 1e6;

// History windows, strictly increasing; the last one is the reference window.
struct WindowSpec {
    std::vector<Minutes> windows{Minutes{30}, Minutes{45}, Minutes{75}, Minutes{120},
                                 Minutes{180}, Minutes{240}, Minutes{300}};

    std::size_t feature_count() const { return kPerWindow * windows.size() + kGlobalCount; }
    Minutes reference() const { return windows.back(); }
    std::size_t global_offset() const { return kPerWindow * windows.size(); }

    // Throws ConfigError unless windows are increasing positive multiples of `step`.
    void validate(Minutes step) const;
};

// Column names, e.g. `w30_mean`, ..., `last_value`.
std::vector<std::string> feature_names(const WindowSpec& spec);

struct FeatureVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    // The anchor cell value; always the first global feature.
    double last_value() const { return values[values.size() - kGlobalCount + kLastValue]; }
};

struct Sample {
    std::string sensor_id;
    Timestamp anchor;
    Minutes horizon{30};
    FeatureVector features;
    double target = 0.0;
};

// A grid cell inside a history window; `x` is signed minutes relative to the anchor.
struct WindowPoint {
    double x = 0.0;
    double value = 0.0;
};

// Cells stamped in (anchor - window, anchor]. nullopt marks a gap: a missing
// cell, or a window reaching before the grid. AlignmentError if the anchor is off-grid.
std::optional<std::vector<WindowPoint>> window_points(const timeseries::GridSeries& series, Timestamp anchor,
                                                      Minutes window);

struct LineFit {
    double intercept = 0.0;  // value at x = 0, i.e. at the anchor
    double slope = 0.0;      // per minute
};

// Closed-form least squares. DegenerateWindowError with fewer than two distinct x.
LineFit fit_line(std::span<const WindowPoint> points);

// Strict interior local maxima divided by the number of values.
double fraction_of_peaks(std::span<const double> values);

// nullopt when any window has a gap.
std::optional<FeatureVector> compute_features(const timeseries::GridSeries& series, Timestamp anchor, Minutes horizon,
                                              const WindowSpec& spec = {});

// One sample per anchor with complete windows and a present target, ordered by anchor.
std::vector<Sample> build_samples(const timeseries::PreparedDataset& ds, std::string_view sensor_id, Minutes horizon,
                                  const WindowSpec& spec = {});

// Train samples have their target at or before the boundary; test samples are
// anchored at or after it. Samples straddling the boundary are dropped.
struct SampleSplit {
    std::vector<Sample> train;
    std::vector<Sample> test;
};
SampleSplit split_samples(std::span<const Sample> samples, Timestamp boundary);

Matrix feature_matrix(std::span<const Sample> samples);
std::vector<double> targets(std::span<const Sample> samples);

// `sensor_id,anchor,horizon,f01..fNN,target`
void write_samples_csv(std::ostream& out, std::span<const Sample> samples, std::size_t feature_count,
                       const std::optional<Stamp>& stamp = std::nullopt);
std::vector<Sample> read_samples_csv(std::istream& in);

} // namespace plantcast::features
