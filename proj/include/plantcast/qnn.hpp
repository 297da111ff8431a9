#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/matrix.hpp"
#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace plantcast::qnn {

inline constexpr std::array<double, 3> kQuantiles{0.1, 0.5, 0.9};
inline constexpr std::size_t kHeads = kQuantiles.size();

// Per-dimension affine map onto [0, 1] from training minima and maxima.
// Constant dimensions map to 0. Values outside the training range are not clamped.
class MinMaxScaler {
public:
    void fit(const Matrix& train);
    bool fitted() const { return fitted_; }
    std::size_t dims() const { return min_.size(); }

    double transform(std::size_t dim, double v) const;
    double inverse(std::size_t dim, double v) const;
    std::vector<double> transform(std::span<const double> x) const;
    std::vector<double> inverse(std::span<const double> x) const;
    Matrix transform(const Matrix& x) const;

    const std::vector<double>& mins() const { return min_; }
    const std::vector<double>& maxs() const { return max_; }
    static MinMaxScaler from_stats(std::vector<double> mins, std::vector<double> maxs);

private:
    void require_fitted(std::size_t dims) const;

    std::vector<double> min_;
    std::vector<double> max_;
    bool fitted_ = false;
};

// floor(n_features / 2) + n_targets
std::size_t hidden_dim(std::size_t n_features, std::size_t n_targets);

// hidden * (n_features + 1) + 3 * n_targets * (hidden + 1)
std::size_t parameter_count(std::size_t n_features, std::size_t n_targets);

// Mean of max(q (t - p), (1 - q)(p - t)). ShapeError on length mismatch.
double pinball_loss(std::span<const double> y_true, std::span<const double> y_pred, double q);

// Shared rectified hidden layer feeding one linear head per quantile.
struct QuantileNet {
    std::size_t n_features = 0;
    std::size_t n_targets = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;                       // hidden x n_features, row-major
    std::vector<double> b1;                       // hidden
    std::array<std::vector<double>, kHeads> w2;   // n_targets x hidden each
    std::array<std::vector<double>, kHeads> b2;   // n_targets each

    static QuantileNet zeros(std::size_t n_features, std::size_t n_targets);
    // Uniform in +-1/sqrt(fan_in) for every weight and bias.
    static QuantileNet initialized(std::size_t n_features, std::size_t n_targets, std::uint64_t seed);

    std::size_t parameter_count() const;
    // Flattened order: w1, b1, then w2[q], b2[q] for each head.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
};

using HeadOutputs = std::array<std::vector<double>, kHeads>;

// ShapeError on a size mismatch or non-finite input.
HeadOutputs forward(const QuantileNet& net, std::span<const double> x);

// Sum over heads of the pinball loss averaged over all (row, target) entries.
double total_loss(const QuantileNet& net, const Matrix& x, const Matrix& y);

// Same loss restricted to `rows`, with its gradient in parameters() order.
double loss_and_gradient(const QuantileNet& net, const Matrix& x, const Matrix& y,
                         std::span<const std::size_t> rows, std::vector<double>& gradient);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double step_size = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    QuantileNet net;
    // Entry 0 is the loss before any update; entry e follows epoch e.
    std::vector<double> loss_trace;
};

// Adam on shuffled mini-batches. Inputs and targets are already scaled.
TrainResult train(const Matrix& x, const Matrix& y, const TrainConfig& config);

// Lagged readings of every chamber sensor over one history window.
struct LagMatrixSpec {
    Minutes window{120};
    Minutes step = timeseries::kDefaultStep;
    std::vector<std::string> sensors;

    std::size_t lags() const { return static_cast<std::size_t>(window.count() / step.count()); }
    std::size_t n_features() const { return sensors.size() * lags(); }
};

// Rows sensor-major, oldest lag first. Rows with any missing lag or target are skipped.
struct LagRows {
    Matrix inputs;
    Matrix targets;
    std::vector<Timestamp> anchors;
};

LagRows build_lag_rows(const timeseries::PreparedDataset& ds, const LagMatrixSpec& spec, Minutes horizon);

// Raw lag window at `anchor`, with nullopt for missing cells.
std::vector<std::optional<double>> lag_window(const timeseries::PreparedDataset& ds, const LagMatrixSpec& spec,
                                              Timestamp anchor);

struct QuantileForecaster {
    LagMatrixSpec spec;
    Minutes horizon{30};
    MinMaxScaler input_scaler;
    MinMaxScaler target_scaler;
    QuantileNet net;
};

struct QuantileTriple {
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
};

// Scales, runs the net and maps every head back to sensor units. GapError
// if the window has a missing entry.
std::vector<QuantileTriple> predict_quantiles(const QuantileForecaster& model,
                                              std::span<const std::optional<double>> raw_window);

struct ForecasterFit {
    QuantileForecaster model;
    std::vector<double> loss_trace;
};

// Scalers fitted on `train_rows` only, then trained.
ForecasterFit fit_forecaster(const LagMatrixSpec& spec, Minutes horizon, const LagRows& train_rows,
                             const TrainConfig& config);

void write_model(std::ostream& out, const QuantileForecaster& model, const std::optional<Stamp>& stamp = std::nullopt);
QuantileForecaster read_model(std::istream& in);

} // namespace plantcast::qnn
