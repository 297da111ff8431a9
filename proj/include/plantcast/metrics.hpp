#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plantcast::eval {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n = 0;
};

// ShapeError on unequal or empty inputs.
double mse(std::span<const double> truth, std::span<const double> pred);
double mae(std::span<const double> truth, std::span<const double> pred);
Metrics compute_metrics(std::span<const double> truth, std::span<const double> pred);

// Parameters of a quantile net with the given input/output sizes.
std::size_t count_parameters(std::size_t n_features, std::size_t n_targets);

struct ReportRow {
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    std::string model;
    double mse = 0.0;
    double mae = 0.0;
};

struct ReportTable {
    std::vector<ReportRow> rows;
    std::string fingerprint;
    std::uint64_t seed = 0;
};

struct TracePoint {
    Timestamp time;  // time of the predicted value
    double truth = 0.0;
    double pred = 0.0;
    std::optional<double> p10;
    std::optional<double> p90;
};

struct PredictionTrace {
    std::string sensor_id;
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    std::string model;
    std::vector<TracePoint> points;  // strictly increasing in time
};

// `chamber,horizon,model,mse,mae` with four decimals, preceded by the stamp line.
std::string render_report_csv(const ReportTable& table);
// Aligned plain-text table.
std::string render_report_text(const ReportTable& table);
ReportTable read_report_csv(std::istream& in);

// `timestamp,truth,pred,p10,p90`; quantile cells empty for point models.
std::string export_trace(const PredictionTrace& trace, const std::optional<Stamp>& stamp = std::nullopt);

} // namespace plantcast::eval
