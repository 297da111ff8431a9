#pragma once

#include "plantcast/config.hpp"
#include "plantcast/features.hpp"
#include "plantcast/gbt.hpp"
#include "plantcast/linear.hpp"
#include "plantcast/metrics.hpp"
#include "plantcast/qnn.hpp"
#include "plantcast/timeseries.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace plantcast::eval {

// Reads the raw CSV and chamber map named in the config, cleans and resamples.
// The split boundary is recorded on the result.
timeseries::PreparedDataset load_and_prepare(const config::RunConfig& cfg);

// All samples of one sensor at one horizon, ordered by anchor.
struct SampleSet {
    std::string sensor_id;
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    std::vector<features::Sample> samples;
};

// One set per (horizon, sensor), horizon-major in config order, sensors by id.
std::vector<SampleSet> featurize(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg);

struct SensorModels {
    std::string sensor_id;
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    std::optional<linear::LinearModel> linear;
    std::optional<gbt::GBTModel> gbt;
};

struct ChamberNet {
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    qnn::QuantileForecaster forecaster;
    std::vector<double> loss_trace;
};

struct TrainedModels {
    std::vector<SensorModels> sensors;  // same order as the sample sets
    std::vector<ChamberNet> nets;       // chamber, horizon, then window in config order
};

// Report name of a quantile net, e.g. `qnn_5h` or `qnn_90m`.
std::string qnn_model_name(Minutes window);

// Trains every enabled model on the training portion only.
TrainedModels train_models(const timeseries::PreparedDataset& ds, const std::vector<SampleSet>& samples,
                           const config::RunConfig& cfg);

struct QnnDiagnostics {
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Minutes horizon{30};
    std::string model;
    double coverage = 0.0;       // share of test (row, sensor) pairs inside [p10, p90]
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t parameters = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
};

struct ExperimentResult {
    ReportTable table;
    std::vector<PredictionTrace> traces;
    std::vector<QnnDiagnostics> qnn;
};

// Scores trained models on the test portion and aggregates per chamber.
// DataError if some (chamber, horizon, model) cell has no test predictions.
ExperimentResult evaluate_models(const timeseries::PreparedDataset& ds, const std::vector<SampleSet>& samples,
                                 const TrainedModels& models, const config::RunConfig& cfg);

ExperimentResult run_experiment(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg);
ExperimentResult run_experiment(const config::RunConfig& cfg);

// Runs jobs 0..n-1 on up to `threads` workers (0 = hardware concurrency).
// The first exception, by job index, is rethrown after all workers stop.
void run_jobs(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job);

// `qnn_diagnostics.csv` content, stamped.
std::string render_diagnostics_csv(const std::vector<QnnDiagnostics>& rows, const Stamp& stamp);

// File name for a trace, e.g. `T101_h30_gbt.csv`.
std::string trace_file_name(const PredictionTrace& trace);

} // namespace plantcast::eval
