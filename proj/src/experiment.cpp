#include "plantcast/experiment.hpp"

#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace plantcast::eval {

using timeseries::Chamber;

timeseries::PreparedDataset load_and_prepare(const config::RunConfig& cfg) {
    std::ifstream map_in(cfg.paths.chamber_map);
    if (!map_in) throw IngestError("cannot open chamber map '" + cfg.paths.chamber_map + "'");
    const auto chambers = timeseries::read_chamber_map(map_in);
    std::ifstream raw_in(cfg.paths.raw);
    if (!raw_in) throw IngestError("cannot open raw data '" + cfg.paths.raw + "'");
    const auto ingested = timeseries::ingest_csv(raw_in, chambers);
    auto ds = timeseries::prepare(ingested, cfg.cleaning);
    if (ds.series.empty()) throw EmptySeriesError("no sensor survived cleaning");
    // Rejects a boundary outside the data before any work is done.
    timeseries::split_by_time(ds, {cfg.split_boundary});
    ds.boundary = cfg.split_boundary;
    return ds;
}

void run_jobs(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t i; !failed && (i = next++) < n;) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<SampleSet> featurize(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg) {
    std::vector<SampleSet> sets;
    for (const auto h : cfg.horizons) {
        for (const auto& g : ds.series) sets.push_back({g.sensor_id, g.chamber, h, {}});
    }
    run_jobs(sets.size(), cfg.threads, [&](std::size_t i) {
        sets[i].samples = features::build_samples(ds, sets[i].sensor_id, sets[i].horizon, cfg.windows);
    });
    return sets;
}

std::string qnn_model_name(Minutes window) {
    const auto m = window.count();
    return m % 60 == 0 ? "qnn_" + std::to_string(m / 60) + "h" : "qnn_" + std::to_string(m) + "m";
}

namespace {

Timestamp boundary_of(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg) {
    return ds.boundary.value_or(cfg.split_boundary);
}

std::vector<Chamber> chambers_present(const timeseries::PreparedDataset& ds) {
    std::vector<Chamber> out;
    for (const auto c : {Chamber::B100, Chamber::B200}) {
        if (!ds.sensors_in(c).empty()) out.push_back(c);
    }
    return out;
}

std::vector<Minutes> sorted_horizons(const config::RunConfig& cfg) {
    auto h = cfg.horizons;
    std::sort(h.begin(), h.end());
    h.erase(std::unique(h.begin(), h.end()), h.end());
    return h;
}

struct NetJob {
    Chamber chamber;
    Minutes horizon;
    Minutes window;
};

std::vector<NetJob> net_jobs(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg) {
    std::vector<NetJob> jobs;
    if (!cfg.has(config::ModelKind::Qnn)) return jobs;
    for (const auto c : chambers_present(ds)) {
        for (const auto h : sorted_horizons(cfg)) {
            for (const auto w : cfg.qnn_windows) jobs.push_back({c, h, w});
        }
    }
    return jobs;
}

qnn::LagRows select_rows(const qnn::LagRows& all, const std::function<bool(Timestamp)>& keep) {
    qnn::LagRows out;
    for (std::size_t r = 0; r < all.anchors.size(); ++r) {
        if (!keep(all.anchors[r])) continue;
        out.inputs.push_row(all.inputs.row(r));
        out.targets.push_row(all.targets.row(r));
        out.anchors.push_back(all.anchors[r]);
    }
    return out;
}

std::uint64_t net_seed(std::uint64_t seed, const NetJob& job) {
    const auto salt = 1'000'000'000ULL * (static_cast<std::uint64_t>(job.chamber) + 1) +
                      100'000ULL * static_cast<std::uint64_t>(job.horizon.count()) +
                      static_cast<std::uint64_t>(job.window.count());
    return mix_seed(seed, salt);
}

const ChamberNet& find_net(const TrainedModels& models, Chamber c, Minutes h, Minutes w) {
    for (const auto& n : models.nets) {
        if (n.chamber == c && n.horizon == h && n.forecaster.spec.window == w) return n;
    }
    throw LookupError("no trained quantile net for " + std::string(timeseries::to_string(c)) + " h" +
                      std::to_string(h.count()) + " " + qnn_model_name(w));
}

} // namespace

TrainedModels train_models(const timeseries::PreparedDataset& ds, const std::vector<SampleSet>& samples,
                           const config::RunConfig& cfg) {
    const Timestamp boundary = boundary_of(ds, cfg);
    const bool want_linear = cfg.has(config::ModelKind::Linear);
    const bool want_gbt = cfg.has(config::ModelKind::Gbt);
    const auto nets = net_jobs(ds, cfg);

    TrainedModels out;
    for (const auto& s : samples) out.sensors.push_back({s.sensor_id, s.chamber, s.horizon, {}, {}});
    out.nets.resize(nets.size());

    // Nets first: they are the longest jobs.
    run_jobs(nets.size() + samples.size(), cfg.threads, [&](std::size_t i) {
        if (i < nets.size()) {
            const auto& job = nets[i];
            const qnn::LagMatrixSpec spec{job.window, ds.step, ds.sensors_in(job.chamber)};
            const auto train_rows = select_rows(qnn::build_lag_rows(ds, spec, job.horizon),
                                                [&](Timestamp a) { return a + job.horizon <= boundary; });
            auto config = cfg.qnn_train;
            config.seed = net_seed(cfg.seed, job);
            auto fit = qnn::fit_forecaster(spec, job.horizon, train_rows, config);
            out.nets[i] = {job.chamber, job.horizon, std::move(fit.model), std::move(fit.loss_trace)};
            return;
        }
        const auto& set = samples[i - nets.size()];
        auto& dest = out.sensors[i - nets.size()];
        if (!want_linear && !want_gbt) return;
        const auto split = features::split_samples(set.samples, boundary);
        if (split.train.empty()) {
            throw FitError("sensor '" + set.sensor_id + "' has no training samples at horizon " +
                           std::to_string(set.horizon.count()));
        }
        if (want_linear) dest.linear = linear::linear_fit(split.train, cfg.ridge);
        if (want_gbt) dest.gbt = gbt::gbt_fit(split.train, cfg.gbt);
    });
    return out;
}

ExperimentResult evaluate_models(const timeseries::PreparedDataset& ds, const std::vector<SampleSet>& samples,
                                 const TrainedModels& models, const config::RunConfig& cfg) {
    if (models.sensors.size() != samples.size()) throw ShapeError("trained models do not match the sample sets");
    const Timestamp boundary = boundary_of(ds, cfg);
    ExperimentResult result;
    result.table.fingerprint = cfg.fingerprint;
    result.table.seed = cfg.seed;

    std::vector<features::SampleSplit> splits;
    for (const auto& s : samples) splits.push_back(features::split_samples(s.samples, boundary));

    auto add_row = [&](Chamber c, Minutes h, const std::string& name, const std::vector<Metrics>& per_sensor) {
        if (per_sensor.empty()) {
            throw DataError("no test predictions for " + std::string(timeseries::to_string(c)) + " horizon " +
                            std::to_string(h.count()) + " model " + name);
        }
        ReportRow row{c, h, name, 0.0, 0.0};
        for (const auto& m : per_sensor) {
            row.mse += m.mse;
            row.mae += m.mae;
        }
        row.mse /= static_cast<double>(per_sensor.size());
        row.mae /= static_cast<double>(per_sensor.size());
        result.table.rows.push_back(row);
    };

    for (const auto c : chambers_present(ds)) {
        for (const auto h : sorted_horizons(cfg)) {
            for (const auto kind : cfg.roster) {
                if (kind == config::ModelKind::Qnn) {
                    for (const auto w : cfg.qnn_windows) {
                        const auto& net = find_net(models, c, h, w);
                        const auto& spec = net.forecaster.spec;
                        const auto rows = select_rows(qnn::build_lag_rows(ds, spec, h),
                                                      [&](Timestamp a) { return a >= boundary; });
                        const auto name = qnn_model_name(w);
                        const std::size_t n_sensors = spec.sensors.size();
                        std::vector<PredictionTrace> traces(n_sensors);
                        for (std::size_t s = 0; s < n_sensors; ++s) traces[s] = {spec.sensors[s], c, h, name, {}};
                        std::size_t inside = 0;
                        std::vector<std::optional<double>> window(spec.n_features());
                        for (std::size_t r = 0; r < rows.anchors.size(); ++r) {
                            const auto in = rows.inputs.row(r);
                            std::copy(in.begin(), in.end(), window.begin());
                            const auto q = qnn::predict_quantiles(net.forecaster, window);
                            for (std::size_t s = 0; s < n_sensors; ++s) {
                                const double truth = rows.targets(r, s);
                                if (q[s].p10 <= truth && truth <= q[s].p90) ++inside;
                                traces[s].points.push_back({rows.anchors[r] + h, truth, q[s].p50, q[s].p10, q[s].p90});
                            }
                        }
                        std::vector<Metrics> per_sensor;
                        if (!rows.anchors.empty()) {
                            for (const auto& t : traces) {
                                std::vector<double> truth, pred;
                                for (const auto& p : t.points) {
                                    truth.push_back(p.truth);
                                    pred.push_back(p.pred);
                                }
                                per_sensor.push_back(compute_metrics(truth, pred));
                            }
                        }
                        add_row(c, h, name, per_sensor);
                        const std::size_t pairs = rows.anchors.size() * n_sensors;
                        result.qnn.push_back({c, h, name,
                                              static_cast<double>(inside) / static_cast<double>(pairs),
                                              net.loss_trace.front(), net.loss_trace.back(),
                                              count_parameters(spec.n_features(), n_sensors),
                                              0, rows.anchors.size()});
                        for (auto& t : traces) result.traces.push_back(std::move(t));
                    }
                    continue;
                }

                const auto name = std::string(config::to_string(kind));
                std::vector<Metrics> per_sensor;
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    const auto& set = samples[i];
                    if (set.chamber != c || set.horizon != h || splits[i].test.empty()) continue;
                    const auto& m = models.sensors[i];
                    PredictionTrace trace{set.sensor_id, c, h, name, {}};
                    std::vector<double> truth, pred;
                    for (const auto& sample : splits[i].test) {
                        double p = 0.0;
                        switch (kind) {
                        case config::ModelKind::LastValue: p = linear::last_value_predict(sample); break;
                        case config::ModelKind::Linear:
                            if (!m.linear) throw StateError("linear model missing for '" + set.sensor_id + "'");
                            p = linear::linear_predict(*m.linear, sample.features.values);
                            break;
                        case config::ModelKind::Gbt:
                            if (!m.gbt) throw StateError("gbt model missing for '" + set.sensor_id + "'");
                            p = gbt::gbt_predict(*m.gbt, sample.features.values);
                            break;
                        case config::ModelKind::Qnn: break;
                        }
                        truth.push_back(sample.target);
                        pred.push_back(p);
                        trace.points.push_back({sample.anchor + h, sample.target, p, std::nullopt, std::nullopt});
                    }
                    per_sensor.push_back(compute_metrics(truth, pred));
                    result.traces.push_back(std::move(trace));
                }
                add_row(c, h, name, per_sensor);
            }
        }
    }

    // Training row counts come from the nets' own data.
    for (auto& d : result.qnn) {
        for (const auto& w : cfg.qnn_windows) {
            if (qnn_model_name(w) != d.model) continue;
            const auto& net = find_net(models, d.chamber, d.horizon, w);
            const auto rows = qnn::build_lag_rows(ds, net.forecaster.spec, d.horizon);
            d.train_rows = static_cast<std::size_t>(std::count_if(
                rows.anchors.begin(), rows.anchors.end(), [&](Timestamp a) { return a + d.horizon <= boundary; }));
        }
    }
    return result;
}

ExperimentResult run_experiment(const timeseries::PreparedDataset& ds, const config::RunConfig& cfg) {
    const auto samples = featurize(ds, cfg);
    const auto models = train_models(ds, samples, cfg);
    return evaluate_models(ds, samples, models, cfg);
}

ExperimentResult run_experiment(const config::RunConfig& cfg) { return run_experiment(load_and_prepare(cfg), cfg); }

std::string render_diagnostics_csv(const std::vector<QnnDiagnostics>& rows, const Stamp& stamp) {
    std::string out = stamp_line(stamp) + "\n";
    out += "chamber,horizon,model,coverage,initial_loss,final_loss,parameters,train_rows,test_rows\n";
    for (const auto& d : rows) {
        out += std::string(timeseries::to_string(d.chamber)) + ',' + std::to_string(d.horizon.count()) + ',' + d.model +
               ',' + csv::format_fixed(d.coverage, 4) + ',' + csv::format_double(d.initial_loss) + ',' +
               csv::format_double(d.final_loss) + ',' + std::to_string(d.parameters) + ',' +
               std::to_string(d.train_rows) + ',' + std::to_string(d.test_rows) + '\n';
    }
    return out;
}

std::string trace_file_name(const PredictionTrace& trace) {
    return trace.sensor_id + "_h" + std::to_string(trace.horizon.count()) + "_" + trace.model + ".csv";
}

} // namespace plantcast::eval
