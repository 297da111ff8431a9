#include "plantcast/cli.hpp"

#include "plantcast/config.hpp"
#include "plantcast/error.hpp"
#include "plantcast/experiment.hpp"
#include "plantcast/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace plantcast::cli {

namespace fs = std::filesystem;
using config::RunConfig;
using timeseries::Chamber;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' (did the previous stage run?)");
    return in;
}

// Opens a stage artifact and refuses it unless it carries this config's stamp.
std::ifstream open_artifact(const fs::path& path, const RunConfig& cfg) {
    auto in = open_input(path);
    const auto stamp = peek_stamp(in);
    if (!stamp) throw FormatError("artifact '" + path.string() + "' has no fingerprint line");
    if (*stamp != cfg.stamp()) {
        throw DataError("artifact '" + path.string() + "' comes from a different run (fingerprint " + stamp->fingerprint +
                        " seed " + std::to_string(stamp->seed) + ", expected " + cfg.fingerprint + " seed " +
                        std::to_string(cfg.seed) + ")");
    }
    return in;
}

struct Workdir {
    fs::path root;

    fs::path prepared_data() const { return root / "prepared.csv"; }
    fs::path prepared_meta() const { return root / "prepared.meta"; }
    fs::path samples(Minutes h) const { return root / ("samples_h" + std::to_string(h.count()) + ".csv"); }
    fs::path models() const { return root / "models"; }
    fs::path linear_model(const std::string& sensor, Minutes h) const {
        return models() / ("linear_" + sensor + "_h" + std::to_string(h.count()) + ".txt");
    }
    fs::path gbt_model(const std::string& sensor, Minutes h) const {
        return models() / ("gbt_" + sensor + "_h" + std::to_string(h.count()) + ".txt");
    }
    std::string net_stem(Chamber c, Minutes h, Minutes w) const {
        return std::string(timeseries::to_string(c)) + "_h" + std::to_string(h.count()) + "_" +
               eval::qnn_model_name(w);
    }
    fs::path net_model(Chamber c, Minutes h, Minutes w) const { return models() / (net_stem(c, h, w) + ".txt"); }
    fs::path net_loss(Chamber c, Minutes h, Minutes w) const { return models() / (net_stem(c, h, w) + "_loss.csv"); }
    fs::path report_csv() const { return root / "report.csv"; }
    fs::path report_txt() const { return root / "report.txt"; }
    fs::path diagnostics() const { return root / "qnn_diagnostics.csv"; }
    fs::path manifest() const { return root / "run_manifest.json"; }
    fs::path traces() const { return root / "traces"; }
    fs::path predictions() const { return root / "predictions.csv"; }
};

Workdir workdir_of(const RunConfig& cfg) {
    if (const char* env = std::getenv(kWorkdirEnv); env && *env) return {env};
    return {cfg.paths.workdir};
}

timeseries::PreparedDataset load_prepared(const Workdir& wd, const RunConfig& cfg) {
    auto data = open_artifact(wd.prepared_data(), cfg);
    auto meta = open_artifact(wd.prepared_meta(), cfg);
    return timeseries::read_prepared(data, meta);
}

// Rebuilds the sample sets in featurize() order from the per-horizon files.
std::vector<eval::SampleSet> load_samples(const Workdir& wd, const timeseries::PreparedDataset& ds,
                                          const RunConfig& cfg) {
    std::vector<eval::SampleSet> sets;
    for (const auto h : cfg.horizons) {
        auto in = open_artifact(wd.samples(h), cfg);
        auto samples = features::read_samples_csv(in);
        std::map<std::string, std::vector<features::Sample>, std::less<>> by_sensor;
        for (auto& s : samples) {
            if (s.horizon != h) throw FormatError("samples file for horizon " + std::to_string(h.count()) +
                                                  " holds another horizon");
            by_sensor[s.sensor_id].push_back(std::move(s));
        }
        for (const auto& g : ds.series) {
            eval::SampleSet set{g.sensor_id, g.chamber, h, {}};
            if (const auto it = by_sensor.find(g.sensor_id); it != by_sensor.end()) set.samples = std::move(it->second);
            sets.push_back(std::move(set));
        }
    }
    return sets;
}

std::string loss_csv(const std::vector<double>& trace, const Stamp& stamp) {
    std::string out = stamp_line(stamp) + "\nepoch,loss\n";
    for (std::size_t e = 0; e < trace.size(); ++e) out += std::to_string(e) + ',' + csv::format_double(trace[e]) + '\n';
    return out;
}

std::vector<double> read_loss_csv(std::istream& in) {
    std::string line;
    if (!csv::next_data_line(in, line) || line != "epoch,loss") throw FormatError("loss trace: missing header");
    std::vector<double> trace;
    while (csv::next_data_line(in, line)) {
        const auto f = csv::split(line);
        const auto v = f.size() == 2 ? csv::parse_double(f[1]) : std::nullopt;
        if (!v) throw FormatError("loss trace: bad row '" + line + "'");
        trace.push_back(*v);
    }
    if (trace.empty()) throw FormatError("loss trace is empty");
    return trace;
}

std::vector<Chamber> chambers_of(const timeseries::PreparedDataset& ds) {
    std::vector<Chamber> out;
    for (const auto c : {Chamber::B100, Chamber::B200}) {
        if (!ds.sensors_in(c).empty()) out.push_back(c);
    }
    return out;
}

eval::TrainedModels load_models(const Workdir& wd, const timeseries::PreparedDataset& ds,
                                const std::vector<eval::SampleSet>& sets, const RunConfig& cfg) {
    eval::TrainedModels models;
    for (const auto& s : sets) {
        eval::SensorModels m{s.sensor_id, s.chamber, s.horizon, {}, {}};
        if (cfg.has(config::ModelKind::Linear)) {
            auto in = open_artifact(wd.linear_model(s.sensor_id, s.horizon), cfg);
            m.linear = linear::read_model(in);
        }
        if (cfg.has(config::ModelKind::Gbt)) {
            auto in = open_artifact(wd.gbt_model(s.sensor_id, s.horizon), cfg);
            m.gbt = gbt::read_model(in);
        }
        models.sensors.push_back(std::move(m));
    }
    if (cfg.has(config::ModelKind::Qnn)) {
        auto horizons = cfg.horizons;
        std::sort(horizons.begin(), horizons.end());
        for (const auto c : chambers_of(ds)) {
            for (const auto h : horizons) {
                for (const auto w : cfg.qnn_windows) {
                    auto in = open_artifact(wd.net_model(c, h, w), cfg);
                    auto loss = open_artifact(wd.net_loss(c, h, w), cfg);
                    models.nets.push_back({c, h, qnn::read_model(in), read_loss_csv(loss)});
                }
            }
        }
    }
    return models;
}

// --- stages -----------------------------------------------------------------

struct SynthArgs {
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::string chambers_path;
    std::string manifest_path;
    std::optional<int> days;
};

std::string sibling(const std::string& path, const std::string& suffix) {
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

int run_synth(const std::optional<RunConfig>& cfg, const SynthArgs& args, std::ostream& out) {
    synth::SynthConfig sc = cfg ? cfg->synth : synth::SynthConfig{};
    if (cfg) sc.seed = cfg->seed;
    if (args.seed) sc.seed = *args.seed;
    if (args.days) sc.days = *args.days;
    std::string raw = args.out_path;
    std::string chambers = args.chambers_path;
    if (raw.empty()) {
        if (!cfg) throw ConfigError("synth needs --out or --config");
        raw = cfg->paths.raw;
        if (chambers.empty()) chambers = cfg->paths.chamber_map;
    }
    if (chambers.empty()) chambers = sibling(raw, ".chambers.csv");
    const std::string manifest_path = args.manifest_path.empty() ? sibling(raw, ".manifest.json") : args.manifest_path;

    std::ostringstream data;
    const auto manifest = synth::generate(sc, data);
    std::ostringstream map;
    synth::write_chamber_map(manifest, map);
    write_file(raw, data.str());
    write_file(chambers, map.str());
    write_file(manifest_path, synth::render_manifest(manifest));
    out << "synth: wrote " << manifest.rows_written << " readings for " << manifest.sensors.size() << " sensors to "
        << raw << " (seed " << sc.seed << ")\n";
    return kOk;
}

int run_prepare(const RunConfig& cfg, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    const auto ds = eval::load_and_prepare(cfg);
    std::ostringstream data, meta;
    timeseries::write_prepared(ds, data, meta, cfg.stamp());
    write_file(wd.prepared_data(), data.str());
    write_file(wd.prepared_meta(), meta.str());
    const auto& p = ds.provenance;
    out << "prepare: " << ds.series.size() << " sensors, " << ds.n_cells << " cells each, " << p.cells_present << "/"
        << p.cells_total << " cells present, " << p.sensors_dropped << " sensors dropped, " << p.readings_inactive
        << " inactive readings removed\n";
    return kOk;
}

int run_featurize(const RunConfig& cfg, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    const auto ds = load_prepared(wd, cfg);
    const auto sets = eval::featurize(ds, cfg);
    std::size_t total = 0;
    for (const auto h : cfg.horizons) {
        std::vector<features::Sample> all;
        for (const auto& s : sets) {
            if (s.horizon == h) all.insert(all.end(), s.samples.begin(), s.samples.end());
        }
        total += all.size();
        std::ostringstream csv_out;
        features::write_samples_csv(csv_out, all, cfg.windows.feature_count(), cfg.stamp());
        write_file(wd.samples(h), csv_out.str());
    }
    out << "featurize: " << total << " samples with " << cfg.windows.feature_count() << " features over "
        << cfg.horizons.size() << " horizons\n";
    return kOk;
}

int run_train(const RunConfig& cfg, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    const auto ds = load_prepared(wd, cfg);
    const auto sets = load_samples(wd, ds, cfg);
    const auto models = eval::train_models(ds, sets, cfg);
    std::size_t written = 0;
    for (const auto& m : models.sensors) {
        if (m.linear) {
            std::ostringstream s;
            linear::write_model(s, *m.linear, cfg.stamp());
            write_file(wd.linear_model(m.sensor_id, m.horizon), s.str());
            ++written;
        }
        if (m.gbt) {
            std::ostringstream s;
            gbt::write_model(s, *m.gbt, cfg.stamp());
            write_file(wd.gbt_model(m.sensor_id, m.horizon), s.str());
            ++written;
        }
    }
    for (const auto& n : models.nets) {
        const auto w = n.forecaster.spec.window;
        std::ostringstream s;
        qnn::write_model(s, n.forecaster, cfg.stamp());
        write_file(wd.net_model(n.chamber, n.horizon, w), s.str());
        write_file(wd.net_loss(n.chamber, n.horizon, w), loss_csv(n.loss_trace, cfg.stamp()));
        ++written;
    }
    out << "train: wrote " << written << " models to " << wd.models().string() << "\n";
    return kOk;
}

std::string run_manifest_json(const RunConfig& cfg, const timeseries::PreparedDataset& ds, const Workdir& wd) {
    nlohmann::ordered_json j;
    j["format"] = "plantcast-run-manifest-v1";
    j["fingerprint"] = cfg.fingerprint;
    j["seed"] = cfg.seed;
    std::ifstream data(wd.prepared_data(), std::ios::binary);
    std::ostringstream bytes;
    bytes << data.rdbuf();
    j["data_fingerprint"] = csv::hex64(csv::fnv1a(bytes.str()));
    j["scalers"] = "min-max, fit on training rows only; inputs and targets";
    j["quantile_point_estimate"] = "p50 head";
    j["chamber_aggregation"] = "unweighted mean of per-sensor metrics";
    const auto& p = ds.provenance;
    j["provenance"] = {{"rows_parsed", p.rows_parsed},         {"rows_retained", p.rows_retained},
                       {"rows_skipped", p.rows_skipped},       {"rows_duplicate", p.rows_duplicate},
                       {"sensors_dropped", p.sensors_dropped}, {"readings_inactive", p.readings_inactive},
                       {"cells_total", p.cells_total},         {"cells_present", p.cells_present}};
    j["config"] = nlohmann::json::parse(config::normalized_json(cfg));
    return j.dump(2) + "\n";
}

int run_evaluate(const RunConfig& cfg, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    const auto ds = load_prepared(wd, cfg);
    const auto sets = load_samples(wd, ds, cfg);
    const auto models = load_models(wd, ds, sets, cfg);
    const auto result = eval::evaluate_models(ds, sets, models, cfg);
    write_file(wd.report_csv(), eval::render_report_csv(result.table));
    write_file(wd.report_txt(), eval::render_report_text(result.table));
    write_file(wd.diagnostics(), eval::render_diagnostics_csv(result.qnn, cfg.stamp()));
    for (const auto& t : result.traces) write_file(wd.traces() / eval::trace_file_name(t), eval::export_trace(t, cfg.stamp()));
    write_file(wd.manifest(), run_manifest_json(cfg, ds, wd));
    out << "evaluate: " << result.table.rows.size() << " report rows, " << result.traces.size() << " traces in "
        << wd.root.string() << "\n";
    return kOk;
}

int run_predict(const RunConfig& cfg, const std::optional<std::string>& at, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    const auto ds = load_prepared(wd, cfg);
    const Timestamp anchor = at ? parse_timestamp(*at) : ds.origin + ds.step * static_cast<std::int64_t>(ds.n_cells);
    std::vector<eval::SampleSet> sets;
    for (const auto h : cfg.horizons) {
        for (const auto& g : ds.series) sets.push_back({g.sensor_id, g.chamber, h, {}});
    }
    const auto models = load_models(wd, ds, sets, cfg);

    std::string text = stamp_line(cfg.stamp()) + "\nsensor_id,chamber,horizon,model,anchor,target_time,pred,p10,p90\n";
    std::size_t rows = 0, skipped = 0;
    auto emit = [&](const std::string& sensor, Chamber c, Minutes h, const std::string& model, double pred,
                    std::optional<double> p10, std::optional<double> p90) {
        text += sensor + ',' + std::string(timeseries::to_string(c)) + ',' + std::to_string(h.count()) + ',' + model +
                ',' + format_timestamp(anchor) + ',' + format_timestamp(anchor + h) + ',' + csv::format_double(pred) +
                ',' + (p10 ? csv::format_double(*p10) : "") + ',' + (p90 ? csv::format_double(*p90) : "") + '\n';
        ++rows;
    };
    for (const auto c : chambers_of(ds)) {
        auto horizons = cfg.horizons;
        std::sort(horizons.begin(), horizons.end());
        for (const auto h : horizons) {
            for (const auto kind : cfg.roster) {
                if (kind == config::ModelKind::Qnn) {
                    for (const auto& n : models.nets) {
                        if (n.chamber != c || n.horizon != h) continue;
                        const auto window = qnn::lag_window(ds, n.forecaster.spec, anchor);
                        if (std::any_of(window.begin(), window.end(), [](const auto& v) { return !v; })) {
                            ++skipped;
                            continue;
                        }
                        const auto q = qnn::predict_quantiles(n.forecaster, window);
                        const auto name = eval::qnn_model_name(n.forecaster.spec.window);
                        for (std::size_t s = 0; s < q.size(); ++s) {
                            emit(n.forecaster.spec.sensors[s], c, h, name, q[s].p50, q[s].p10, q[s].p90);
                        }
                    }
                    continue;
                }
                for (std::size_t i = 0; i < sets.size(); ++i) {
                    if (sets[i].chamber != c || sets[i].horizon != h) continue;
                    const auto fv = features::compute_features(ds.find(sets[i].sensor_id), anchor, h, cfg.windows);
                    if (!fv) {
                        ++skipped;
                        continue;
                    }
                    const auto& m = models.sensors[i];
                    double pred = fv->last_value();
                    if (kind == config::ModelKind::Linear) pred = linear::linear_predict(*m.linear, fv->values);
                    if (kind == config::ModelKind::Gbt) pred = gbt::gbt_predict(*m.gbt, fv->values);
                    emit(sets[i].sensor_id, c, h, std::string(config::to_string(kind)), pred, std::nullopt,
                         std::nullopt);
                }
            }
        }
    }
    write_file(wd.predictions(), text);
    out << "predict: " << rows << " predictions at " << format_timestamp(anchor) << ", " << skipped
        << " skipped for incomplete history\n";
    return kOk;
}

int run_report(const RunConfig& cfg, std::ostream& out) {
    const Workdir wd = workdir_of(cfg);
    // Every stage artifact present in the workdir must belong to this run.
    std::size_t checked = 0;
    for (const auto& entry : fs::recursive_directory_iterator(wd.root)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".txt" && ext != ".meta") continue;
        if (entry.path() == wd.report_txt()) continue;
        open_artifact(entry.path(), cfg);
        ++checked;
    }
    auto in = open_artifact(wd.report_csv(), cfg);
    const auto table = eval::read_report_csv(in);
    const auto text = eval::render_report_text(table);
    write_file(wd.report_txt(), text);
    out << text;
    out << "report: " << table.rows.size() << " rows, " << checked << " artifacts share fingerprint " << cfg.fingerprint
        << "\n";
    return kOk;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"plantcast: multi-sensor plant forecasting pipeline", "plantcast"};
    app.require_subcommand(1);
    std::string config_path;
    SynthArgs synth_args;
    std::optional<std::string> predict_at;

    auto* synth = app.add_subcommand("synth", "Generate synthetic raw plant data");
    synth->add_option("--config", config_path, "Run config; output goes to its data paths");
    synth->add_option("--seed", synth_args.seed, "Generator seed");
    synth->add_option("--out", synth_args.out_path, "Raw CSV output path");
    synth->add_option("--chambers", synth_args.chambers_path, "Chamber map output path");
    synth->add_option("--manifest", synth_args.manifest_path, "Manifest output path");
    synth->add_option("--days", synth_args.days, "Duration override")->check(CLI::PositiveNumber);

    std::vector<std::pair<std::string, CLI::App*>> stages;
    for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
             {"prepare", "Ingest, clean and resample the raw data"},
             {"featurize", "Build window feature samples"},
             {"train", "Train the model roster"},
             {"evaluate", "Score models on the test split and write the report"},
             {"predict", "Forecast from the latest (or given) anchor"},
             {"report", "Check artifact fingerprints and print the report"}}) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Run config (JSON)")->required();
        stages.emplace_back(name, sub);
    }
    stages[4].second->add_option("--at", predict_at, "Anchor timestamp (UTC)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth->parsed()) {
            if (config_path.empty() && synth_args.out_path.empty()) {
                err << "synth: give --seed/--out or --config\n" << app.help();
                return kUsage;
            }
            std::optional<RunConfig> cfg;
            if (!config_path.empty()) cfg = config::load_config(config_path);
            return run_synth(cfg, synth_args, out);
        }
        const auto cfg = config::load_config(config_path);
        if (stages[0].second->parsed()) return run_prepare(cfg, out);
        if (stages[1].second->parsed()) return run_featurize(cfg, out);
        if (stages[2].second->parsed()) return run_train(cfg, out);
        if (stages[3].second->parsed()) return run_evaluate(cfg, out);
        if (stages[4].second->parsed()) return run_predict(cfg, predict_at, out);
        if (stages[5].second->parsed()) return run_report(cfg, out);
        err << app.help();
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

} // namespace plantcast::cli
