#include "plantcast/error.hpp"
#include "plantcast/experiment.hpp"
#include "plantcast/metrics.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <sstream>

using namespace plantcast;
using namespace plantcast::eval;
using testing::at;

TEST_SUITE("eval") {

TEST_CASE("metric examples") {
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(mse(zeros, zeros) == 0.0);
    CHECK(mae(zeros, zeros) == 0.0);
    CHECK(mse(zeros, std::vector<double>{1.0, -1.0}) == 1.0);
    CHECK(mae(zeros, std::vector<double>{1.0, -1.0}) == 1.0);
    CHECK(mse(zeros, std::vector<double>{2.0, 0.0}) == 2.0);
    CHECK(mae(zeros, std::vector<double>{2.0, 0.0}) == 1.0);
    CHECK_THROWS_AS(mse(zeros, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ShapeError);
}

TEST_CASE("metrics match a long double recomputation") {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.index(300);
        std::vector<double> t(n), p(n);
        long double sq = 0.0L, ab = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.uniform(-100.0, 300.0);
            p[i] = t[i] + rng.normal() * 5.0;
            const long double d = static_cast<long double>(t[i]) - p[i];
            sq += d * d;
            ab += d < 0 ? -d : d;
        }
        const auto m = compute_metrics(t, p);
        REQUIRE(m.n == n);
        REQUIRE(oracle::close(m.mse, static_cast<double>(sq / n), 1e-12));
        REQUIRE(oracle::close(m.mae, static_cast<double>(ab / n), 1e-12));
    }
}

TEST_CASE("parameter accounting") {
    CHECK(count_parameters(600, 30) == 228120);
    CHECK(count_parameters(240, 30) == 49740);
    CHECK(count_parameters(1, 1) == 8);
}

TEST_CASE("report rendering") {
    ReportTable table;
    table.fingerprint = "0123456789abcdef";
    table.seed = 7;
    CHECK(render_report_csv(table) ==
          "# plantcast fingerprint=0123456789abcdef seed=7\nchamber,horizon,model,mse,mae\n");
    table.rows.push_back({timeseries::Chamber::B200, Minutes{60}, "gbt", 16.90301, 2.5});
    table.rows.push_back({timeseries::Chamber::B100, Minutes{30}, "qnn_5h", 0.123456, 1e-5});
    const auto text = render_report_csv(table);
    CHECK(text.find("B200,60,gbt,16.9030,2.5000\n") != std::string::npos);
    CHECK(text.find("B100,30,qnn_5h,0.1235,0.0000\n") != std::string::npos);
    CHECK(render_report_text(table).find("16.9030") != std::string::npos);

    std::istringstream in(text);
    const auto back = read_report_csv(in);
    CHECK(back.fingerprint == table.fingerprint);
    CHECK(back.seed == 7);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].model == "gbt");
    CHECK(back.rows[0].mse == 16.903);
    std::istringstream headless("chamber,horizon,model,mse,mae\n");
    CHECK_THROWS_AS(read_report_csv(headless), FormatError);
}

TEST_CASE("trace export") {
    PredictionTrace trace{"T101", timeseries::Chamber::B100, Minutes{30}, "gbt", {}};
    trace.points.push_back({at("2016-11-01T00:30Z"), 100.5, 101.0, std::nullopt, std::nullopt});
    trace.points.push_back({at("2016-11-01T00:45Z"), 99.0, 98.25, std::nullopt, std::nullopt});
    CHECK(export_trace(trace) ==
          "timestamp,truth,pred,p10,p90\n2016-11-01T00:30:00Z,100.5,101,,\n2016-11-01T00:45:00Z,99,98.25,,\n");
    CHECK(trace_file_name(trace) == "T101_h30_gbt.csv");
    trace.points[1].p10 = 90.0;
    trace.points[1].p90 = 110.0;
    CHECK(export_trace(trace).find(",98.25,90,110\n") != std::string::npos);
    trace.points[1].time = trace.points[0].time;
    CHECK_THROWS_AS(export_trace(trace), FormatError);
}

TEST_CASE("quantile net names") {
    CHECK(qnn_model_name(Minutes{300}) == "qnn_5h");
    CHECK(qnn_model_name(Minutes{120}) == "qnn_2h");
    CHECK(qnn_model_name(Minutes{90}) == "qnn_90m");
}

TEST_CASE("job runner covers every index once and rethrows the first failure") {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<std::atomic<int>> hits(50);
        run_jobs(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
        for (const auto& h : hits) REQUIRE(h.load() == 1);
        CHECK_THROWS_WITH(run_jobs(20, threads,
                                   [](std::size_t i) {
                                       if (i == 4 || i == 11) throw FitError("job " + std::to_string(i));
                                   }),
                          "job 4");
    }
}

TEST_CASE("last-value roster gives one row per chamber and horizon") {
    const auto cfg = testing::small_plant("eval_lastvalue", R"("roster": ["last_value"])");
    const auto result = run_experiment(cfg);
    REQUIRE(result.table.rows.size() == 2 * cfg.horizons.size());
    CHECK(result.table.rows[0].chamber == timeseries::Chamber::B100);
    CHECK(result.table.rows[0].horizon == Minutes{30});
    CHECK(result.table.rows[1].horizon == Minutes{60});
    CHECK(result.table.rows[2].chamber == timeseries::Chamber::B200);
    for (const auto& r : result.table.rows) {
        CHECK(r.model == "last_value");
        CHECK(r.mse > 0.0);
        CHECK(r.mae > 0.0);
    }
    CHECK(result.table.fingerprint == cfg.fingerprint);
    CHECK(result.qnn.empty());
    CHECK(result.traces.size() == 5 * 2);
}

TEST_CASE("full roster run is deterministic across thread counts") {
    auto cfg = testing::small_plant("eval_full");
    const auto ds = load_and_prepare(cfg);
    const auto a = run_experiment(ds, cfg);
    cfg.threads = 1;
    const auto b = run_experiment(ds, cfg);
    CHECK(render_report_csv(a.table) == render_report_csv(b.table));
    REQUIRE(a.traces.size() == b.traces.size());
    for (std::size_t i = 0; i < a.traces.size(); ++i) REQUIRE(export_trace(a.traces[i]) == export_trace(b.traces[i]));

    // 2 chambers x 2 horizons x (last_value, linear, gbt, qnn_2h, qnn_1h)
    REQUIRE(a.table.rows.size() == 20);
    std::set<std::string> names;
    for (const auto& r : a.table.rows) names.insert(r.model);
    CHECK(names == std::set<std::string>{"last_value", "linear", "gbt", "qnn_2h", "qnn_1h"});
    REQUIRE(a.qnn.size() == 8);
    for (const auto& d : a.qnn) {
        CHECK(d.coverage >= 0.0);
        CHECK(d.coverage <= 1.0);
        CHECK(d.test_rows > 0);
        CHECK(std::isfinite(d.final_loss));
    }

    // Traces: strictly increasing times, quantile cells only for the nets,
    // and every predicted time is after the split boundary.
    for (const auto& t : a.traces) {
        const bool is_net = t.model.rfind("qnn_", 0) == 0;
        REQUIRE_FALSE(t.points.empty());
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            if (i > 0) REQUIRE(t.points[i - 1].time < t.points[i].time);
            REQUIRE(t.points[i].p10.has_value() == is_net);
            REQUIRE(t.points[i].time >= cfg.split_boundary + t.horizon);
        }
    }
}

TEST_CASE("missing input files are data errors naming the path") {
    auto cfg = testing::small_plant("eval_missing", R"("roster": ["last_value"])");
    cfg.paths.raw += ".absent";
    try {
        load_and_prepare(cfg);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(cfg.paths.raw) != std::string::npos);
    }
}

}
