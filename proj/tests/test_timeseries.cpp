#include "plantcast/error.hpp"
#include "plantcast/timeseries.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <array>
#include <fstream>
#include <set>
#include <sstream>

using namespace plantcast;
using namespace plantcast::timeseries;
using testing::at;

namespace {

ChamberMap two_sensor_map() { return {{"T101", Chamber::B100}, {"T201", Chamber::B200}}; }

SensorSeries series_of(std::vector<std::pair<const char*, double>> rows) {
    SensorSeries s{"T101", Chamber::B100, {}};
    for (const auto& [t, v] : rows) s.readings.push_back({at(t), v});
    return s;
}

SensorSeries constant_run(std::size_t n, double value, const char* start = "2016-10-01T00:00Z") {
    SensorSeries s{"T101", Chamber::B100, {}};
    for (std::size_t i = 0; i < n; ++i) s.readings.push_back({at(start) + Minutes{static_cast<long>(i)}, value});
    return s;
}

} // namespace

TEST_SUITE("timeseries") {

TEST_CASE("ingest sorts rows per sensor") {
    std::istringstream in("timestamp,sensor_id,value\n"
                          "2016-10-01T00:05Z,T101,2.0\n"
                          "2016-10-01T00:01Z,T101,1.0\n");
    const auto r = ingest_csv(in, two_sensor_map());
    REQUIRE(r.series.size() == 1);
    CHECK(r.series[0].sensor_id == "T101");
    CHECK(r.series[0].chamber == Chamber::B100);
    REQUIRE(r.series[0].readings.size() == 2);
    CHECK(r.series[0].readings[0].value == 1.0);
    CHECK(r.series[0].readings[1].value == 2.0);
}

TEST_CASE("ingest skips NaN, bad rows and unknown sensors, counting them") {
    std::istringstream in("timestamp,sensor_id,value\n"
                          "2016-10-01T00:01Z,T101,NaN\n"
                          "2016-10-01T00:02Z,T101,inf\n"
                          "not-a-time,T101,1.0\n"
                          "2016-10-01T00:03Z,T999,1.0\n"
                          "2016-10-01T00:04Z,T101\n"
                          "2016-10-01T00:05Z,T201,4.5\n");
    const auto r = ingest_csv(in, two_sensor_map());
    CHECK(r.stats.rows_parsed == 6);
    CHECK(r.stats.rows_skipped == 5);
    CHECK(r.stats.rows_retained == 1);
    CHECK(r.stats.rows_parsed == r.stats.rows_retained + r.stats.rows_skipped + r.stats.rows_duplicate);
}

TEST_CASE("duplicate timestamp keeps the last occurrence") {
    std::istringstream in("timestamp,sensor_id,value\n"
                          "2016-10-01T00:01Z,T101,1.0\n"
                          "2016-10-01T00:01Z,T101,9.0\n");
    const auto r = ingest_csv(in, two_sensor_map());
    REQUIRE(r.series.size() == 1);
    REQUIRE(r.series[0].readings.size() == 1);
    CHECK(r.series[0].readings[0].value == 9.0);
    CHECK(r.stats.rows_duplicate == 1);
}

TEST_CASE("ingest errors") {
    std::istringstream no_header("2016-10-01T00:01Z,T101,1.0\n");
    CHECK_THROWS_AS(ingest_csv(no_header, two_sensor_map()), FormatError);
    std::istringstream empty("");
    CHECK_THROWS_AS(ingest_csv(empty, two_sensor_map()), FormatError);
    std::ifstream missing("/nonexistent/raw.csv");
    CHECK_THROWS_AS(ingest_csv(missing, two_sensor_map()), IngestError);
}

TEST_CASE("provenance identity on random row soup") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text = "timestamp,sensor_id,value\n";
        const int n = 1 + static_cast<int>(rng.index(200));
        for (int i = 0; i < n; ++i) {
            const auto t = at("2016-10-01T00:00Z") + Minutes{static_cast<long>(rng.index(50))};
            const char* ids[] = {"T101", "T201", "X"};
            const char* values[] = {"1.5", "NaN", "abc", "-3"};
            text += (rng.index(10) == 0 ? std::string("bad") : format_timestamp(t)) + "," + ids[rng.index(3)] + "," +
                    values[rng.index(4)] + "\n";
        }
        std::istringstream in(text);
        const auto r = ingest_csv(in, two_sensor_map());
        std::size_t held = 0;
        for (const auto& s : r.series) {
            held += s.readings.size();
            for (std::size_t i = 1; i < s.readings.size(); ++i) REQUIRE(s.readings[i - 1].time < s.readings[i].time);
        }
        REQUIRE(r.stats.rows_parsed == static_cast<std::size_t>(n));
        REQUIRE(r.stats.rows_parsed == r.stats.rows_retained + r.stats.rows_skipped + r.stats.rows_duplicate);
        REQUIRE(held == r.stats.rows_retained);
    }
}

TEST_CASE("chamber map parsing") {
    std::istringstream good("sensor_id,chamber\nT1,B100\nT2, B200\n");
    const auto m = read_chamber_map(good);
    CHECK(m.at("T1") == Chamber::B100);
    CHECK(m.at("T2") == Chamber::B200);
    std::istringstream bad("sensor_id,chamber\nT1,B300\n");
    CHECK_THROWS_AS(read_chamber_map(bad), FormatError);
}

TEST_CASE("filter_low_count boundary") {
    std::vector<SensorSeries> set{constant_run(5999, 1.0), constant_run(6000, 1.0)};
    set[1].sensor_id = "T102";
    const auto kept = filter_low_count(set, 6000);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].sensor_id == "T102");
    CHECK(filter_low_count({}, 6000).empty());
}

TEST_CASE("remove_inactive_runs examples") {
    CHECK(remove_inactive_runs(constant_run(100, 20.0), 25.0, 60).readings.empty());
    CHECK(remove_inactive_runs(constant_run(59, 20.0), 25.0, 60).readings.size() == 59);
    CHECK(remove_inactive_runs(constant_run(100, 80.0), 25.0, 60).readings.size() == 100);
    CHECK_THROWS_AS(remove_inactive_runs(constant_run(10, 1.0), 25.0, 1), ConfigError);
}

TEST_CASE("remove_inactive_runs keeps surrounding readings in order") {
    auto s = constant_run(200, 50.0);
    for (std::size_t i = 70; i < 140; ++i) s.readings[i].value = 3.0;
    s.readings[10].value = 3.0;  // short low blip stays
    const auto out = remove_inactive_runs(s, 10.0, 60);
    REQUIRE(out.readings.size() == 130);
    for (std::size_t i = 1; i < out.readings.size(); ++i) REQUIRE(out.readings[i - 1].time < out.readings[i].time);
    CHECK(out.readings[10].value == 3.0);
    CHECK(out.readings[70].time == s.readings[140].time);
}

TEST_CASE("resample examples") {
    const auto g = resample_last(series_of({{"2016-10-01T00:03Z", 1.0}, {"2016-10-01T00:14Z", 2.0},
                                            {"2016-10-01T00:45Z", 5.0}}),
                                 Minutes{15}, at("2016-10-01T00:00Z"));
    REQUIRE(g.cells.size() == 4);
    CHECK(g.cell_time(0) == at("2016-10-01T00:15Z"));
    CHECK(g.cells[0] == 2.0);
    CHECK_FALSE(g.cells[1].has_value());  // nothing in [00:15, 00:30)
    CHECK_FALSE(g.cells[2].has_value());
    CHECK(g.cells[3] == 5.0);             // 00:45 belongs to the cell stamped 01:00
    CHECK(g.cell_time(3) == at("2016-10-01T01:00Z"));
    CHECK(g.index_of(at("2016-10-01T01:00Z")) == 3u);
    CHECK_FALSE(g.index_of(at("2016-10-01T00:00Z")).has_value());
    CHECK_FALSE(g.index_of(at("2016-10-01T00:20Z")).has_value());
}

TEST_CASE("resample errors") {
    CHECK_THROWS_AS(resample_last(SensorSeries{"T", Chamber::B100, {}}, Minutes{15}, at("2016-10-01T00:00Z")),
                    EmptySeriesError);
    const auto s = series_of({{"2016-10-01T00:03Z", 1.0}});
    CHECK_THROWS_AS(resample_last(s, Minutes{15}, at("2016-10-01T00:05Z")), AlignmentError);
    CHECK_THROWS_AS(resample_last(s, Minutes{15}, at("2016-10-01T00:15Z")), AlignmentError);
    CHECK_THROWS_AS(resample_last(s, Minutes{15}, at("2016-09-30T00:00Z"), 2), AlignmentError);
}

TEST_CASE("resample agrees with a per-interval scan on random series") {
    Rng rng(1234);
    const Timestamp origin = at("2016-10-01T00:00Z");
    for (int trial = 0; trial < 1500; ++trial) {
        const long step = std::array<long, 4>{1, 5, 15, 60}[rng.index(4)];
        const long span = 1 + static_cast<long>(rng.index(600));
        std::set<long> minutes;
        const std::size_t count = 1 + rng.index(80);
        for (std::size_t i = 0; i < count; ++i) {
            long m = static_cast<long>(rng.index(static_cast<std::uint64_t>(span)));
            if (rng.index(3) == 0) m -= m % step;  // exactly on an interval boundary
            minutes.insert(m);
        }
        SensorSeries s{"T101", Chamber::B100, {}};
        for (const long m : minutes) s.readings.push_back({origin + Minutes{m}, rng.uniform(-5.0, 5.0)});
        const auto g = resample_last(s, Minutes{step}, origin);

        // Oracle: each interval scanned on its own.
        const long last = *minutes.rbegin();
        const std::size_t n_cells = static_cast<std::size_t>(last / step + 1);
        const auto want = oracle::scan_resample(s, step, origin, n_cells);
        REQUIRE(g.cells.size() == n_cells);
        for (std::size_t k = 0; k < n_cells; ++k) {
            REQUIRE(g.cells[k] == want[k]);
            REQUIRE(g.cell_time(k) == origin + Minutes{static_cast<long>(k + 1) * step});
        }
    }
}

TEST_CASE("resampling gridded data is idempotent") {
    Rng rng(99);
    const Timestamp origin = at("2016-10-01T00:00Z");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.index(100);
        auto g = testing::grid_of(n, [&](std::size_t) -> std::optional<double> {
            return rng.index(4) == 0 ? std::nullopt : std::optional<double>(rng.uniform(0.0, 100.0));
        });
        g.cells.back() = 1.0;
        // Inside its own interval: one minute before the stamp.
        SensorSeries inside{"T101", Chamber::B100, {}}, literal{"T101", Chamber::B100, {}};
        for (std::size_t k = 0; k < n; ++k) {
            if (!g.cells[k]) continue;
            inside.readings.push_back({g.cell_time(k) - Minutes{1}, *g.cells[k]});
            literal.readings.push_back({g.cell_time(k), *g.cells[k]});
        }
        const auto again = resample_last(inside, g.step, origin, n);
        REQUIRE(again.cells == g.cells);
        // Stamped exactly at the interval end, each value moves to the next cell.
        const auto shifted = resample_last(literal, g.step, origin, n + 1);
        REQUIRE_FALSE(shifted.cells[0].has_value());
        for (std::size_t k = 0; k < n; ++k) REQUIRE(shifted.cells[k + 1] == g.cells[k]);
    }
}

TEST_CASE("split_by_time examples") {
    auto ds = testing::dataset_of({testing::grid_of(10, [](std::size_t k) { return std::optional<double>(k); })});
    const Timestamp cell7 = ds.series[0].cell_time(6);
    const auto [train, test] = split_by_time(ds, {cell7 + Minutes{5}});
    CHECK(train.n_cells == 7);
    CHECK(test.n_cells == 3);
    CHECK(test.series[0].cell_time(0) == ds.series[0].cell_time(7));
    CHECK(train.series[0].cells[6] == 6.0);
    CHECK(test.series[0].cells[0] == 7.0);

    const auto [on_train, on_test] = split_by_time(ds, {cell7});
    CHECK(on_train.n_cells == 7);  // a cell stamped at the boundary stays in train
    CHECK(on_test.n_cells == 3);

    CHECK_THROWS_AS(split_by_time(ds, {ds.origin}), SplitError);
    CHECK_THROWS_AS(split_by_time(ds, {ds.series[0].cell_time(9)}), SplitError);
}

TEST_CASE("split partitions every cell without changing values") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.index(60);
        auto ds = testing::dataset_of({testing::grid_of(n, [&](std::size_t) -> std::optional<double> {
            return rng.index(5) == 0 ? std::nullopt : std::optional<double>(rng.uniform());
        })});
        const std::size_t cut = rng.index(n - 1);
        const Timestamp boundary = ds.series[0].cell_time(cut) + Minutes{static_cast<long>(rng.index(15))};
        const auto [train, test] = split_by_time(ds, {boundary});
        REQUIRE(train.n_cells + test.n_cells == n);
        auto joined = train.series[0].cells;
        joined.insert(joined.end(), test.series[0].cells.begin(), test.series[0].cells.end());
        REQUIRE(joined == ds.series[0].cells);
        REQUIRE(train.series[0].cell_time(train.n_cells - 1) <= boundary);
        REQUIRE(test.series[0].cell_time(0) > boundary);
    }
}

TEST_CASE("prepare cleans, aligns and counts") {
    std::string text = "timestamp,sensor_id,value\n";
    const Timestamp start = at("2016-10-01T00:07Z");
    for (int m = 0; m < 300; ++m) {
        text += format_timestamp(start + Minutes{m}) + ",T101," + (m >= 100 && m < 180 ? "2" : "50") + "\n";
        if (m < 10) text += format_timestamp(start + Minutes{m}) + ",T201,7\n";
    }
    std::istringstream in(text);
    const auto ingested = ingest_csv(in, two_sensor_map());
    CleaningOptions opt;
    opt.min_points = 100;
    opt.default_low_value = 5.0;
    const auto ds = prepare(ingested, opt);
    CHECK(ds.origin == at("2016-10-01T00:00Z"));
    REQUIRE(ds.series.size() == 1);
    CHECK(ds.provenance.sensors_dropped == 1);
    CHECK(ds.provenance.readings_inactive == 80);
    CHECK(ds.n_cells == ds.series[0].cells.size());
    CHECK(ds.provenance.cells_total == ds.n_cells);
    CHECK(ds.provenance.cells_present == ds.series[0].present_count());
    // 01:47 .. 03:06 removed: cells stamped 02:00 ... 03:00 are empty.
    CHECK_FALSE(ds.series[0].cells[*ds.series[0].index_of(at("2016-10-01T02:15Z"))].has_value());
    CHECK(ds.series[0].cells[*ds.series[0].index_of(at("2016-10-01T01:45Z"))] == 50.0);
}

TEST_CASE("prepared dataset round trip") {
    Rng rng(8);
    auto a = testing::grid_of(40, [&](std::size_t k) -> std::optional<double> {
        return k % 7 == 3 ? std::nullopt : std::optional<double>(rng.uniform(-1e3, 1e3));
    });
    auto b = a;
    b.sensor_id = "S2";
    b.chamber = Chamber::B200;
    auto ds = testing::dataset_of({a, b});
    ds.boundary = a.cell_time(20);
    ds.provenance.rows_parsed = 12;
    std::stringstream data, meta;
    write_prepared(ds, data, meta, Stamp{"abc", 3});
    const auto back = read_prepared(data, meta);
    CHECK(back.origin == ds.origin);
    CHECK(back.n_cells == ds.n_cells);
    CHECK(back.boundary == ds.boundary);
    CHECK(back.provenance.rows_parsed == 12);
    REQUIRE(back.series.size() == 2);
    CHECK(back.series[1].chamber == Chamber::B200);
    CHECK(back.series[0].cells == a.cells);
    CHECK(back.find("S2").cells == b.cells);
    CHECK_THROWS_AS(back.find("nope"), LookupError);
}

}
