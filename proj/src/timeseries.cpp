#include "plantcast/timeseries.hpp"

#include "plantcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace plantcast::timeseries {

std::string_view to_string(Chamber c) {
    switch (c) {
    case Chamber::B100: return "B100";
    case Chamber::B200: return "B200";
    }
    return "?";
}

std::optional<Chamber> parse_chamber(std::string_view s) {
    s = csv::trim(s);
    if (s == "B100") return Chamber::B100;
    if (s == "B200") return Chamber::B200;
    return std::nullopt;
}

std::optional<std::size_t> GridSeries::index_of(Timestamp t) const {
    const auto offset = (t - origin).count();
    const auto s = step.count();
    if (offset < s || offset % s != 0) return std::nullopt;
    const auto k = static_cast<std::size_t>(offset / s - 1);
    if (k >= cells.size()) return std::nullopt;
    return k;
}

std::size_t GridSeries::present_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
}

ChamberMap read_chamber_map(std::istream& in) {
    if (!in) throw IngestError("chamber map stream is not readable");
    ChamberMap map;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (csv::next_data_line(in, line)) {
        ++line_no;
        const auto fields = csv::split(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() == 2 && csv::trim(fields[0]) == "sensor_id" && csv::trim(fields[1]) == "chamber") {
                continue;
            }
            throw FormatError("chamber map: expected header 'sensor_id,chamber'");
        }
        if (fields.size() != 2) throw FormatError("chamber map: malformed row " + std::to_string(line_no));
        const auto chamber = parse_chamber(fields[1]);
        if (!chamber) {
            throw FormatError("chamber map: unknown chamber '" + std::string(csv::trim(fields[1])) + "'");
        }
        map.insert_or_assign(std::string(csv::trim(fields[0])), *chamber);
    }
    if (!header_seen) throw FormatError("chamber map: missing header 'sensor_id,chamber'");
    return map;
}

IngestResult ingest_csv(std::istream& source, const ChamberMap& chamber_map) {
    if (!source) throw IngestError("source stream is not readable");
    IngestResult result;
    std::string line;
    if (!csv::next_data_line(source, line)) {
        if (source.bad()) throw IngestError("read failure");
        throw FormatError("missing header 'timestamp,sensor_id,value'");
    }
    {
        const auto h = csv::split(line);
        if (h.size() != 3 || csv::trim(h[0]) != "timestamp" || csv::trim(h[1]) != "sensor_id" ||
            csv::trim(h[2]) != "value") {
            throw FormatError("missing header 'timestamp,sensor_id,value'");
        }
    }

    std::unordered_map<std::string, std::vector<Reading>> by_sensor;
    auto& stats = result.stats;
    while (csv::next_data_line(source, line)) {
        ++stats.rows_parsed;
        const auto fields = csv::split(line);
        if (fields.size() != 3) {
            ++stats.rows_skipped;
            continue;
        }
        const auto id = csv::trim(fields[1]);
        const auto t = try_parse_timestamp(csv::trim(fields[0]));
        const auto v = csv::parse_double(fields[2]);
        if (!t || !v || !std::isfinite(*v) || chamber_map.find(id) == chamber_map.end()) {
            ++stats.rows_skipped;
            continue;
        }
        by_sensor[std::string(id)].push_back({*t, *v});
    }
    if (source.bad()) throw IngestError("read failure");

    for (auto& [id, readings] : by_sensor) {
        std::stable_sort(readings.begin(), readings.end(),
                         [](const Reading& a, const Reading& b) { return a.time < b.time; });
        std::vector<Reading> unique;
        unique.reserve(readings.size());
        for (const auto& r : readings) {
            if (!unique.empty() && unique.back().time == r.time) {
                unique.back() = r;  // last occurrence wins
                ++stats.rows_duplicate;
            } else {
                unique.push_back(r);
            }
        }
        stats.rows_retained += unique.size();
        result.series.push_back({id, chamber_map.find(id)->second, std::move(unique)});
    }
    std::sort(result.series.begin(), result.series.end(),
              [](const SensorSeries& a, const SensorSeries& b) { return a.sensor_id < b.sensor_id; });
    return result;
}

std::vector<SensorSeries> filter_low_count(std::vector<SensorSeries> series_set, std::size_t min_points) {
    std::erase_if(series_set, [&](const SensorSeries& s) { return s.readings.size() < min_points; });
    return series_set;
}

SensorSeries remove_inactive_runs(const SensorSeries& series, double low_value, std::size_t run_len) {
    if (run_len < 2) throw ConfigError("inactive run length must be at least 2");
    SensorSeries out{series.sensor_id, series.chamber, {}};
    out.readings.reserve(series.readings.size());
    const auto& r = series.readings;
    std::size_t i = 0;
    while (i < r.size()) {
        std::size_t j = i + 1;
        while (j < r.size() && r[j].value == r[i].value) ++j;
        const bool inactive = r[i].value <= low_value && (j - i) >= run_len;
        if (!inactive) out.readings.insert(out.readings.end(), r.begin() + i, r.begin() + j);
        i = j;
    }
    return out;
}

Timestamp align_down(Timestamp t, Minutes step) {
    const auto m = minutes_since_epoch(t);
    const auto s = step.count();
    auto rem = m % s;
    if (rem < 0) rem += s;
    return from_epoch_minutes(m - rem);
}

namespace {

GridSeries resample_impl(const SensorSeries& series, Minutes step, Timestamp origin, std::optional<std::size_t> n_cells) {
    if (step.count() <= 0) throw AlignmentError("grid step must be positive");
    if (align_down(origin, step) != origin) throw AlignmentError("grid origin is not aligned to the step");
    if (series.readings.empty()) throw EmptySeriesError("cannot resample empty series '" + series.sensor_id + "'");
    if (series.readings.front().time < origin) {
        throw AlignmentError("series '" + series.sensor_id + "' has readings before the grid origin");
    }
    const auto s = step.count();
    const auto last_index = static_cast<std::size_t>((series.readings.back().time - origin).count() / s);
    const std::size_t count = n_cells.value_or(last_index + 1);
    if (last_index >= count) {
        throw AlignmentError("series '" + series.sensor_id + "' has readings past the grid end");
    }
    GridSeries grid{series.sensor_id, series.chamber, origin, step, std::vector<std::optional<double>>(count)};
    for (const auto& r : series.readings) {
        grid.cells[static_cast<std::size_t>((r.time - origin).count() / s)] = r.value;
    }
    return grid;
}

} // namespace

GridSeries resample_last(const SensorSeries& series, Minutes step, Timestamp origin) {
    return resample_impl(series, step, origin, std::nullopt);
}

GridSeries resample_last(const SensorSeries& series, Minutes step, Timestamp origin, std::size_t n_cells) {
    return resample_impl(series, step, origin, n_cells);
}

const GridSeries& PreparedDataset::find(std::string_view sensor_id) const {
    for (const auto& g : series) {
        if (g.sensor_id == sensor_id) return g;
    }
    throw LookupError("unknown sensor '" + std::string(sensor_id) + "'");
}

std::vector<std::string> PreparedDataset::sensors_in(Chamber c) const {
    std::vector<std::string> ids;
    for (const auto& g : series) {
        if (g.chamber == c) ids.push_back(g.sensor_id);
    }
    return ids;
}

PreparedDataset prepare(const IngestResult& ingested, const CleaningOptions& options) {
    PreparedDataset ds;
    ds.step = options.step;
    auto& prov = ds.provenance;
    prov.rows_parsed = ingested.stats.rows_parsed;
    prov.rows_retained = ingested.stats.rows_retained;
    prov.rows_skipped = ingested.stats.rows_skipped;
    prov.rows_duplicate = ingested.stats.rows_duplicate;

    auto kept = filter_low_count(ingested.series, options.min_points);
    prov.sensors_dropped = ingested.series.size() - kept.size();

    std::vector<SensorSeries> cleaned;
    for (auto& s : kept) {
        std::optional<double> low = options.default_low_value;
        if (const auto it = options.low_values.find(s.sensor_id); it != options.low_values.end()) low = it->second;
        if (low) {
            auto c = remove_inactive_runs(s, *low, options.inactive_run_length);
            prov.readings_inactive += s.readings.size() - c.readings.size();
            s = std::move(c);
        }
        if (s.readings.empty()) {
            ++prov.sensors_dropped;
            continue;
        }
        cleaned.push_back(std::move(s));
    }
    if (cleaned.empty()) return ds;

    Timestamp first = cleaned.front().readings.front().time;
    Timestamp last = cleaned.front().readings.back().time;
    for (const auto& s : cleaned) {
        first = std::min(first, s.readings.front().time);
        last = std::max(last, s.readings.back().time);
    }
    ds.origin = align_down(first, ds.step);
    ds.n_cells = static_cast<std::size_t>((last - ds.origin).count() / ds.step.count()) + 1;
    for (const auto& s : cleaned) {
        ds.series.push_back(resample_last(s, ds.step, ds.origin, ds.n_cells));
        prov.cells_present += ds.series.back().present_count();
    }
    prov.cells_total = ds.n_cells * ds.series.size();
    return ds;
}

std::pair<PreparedDataset, PreparedDataset> split_by_time(const PreparedDataset& ds, SplitSpec spec) {
    if (ds.n_cells < 2) throw SplitError("dataset has fewer than two grid cells");
    const Timestamp first = ds.origin + ds.step;
    const Timestamp last = ds.origin + ds.step * static_cast<std::int64_t>(ds.n_cells);
    if (spec.boundary < first || spec.boundary >= last) {
        throw SplitError("split boundary " + format_timestamp(spec.boundary) + " outside data range [" +
                         format_timestamp(first) + ", " + format_timestamp(last) + ")");
    }
    const auto n_train = static_cast<std::size_t>((spec.boundary - ds.origin).count() / ds.step.count());

    PreparedDataset train, test;
    for (auto* part : {&train, &test}) {
        part->step = ds.step;
        part->boundary = spec.boundary;
        part->provenance = ds.provenance;
    }
    train.origin = ds.origin;
    train.n_cells = n_train;
    test.origin = ds.origin + ds.step * static_cast<std::int64_t>(n_train);
    test.n_cells = ds.n_cells - n_train;
    for (const auto& g : ds.series) {
        GridSeries a{g.sensor_id, g.chamber, train.origin, g.step, {g.cells.begin(), g.cells.begin() + n_train}};
        GridSeries b{g.sensor_id, g.chamber, test.origin, g.step, {g.cells.begin() + n_train, g.cells.end()}};
        train.series.push_back(std::move(a));
        test.series.push_back(std::move(b));
    }
    for (auto* part : {&train, &test}) {
        part->provenance.cells_total = part->n_cells * part->series.size();
        part->provenance.cells_present = 0;
        for (const auto& g : part->series) part->provenance.cells_present += g.present_count();
    }
    return {std::move(train), std::move(test)};
}

void write_prepared(const PreparedDataset& ds, std::ostream& data, std::ostream& meta, const std::optional<Stamp>& stamp) {
    if (stamp) {
        data << stamp_line(*stamp) << '\n';
        meta << stamp_line(*stamp) << '\n';
    }
    data << "timestamp,sensor_id,value\n";
    for (std::size_t k = 0; k < ds.n_cells; ++k) {
        const auto ts = format_timestamp(ds.origin + ds.step * static_cast<std::int64_t>(k + 1));
        for (const auto& g : ds.series) {
            if (g.cells[k]) data << ts << ',' << g.sensor_id << ',' << csv::format_double(*g.cells[k]) << '\n';
        }
    }
    const auto& p = ds.provenance;
    meta << "format=plantcast-prepared-v1\n"
         << "origin=" << format_timestamp(ds.origin) << '\n'
         << "step_minutes=" << ds.step.count() << '\n'
         << "n_cells=" << ds.n_cells << '\n';
    if (ds.boundary) meta << "boundary=" << format_timestamp(*ds.boundary) << '\n';
    for (const auto& g : ds.series) meta << "sensor=" << g.sensor_id << ',' << to_string(g.chamber) << '\n';
    meta << "rows_parsed=" << p.rows_parsed << '\n'
         << "rows_retained=" << p.rows_retained << '\n'
         << "rows_skipped=" << p.rows_skipped << '\n'
         << "rows_duplicate=" << p.rows_duplicate << '\n'
         << "sensors_dropped=" << p.sensors_dropped << '\n'
         << "readings_inactive=" << p.readings_inactive << '\n'
         << "cells_total=" << p.cells_total << '\n'
         << "cells_present=" << p.cells_present << '\n';
    if (!data || !meta) throw IoError("failed to write prepared dataset");
}

PreparedDataset read_prepared(std::istream& data, std::istream& meta) {
    PreparedDataset ds;
    std::string line;
    bool have_format = false, have_origin = false;
    auto to_size = [](std::string_view key, std::string_view v) {
        const auto n = csv::parse_int(v);
        if (!n || *n < 0) throw FormatError("prepared metadata: bad value for " + std::string(key));
        return static_cast<std::size_t>(*n);
    };
    while (csv::next_data_line(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("prepared metadata: malformed line '" + line + "'");
        const std::string_view key = std::string_view(line).substr(0, eq);
        const std::string_view value = std::string_view(line).substr(eq + 1);
        auto& p = ds.provenance;
        if (key == "format") {
            if (value != "plantcast-prepared-v1") throw FormatError("prepared metadata: unsupported format");
            have_format = true;
        } else if (key == "origin") {
            ds.origin = parse_timestamp(value);
            have_origin = true;
        } else if (key == "step_minutes") {
            ds.step = Minutes{static_cast<std::int64_t>(to_size(key, value))};
        } else if (key == "n_cells") {
            ds.n_cells = to_size(key, value);
        } else if (key == "boundary") {
            ds.boundary = parse_timestamp(value);
        } else if (key == "sensor") {
            const auto f = csv::split(value);
            const auto chamber = f.size() == 2 ? parse_chamber(f[1]) : std::nullopt;
            if (!chamber) throw FormatError("prepared metadata: bad sensor line");
            ds.series.push_back({std::string(f[0]), *chamber, {}, {}, {}});
        } else if (key == "rows_parsed") {
            p.rows_parsed = to_size(key, value);
        } else if (key == "rows_retained") {
            p.rows_retained = to_size(key, value);
        } else if (key == "rows_skipped") {
            p.rows_skipped = to_size(key, value);
        } else if (key == "rows_duplicate") {
            p.rows_duplicate = to_size(key, value);
        } else if (key == "sensors_dropped") {
            p.sensors_dropped = to_size(key, value);
        } else if (key == "readings_inactive") {
            p.readings_inactive = to_size(key, value);
        } else if (key == "cells_total") {
            p.cells_total = to_size(key, value);
        } else if (key == "cells_present") {
            p.cells_present = to_size(key, value);
        } else {
            throw FormatError("prepared metadata: unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_format || !have_origin || ds.step.count() <= 0) throw FormatError("prepared metadata incomplete");
    if (align_down(ds.origin, ds.step) != ds.origin) throw FormatError("prepared metadata: origin off-step");

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        auto& g = ds.series[i];
        g.origin = ds.origin;
        g.step = ds.step;
        g.cells.assign(ds.n_cells, std::nullopt);
        index.emplace(g.sensor_id, i);
    }
    if (!csv::next_data_line(data, line) || line != "timestamp,sensor_id,value") {
        throw FormatError("prepared data: missing header");
    }
    while (csv::next_data_line(data, line)) {
        const auto f = csv::split(line);
        if (f.size() != 3) throw FormatError("prepared data: malformed row");
        const auto it = index.find(std::string(f[1]));
        if (it == index.end()) throw FormatError("prepared data: sensor not in metadata");
        auto& g = ds.series[it->second];
        const auto k = g.index_of(parse_timestamp(f[0]));
        const auto v = csv::parse_double(f[2]);
        if (!k || !v || !std::isfinite(*v)) throw FormatError("prepared data: bad row '" + line + "'");
        g.cells[*k] = *v;
    }
    return ds;
}

} // namespace plantcast::timeseries
