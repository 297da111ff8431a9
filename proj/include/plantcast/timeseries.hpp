#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/time.hpp"

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plantcast::timeseries {

inline constexpr Minutes kDefaultStep{15};

enum class Chamber { B100, B200 };

std::string_view to_string(Chamber c);
std::optional<Chamber> parse_chamber(std::string_view s);

struct Reading {
    Timestamp time;
    double value = 0.0;

    bool operator==(const Reading&) const = default;
};

// Readings are strictly increasing in time.
struct SensorSeries {
    std::string sensor_id;
    Chamber chamber = Chamber::B100;
    std::vector<Reading> readings;
};

// Regular grid. Cell k covers [origin + k*step, origin + (k+1)*step) and is
// stamped at the interval end.
struct GridSeries {
    std::string sensor_id;
    Chamber chamber = Chamber::B100;
    Timestamp origin;
    Minutes step = kDefaultStep;
    std::vector<std::optional<double>> cells;

    Timestamp cell_time(std::size_t k) const { return origin + step * static_cast<std::int64_t>(k + 1); }

    // Index of the cell stamped at `t`, or nullopt when `t` is off-grid or out of range.
    std::optional<std::size_t> index_of(Timestamp t) const;

    std::size_t present_count() const;
};

using ChamberMap = std::map<std::string, Chamber, std::less<>>;

// CSV `sensor_id,chamber`.
ChamberMap read_chamber_map(std::istream& in);

struct IngestStats {
    std::size_t rows_parsed = 0;
    std::size_t rows_retained = 0;
    std::size_t rows_skipped = 0;    // unparseable or unknown sensor
    std::size_t rows_duplicate = 0;  // superseded by a later row with the same timestamp
};

struct IngestResult {
    std::vector<SensorSeries> series;  // ordered by sensor id
    IngestStats stats;
};

// CSV `timestamp,sensor_id,value`. Bad rows are counted and skipped; a
// missing header is a FormatError, an unreadable stream an IngestError.
IngestResult ingest_csv(std::istream& source, const ChamberMap& chamber_map);

// Drops series with fewer than `min_points` readings.
std::vector<SensorSeries> filter_low_count(std::vector<SensorSeries> series_set,
                                           std::size_t min_points = 6000);

// Removes every maximal run of at least `run_len` consecutive readings that
// share one value at or below `low_value`.
SensorSeries remove_inactive_runs(const SensorSeries& series, double low_value, std::size_t run_len = 60);

// Last reading of each interval. Cells cover the span up to the last reading.
GridSeries resample_last(const SensorSeries& series, Minutes step, Timestamp origin);

// Same, with an explicit cell count; readings past the grid end are an AlignmentError.
GridSeries resample_last(const SensorSeries& series, Minutes step, Timestamp origin, std::size_t n_cells);

// Floor of `t` onto a multiple of `step` since the epoch.
Timestamp align_down(Timestamp t, Minutes step);

struct SplitSpec {
    Timestamp boundary;
};

struct Provenance {
    std::size_t rows_parsed = 0;
    std::size_t rows_retained = 0;
    std::size_t rows_skipped = 0;
    std::size_t rows_duplicate = 0;
    std::size_t sensors_dropped = 0;
    std::size_t readings_inactive = 0;
    std::size_t cells_total = 0;
    std::size_t cells_present = 0;
};

// Every series shares `origin`, `step` and cell count.
struct PreparedDataset {
    Timestamp origin;
    Minutes step = kDefaultStep;
    std::size_t n_cells = 0;
    std::optional<Timestamp> boundary;
    std::vector<GridSeries> series;
    Provenance provenance;

    const GridSeries& find(std::string_view sensor_id) const;  // LookupError if absent
    std::vector<std::string> sensors_in(Chamber c) const;
};

struct CleaningOptions {
    std::size_t min_points = 6000;
    std::size_t inactive_run_length = 60;
    std::map<std::string, double, std::less<>> low_values;
    std::optional<double> default_low_value;
    Minutes step = kDefaultStep;
};

// Low-count filter, inactivity removal, then resampling onto a shared grid.
PreparedDataset prepare(const IngestResult& ingested, const CleaningOptions& options);

// Train holds cells stamped at or before the boundary, test the rest.
std::pair<PreparedDataset, PreparedDataset> split_by_time(const PreparedDataset& ds, SplitSpec spec);

// Grid values as `timestamp,sensor_id,value` with missing cells omitted, plus a
// key=value metadata file.
void write_prepared(const PreparedDataset& ds, std::ostream& data, std::ostream& meta,
                    const std::optional<Stamp>& stamp = std::nullopt);
PreparedDataset read_prepared(std::istream& data, std::istream& meta);

} // namespace plantcast::timeseries
