#pragma once

#include "plantcast/config.hpp"
#include "plantcast/rng.hpp"
#include "plantcast/synth.hpp"
#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace testing {

inline plantcast::Timestamp at(const char* text) { return plantcast::parse_timestamp(text); }

// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::path(PLANTCAST_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Complete 15-minute grid whose cell k holds f(k).
template <typename F>
plantcast::timeseries::GridSeries grid_of(std::size_t n, F f, const char* origin = "2016-10-01T00:00Z") {
    plantcast::timeseries::GridSeries g{"S1", plantcast::timeseries::Chamber::B100, at(origin),
                                        plantcast::timeseries::kDefaultStep, {}};
    for (std::size_t k = 0; k < n; ++k) g.cells.push_back(f(k));
    return g;
}

inline plantcast::timeseries::PreparedDataset dataset_of(std::vector<plantcast::timeseries::GridSeries> series) {
    plantcast::timeseries::PreparedDataset ds;
    ds.origin = series.front().origin;
    ds.step = series.front().step;
    ds.n_cells = series.front().cells.size();
    ds.series = std::move(series);
    return ds;
}

// Config text for a four-day plant under `dir`; `models` is the JSON body of
// the "models" object.
inline std::string small_plant_json(const std::filesystem::path& dir, const std::string& models,
                                    std::uint64_t seed = 3) {
    return R"({"seed": )" + std::to_string(seed) + R"(,
  "paths": {"raw": ")" + (dir / "raw.csv").string() + R"(", "chamber_map": ")" + (dir / "chambers.csv").string() +
           R"(", "workdir": ")" + (dir / "work").string() + R"("},
  "cleaning": {"min_points": 1000, "default_low_value": 10},
  "split": {"boundary": "2016-09-14T00:00:00Z"},
  "models": {)" + models + R"(},
  "synth": {"days": 4, "sensors_b100": 2, "sensors_b200": 3},
  "runtime": {"threads": 2}})";
}

inline const char* kSmallModels =
    R"("gbt": {"n_trees": 20, "max_depth": 3}, "qnn": {"windows_minutes": [120, 60], "epochs": 5})";

// Validated config whose raw data and chamber map have been generated.
inline plantcast::config::RunConfig small_plant(const std::string& name, const std::string& models = kSmallModels,
                                                std::uint64_t seed = 3) {
    const auto dir = scratch(name);
    auto cfg = plantcast::config::validate_config(small_plant_json(dir, models, seed));
    std::ofstream raw(cfg.paths.raw), map(cfg.paths.chamber_map);
    const auto manifest = plantcast::synth::generate(cfg.synth, raw);
    plantcast::synth::write_chamber_map(manifest, map);
    return cfg;
}

} // namespace testing
