#pragma once

#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace plantcast::synth {

struct InactivitySpec {
    std::size_t count = 2;             // runs per dataset, spread over sensors
    std::size_t length_minutes = 90;
    double low_level = 5.0;
};

struct RegimeSpec {
    std::size_t count = 1;             // level shifts per chamber
    double magnitude = 1.5;            // in units of each sensor's signal scale
};

struct OutageSpec {
    std::size_t count = 2;             // plant-wide periods without readings
    std::size_t length_minutes = 720;
};

// Defaults are the desk-scale plant used by the acceptance run.
struct SynthConfig {
    std::uint64_t seed = 7;
    Timestamp start = Timestamp{std::chrono::sys_days{std::chrono::year{2016} / 9 / 11}.time_since_epoch()};
    int days = 60;
    std::size_t sensors_b100 = 4;
    std::size_t sensors_b200 = 6;
    double base_level_min = 60.0;
    double base_level_max = 300.0;
    double noise_scale_min = 2.5;      // white measurement noise, standard deviation
    double noise_scale_max = 4.5;
    double signal_scale_min = 3.0;     // standard deviation of the process around its level
    double signal_scale_max = 6.0;
    double mean_reversion = 0.02;      // per minute, sensor-local component; valid range (0, 0.2]
    double latent_mean_reversion = 0.005;  // per minute, shared drivers; valid range (0, 0.2]
    double latent_share = 0.7;         // fraction of process variance from the shared drivers
    std::size_t latent_drivers = 2;
    double gap_rate = 0.02;
    InactivitySpec inactivity;
    RegimeSpec regimes;
    OutageSpec outages;

    // ConfigError listing every violation.
    void validate() const;
    std::size_t total_minutes() const { return static_cast<std::size_t>(days) * 1440; }
};

struct SensorProfile {
    std::string sensor_id;
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    double base_level = 0.0;
    double noise_scale = 0.0;
    double signal_scale = 0.0;
};

struct InactivityRun {
    std::string sensor_id;
    Timestamp start;
    std::size_t length_minutes = 0;
    double level = 0.0;
    std::size_t readings_present = 0;  // readings that survived gap deletion
};

struct RegimeChange {
    timeseries::Chamber chamber = timeseries::Chamber::B100;
    Timestamp at;
    double shift = 0.0;                // multiplied by each sensor's signal scale
};

struct Outage {
    Timestamp start;
    std::size_t length_minutes = 0;
};

// Ground truth of what was injected.
struct Manifest {
    std::uint64_t seed = 0;
    Timestamp start;
    int days = 0;
    std::vector<SensorProfile> sensors;
    std::vector<InactivityRun> inactivity_runs;
    std::vector<RegimeChange> regime_changes;
    std::vector<Outage> outages;
    std::size_t rows_written = 0;
    std::size_t readings_gapped = 0;   // deleted by the random gap process
};

// Writes per-minute readings as `timestamp,sensor_id,value`, time-major.
Manifest generate(const SynthConfig& config, std::ostream& csv);

// `sensor_id,chamber` for the generated sensors.
void write_chamber_map(const Manifest& manifest, std::ostream& out);

// JSON rendering of the manifest.
std::string render_manifest(const Manifest& manifest);

} // namespace plantcast::synth
