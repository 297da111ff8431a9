#include "plantcast/synth.hpp"

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

namespace plantcast::synth {

using timeseries::Chamber;

void SynthConfig::validate() const {
    std::string problems;
    auto bad = [&](const char* what) { problems += std::string(" ") + what + ";"; };
    if (days <= 0) bad("days must be > 0");
    if (sensors_b100 + sensors_b200 == 0) bad("at least one sensor is required");
    if (!(base_level_min <= base_level_max)) bad("base_level_min must not exceed base_level_max");
    if (!(noise_scale_min >= 0.0 && noise_scale_min <= noise_scale_max)) bad("noise scales must satisfy 0 <= min <= max");
    if (!(signal_scale_min >= 0.0 && signal_scale_min <= signal_scale_max)) bad("signal scales must satisfy 0 <= min <= max");
    if (!(mean_reversion > 0.0 && mean_reversion <= 0.2)) bad("mean_reversion must be in (0, 0.2]");
    if (!(latent_mean_reversion > 0.0 && latent_mean_reversion <= 0.2)) bad("latent_mean_reversion must be in (0, 0.2]");
    if (!(latent_share >= 0.0 && latent_share <= 1.0)) bad("latent_share must be in [0, 1]");
    if (!(gap_rate >= 0.0 && gap_rate < 1.0)) bad("gap_rate must be in [0, 1)");
    if (inactivity.count > 0 && inactivity.length_minutes < 2) bad("inactivity length must be >= 2");
    if (!std::isfinite(inactivity.low_level)) bad("inactivity low_level must be finite");
    if (!std::isfinite(regimes.magnitude)) bad("regime magnitude must be finite");
    if (outages.count > 0 && outages.length_minutes == 0) bad("outage length must be > 0");
    if (days > 0 && (inactivity.count * (inactivity.length_minutes + 2) + outages.count * outages.length_minutes) * 2 >
                        total_minutes()) {
        bad("injected pathologies do not fit in the duration");
    }
    if (!problems.empty()) throw ConfigError("synth config:" + problems);
}

namespace {

struct Interval {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    bool overlaps(const Interval& o, std::size_t margin) const {
        return begin < o.end + margin && o.begin < end + margin;
    }
};

std::string sensor_name(Chamber c, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%c%02zu", c == Chamber::B100 ? '1' : '2', i + 1);
    return buf;
}

} // namespace

Manifest generate(const SynthConfig& config, std::ostream& csv) {
    config.validate();
    const std::size_t minutes = config.total_minutes();
    Rng layout(mix_seed(config.seed, 0));

    Manifest manifest;
    manifest.seed = config.seed;
    manifest.start = config.start;
    manifest.days = config.days;
    for (const auto& [chamber, count] : {std::pair{Chamber::B100, config.sensors_b100}, std::pair{Chamber::B200, config.sensors_b200}}) {
        for (std::size_t i = 0; i < count; ++i) {
            manifest.sensors.push_back({sensor_name(chamber, i), chamber,
                                        layout.uniform(config.base_level_min, config.base_level_max),
                                        layout.uniform(config.noise_scale_min, config.noise_scale_max),
                                        layout.uniform(config.signal_scale_min, config.signal_scale_max)});
        }
    }
    const std::size_t n_sensors = manifest.sensors.size();

    std::vector<Interval> outages;
    for (std::size_t o = 0; o < config.outages.count; ++o) {
        const auto len = config.outages.length_minutes;
        const std::size_t begin = layout.index(minutes - len);
        outages.push_back({begin, begin + len});
        manifest.outages.push_back({config.start + Minutes{static_cast<std::int64_t>(begin)}, len});
    }

    // Inactivity runs avoid outages and each other so every run stays contiguous in the readings.
    std::vector<std::vector<Interval>> inactive(n_sensors);
    std::vector<std::size_t> run_sensor;
    std::vector<Interval> run_interval;
    for (std::size_t r = 0; r < config.inactivity.count; ++r) {
        const auto len = config.inactivity.length_minutes;
        const std::size_t s = r % n_sensors;
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            const std::size_t begin = 1 + layout.index(minutes - len - 2);
            const Interval cand{begin, begin + len};
            const auto clash = [&](const Interval& other) { return cand.overlaps(other, 2); };
            if (std::any_of(outages.begin(), outages.end(), clash) ||
                std::any_of(inactive[s].begin(), inactive[s].end(), clash)) {
                continue;
            }
            inactive[s].push_back(cand);
            run_sensor.push_back(s);
            run_interval.push_back(cand);
            manifest.inactivity_runs.push_back({manifest.sensors[s].sensor_id,
                                                config.start + Minutes{static_cast<std::int64_t>(begin)}, len,
                                                config.inactivity.low_level, 0});
            placed = true;
        }
        if (!placed) throw ConfigError("synth config: could not place inactivity run");
    }

    struct Shift {
        std::size_t at;
        double units;
    };
    std::array<std::vector<Shift>, 2> shifts;
    for (const Chamber c : {Chamber::B100, Chamber::B200}) {
        for (std::size_t k = 0; k < config.regimes.count; ++k) {
            const std::size_t at = 1 + layout.index(minutes - 1);
            const double units = (layout.uniform() < 0.5 ? -1.0 : 1.0) * config.regimes.magnitude;
            shifts[static_cast<std::size_t>(c)].push_back({at, units});
            manifest.regime_changes.push_back({c, config.start + Minutes{static_cast<std::int64_t>(at)}, units});
        }
    }

    // Shared drivers per chamber, each sensor loading on them with its own weights.
    const std::size_t n_latent = config.latent_drivers;
    std::array<std::vector<double>, 2> latent;
    std::array<Rng, 2> latent_rng{Rng(mix_seed(config.seed, 1)), Rng(mix_seed(config.seed, 2))};
    for (auto c = 0u; c < 2; ++c) {
        latent[c].resize(n_latent);
        for (auto& z : latent[c]) z = latent_rng[c].normal();
    }
    const double latent_keep = 1.0 - config.latent_mean_reversion;
    const double latent_kick = std::sqrt(1.0 - latent_keep * latent_keep);
    const double local_keep = 1.0 - config.mean_reversion;
    const double local_kick = std::sqrt(1.0 - local_keep * local_keep);
    const double latent_weight = std::sqrt(config.latent_share);
    const double local_weight = std::sqrt(1.0 - config.latent_share);

    std::vector<Rng> process_rng, gap_rng;
    std::vector<std::vector<double>> loadings(n_sensors);
    std::vector<double> local(n_sensors);
    for (std::size_t s = 0; s < n_sensors; ++s) {
        process_rng.emplace_back(mix_seed(config.seed, 100 + s));
        gap_rng.emplace_back(mix_seed(config.seed, 1000 + s));
        double norm = 0.0;
        loadings[s].resize(n_latent);
        for (auto& l : loadings[s]) {
            l = process_rng[s].normal();
            norm += l * l;
        }
        for (auto& l : loadings[s]) l = norm > 0.0 ? l / std::sqrt(norm) : 0.0;
        local[s] = process_rng[s].normal();
    }

    std::vector<std::size_t> shift_cursor(n_sensors, 0);
    std::vector<double> level_shift(n_sensors, 0.0);

    csv << "timestamp,sensor_id,value\n";
    char value_buf[48];
    for (std::size_t t = 0; t < minutes; ++t) {
        for (auto c = 0u; c < 2; ++c) {
            for (auto& z : latent[c]) z = latent_keep * z + latent_kick * latent_rng[c].normal();
        }
        const bool in_outage = std::any_of(outages.begin(), outages.end(),
                                           [&](const Interval& o) { return t >= o.begin && t < o.end; });
        const std::string stamp = format_timestamp(config.start + Minutes{static_cast<std::int64_t>(t)});
        for (std::size_t s = 0; s < n_sensors; ++s) {
            const auto& profile = manifest.sensors[s];
            const auto ci = static_cast<std::size_t>(profile.chamber);
            local[s] = local_keep * local[s] + local_kick * process_rng[s].normal();
            const double noise = process_rng[s].normal();
            const bool gapped = gap_rng[s].uniform() < config.gap_rate;

            auto& cursor = shift_cursor[s];
            while (cursor < shifts[ci].size() && shifts[ci][cursor].at <= t) {
                level_shift[s] += shifts[ci][cursor].units;
                ++cursor;
            }
            double mix = 0.0;
            for (std::size_t j = 0; j < n_latent; ++j) mix += loadings[s][j] * latent[ci][j];
            double value = profile.base_level +
                           profile.signal_scale * (level_shift[s] + latent_weight * mix + local_weight * local[s]) +
                           profile.noise_scale * noise;

            std::optional<std::size_t> run;
            for (std::size_t r = 0; r < run_sensor.size(); ++r) {
                if (run_sensor[r] == s && t >= run_interval[r].begin && t < run_interval[r].end) run = r;
            }
            if (run) value = config.inactivity.low_level;

            if (in_outage) {
                continue;
            }
            if (gapped) {
                ++manifest.readings_gapped;
                continue;
            }
            if (run) ++manifest.inactivity_runs[*run].readings_present;
            std::snprintf(value_buf, sizeof value_buf, "%.3f", value);
            csv << stamp << ',' << profile.sensor_id << ',' << value_buf << '\n';
            ++manifest.rows_written;
        }
    }
    if (!csv) throw IoError("failed to write synthetic data");
    return manifest;
}

void write_chamber_map(const Manifest& manifest, std::ostream& out) {
    out << "sensor_id,chamber\n";
    for (const auto& s : manifest.sensors) out << s.sensor_id << ',' << timeseries::to_string(s.chamber) << '\n';
    if (!out) throw IoError("failed to write chamber map");
}

std::string render_manifest(const Manifest& m) {
    nlohmann::ordered_json j;
    j["format"] = "plantcast-synth-manifest-v1";
    j["seed"] = m.seed;
    j["start"] = format_timestamp(m.start);
    j["days"] = m.days;
    j["rows_written"] = m.rows_written;
    j["readings_gapped"] = m.readings_gapped;
    auto& sensors = j["sensors"] = nlohmann::ordered_json::array();
    for (const auto& s : m.sensors) {
        sensors.push_back({{"sensor_id", s.sensor_id},
                           {"chamber", timeseries::to_string(s.chamber)},
                           {"base_level", s.base_level},
                           {"noise_scale", s.noise_scale},
                           {"signal_scale", s.signal_scale}});
    }
    auto& runs = j["inactivity_runs"] = nlohmann::ordered_json::array();
    for (const auto& r : m.inactivity_runs) {
        runs.push_back({{"sensor_id", r.sensor_id},
                        {"start", format_timestamp(r.start)},
                        {"length_minutes", r.length_minutes},
                        {"level", r.level},
                        {"readings_present", r.readings_present}});
    }
    auto& regimes = j["regime_changes"] = nlohmann::ordered_json::array();
    for (const auto& r : m.regime_changes) {
        regimes.push_back({{"chamber", timeseries::to_string(r.chamber)}, {"at", format_timestamp(r.at)}, {"shift", r.shift}});
    }
    auto& outages = j["outages"] = nlohmann::ordered_json::array();
    for (const auto& o : m.outages) {
        outages.push_back({{"start", format_timestamp(o.start)}, {"length_minutes", o.length_minutes}});
    }
    return j.dump(2) + "\n";
}

} // namespace plantcast::synth
