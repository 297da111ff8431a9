#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/features.hpp"
#include "plantcast/gbt.hpp"
#include "plantcast/qnn.hpp"
#include "plantcast/synth.hpp"
#include "plantcast/time.hpp"
#include "plantcast/timeseries.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace plantcast::config {

enum class ModelKind { LastValue, Linear, Gbt, Qnn };

std::string_view to_string(ModelKind kind);

struct Paths {
    std::string raw = "data/raw.csv";
    std::string chamber_map = "data/chambers.csv";
    std::string workdir = "work";
};

struct RunConfig {
    std::uint64_t seed = 0;
    Paths paths;
    timeseries::CleaningOptions cleaning;
    Timestamp split_boundary =
        Timestamp{std::chrono::sys_days{std::chrono::year{2016} / 10 / 31}.time_since_epoch()};
    features::WindowSpec windows;
    std::vector<Minutes> horizons{Minutes{30}, Minutes{60}};
    std::vector<ModelKind> roster{ModelKind::LastValue, ModelKind::Linear, ModelKind::Gbt, ModelKind::Qnn};
    double ridge = 1e-8;
    gbt::GBTParams gbt;
    std::vector<Minutes> qnn_windows{Minutes{300}, Minutes{180}, Minutes{120}};
    qnn::TrainConfig qnn_train;  // the seed is derived per network from `seed`
    synth::SynthConfig synth;
    unsigned threads = 0;        // 0 picks the hardware concurrency

    // Stable hash of the normalized, defaults-applied content. The workdir and
    // thread count are excluded; they do not change results.
    std::string fingerprint;

    bool has(ModelKind kind) const;
    Stamp stamp() const { return {fingerprint, seed}; }
};

// Parses the JSON config, applies defaults and computes the fingerprint.
// ConfigError lists every violation, one per line, each naming its key.
RunConfig validate_config(std::string_view text);

// Normalized JSON of a config (sorted keys, defaults applied).
std::string normalized_json(const RunConfig& config);

// Reads and validates a config file; ConfigError naming the path if unreadable.
RunConfig load_config(const std::string& path);

} // namespace plantcast::config
