#include "plantcast/config.hpp"

#include "plantcast/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace plantcast::config {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::LastValue: return "last_value";
    case ModelKind::Linear: return "linear";
    case ModelKind::Gbt: return "gbt";
    case ModelKind::Qnn: return "qnn";
    }
    return "?";
}

bool RunConfig::has(ModelKind kind) const { return std::find(roster.begin(), roster.end(), kind) != roster.end(); }

namespace {

// Walks the document, collecting every violation instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    // Checks `value` is an object whose keys are all in `allowed`.
    bool object(const json& value, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!value.is_object()) {
            fail(path.empty() ? "(root)" : path, "must be an object");
            return false;
        }
        for (const auto& [key, _] : value.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                fail(join(path, key), "unknown key");
            }
        }
        return true;
    }

    const json* child(const json& parent, std::string_view key) {
        const auto it = parent.find(std::string(key));
        return it == parent.end() ? nullptr : &*it;
    }

    void number(const json& parent, const std::string& path, std::string_view key, double& out,
                const std::function<bool(double)>& ok, std::string_view requirement) {
        const json* v = child(parent, key);
        if (!v) return;
        if (!v->is_number()) return fail(join(path, key), "must be a number");
        const double d = v->get<double>();
        if (!std::isfinite(d) || !ok(d)) return fail(join(path, key), std::string(requirement));
        out = d;
    }

    template <typename Int>
    void integer(const json& parent, const std::string& path, std::string_view key, Int& out, long long lo,
                 long long hi) {
        const json* v = child(parent, key);
        if (!v) return;
        if (!v->is_number_integer()) return fail(join(path, key), "must be an integer");
        const auto i = v->get<long long>();
        if (i < lo || i > hi) {
            return fail(join(path, key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        out = static_cast<Int>(i);
    }

    void string(const json& parent, const std::string& path, std::string_view key, std::string& out) {
        const json* v = child(parent, key);
        if (!v) return;
        if (!v->is_string() || v->get<std::string>().empty()) return fail(join(path, key), "must be a non-empty string");
        out = v->get<std::string>();
    }

    void timestamp(const json& parent, const std::string& path, std::string_view key, Timestamp& out) {
        const json* v = child(parent, key);
        if (!v) return;
        const auto t = v->is_string() ? try_parse_timestamp(v->get<std::string>()) : std::nullopt;
        if (!t) return fail(join(path, key), "must be an ISO-8601 UTC timestamp");
        out = *t;
    }

    void minutes_list(const json& parent, const std::string& path, std::string_view key, std::vector<Minutes>& out) {
        const json* v = child(parent, key);
        if (!v) return;
        if (!v->is_array() || v->empty()) return fail(join(path, key), "must be a non-empty array of minutes");
        std::vector<Minutes> list;
        for (const auto& e : *v) {
            if (!e.is_number_integer() || e.get<long long>() <= 0) {
                return fail(join(path, key), "entries must be positive integers");
            }
            list.emplace_back(e.get<long long>());
        }
        out = std::move(list);
    }

    void fail(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

    static std::string join(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : path + "." + std::string(key);
    }
};

bool positive(double v) { return v > 0.0; }
bool non_negative(double v) { return v >= 0.0; }
bool any_value(double) { return true; }

json to_minutes_json(const std::vector<Minutes>& list) {
    json a = json::array();
    for (const auto m : list) a.push_back(m.count());
    return a;
}

json normalized(const RunConfig& c, bool include_runtime) {
    json j;
    j["seed"] = c.seed;
    j["paths"] = {{"raw", c.paths.raw}, {"chamber_map", c.paths.chamber_map}};
    if (include_runtime) {
        j["paths"]["workdir"] = c.paths.workdir;
        j["runtime"] = {{"threads", c.threads}};
    }
    json low = json::object();
    for (const auto& [id, v] : c.cleaning.low_values) low[id] = v;
    j["cleaning"] = {{"min_points", c.cleaning.min_points},
                     {"inactive_run_length", c.cleaning.inactive_run_length},
                     {"default_low_value", c.cleaning.default_low_value ? json(*c.cleaning.default_low_value) : json()},
                     {"low_values", low}};
    j["grid"] = {{"step_minutes", c.cleaning.step.count()}};
    j["split"] = {{"boundary", format_timestamp(c.split_boundary)}};
    j["features"] = {{"windows_minutes", to_minutes_json(c.windows.windows)},
                     {"horizons_minutes", to_minutes_json(c.horizons)}};
    json roster = json::array();
    for (const auto k : c.roster) roster.push_back(std::string(to_string(k)));
    j["models"] = {{"roster", roster},
                   {"linear", {{"ridge", c.ridge}}},
                   {"gbt",
                    {{"n_trees", c.gbt.n_trees},
                     {"max_depth", c.gbt.max_depth},
                     {"learning_rate", c.gbt.learning_rate},
                     {"min_samples_leaf", c.gbt.min_samples_leaf}}},
                   {"qnn",
                    {{"windows_minutes", to_minutes_json(c.qnn_windows)},
                     {"epochs", c.qnn_train.epochs},
                     {"batch_size", c.qnn_train.batch_size},
                     {"step_size", c.qnn_train.step_size}}}};
    const auto& s = c.synth;
    j["synth"] = {{"start", format_timestamp(s.start)},
                  {"days", s.days},
                  {"sensors_b100", s.sensors_b100},
                  {"sensors_b200", s.sensors_b200},
                  {"base_level_min", s.base_level_min},
                  {"base_level_max", s.base_level_max},
                  {"noise_scale_min", s.noise_scale_min},
                  {"noise_scale_max", s.noise_scale_max},
                  {"signal_scale_min", s.signal_scale_min},
                  {"signal_scale_max", s.signal_scale_max},
                  {"mean_reversion", s.mean_reversion},
                  {"latent_mean_reversion", s.latent_mean_reversion},
                  {"latent_share", s.latent_share},
                  {"latent_drivers", s.latent_drivers},
                  {"gap_rate", s.gap_rate},
                  {"inactivity",
                   {{"count", s.inactivity.count},
                    {"length_minutes", s.inactivity.length_minutes},
                    {"low_level", s.inactivity.low_level}}},
                  {"regimes", {{"count", s.regimes.count}, {"magnitude", s.regimes.magnitude}}},
                  {"outages", {{"count", s.outages.count}, {"length_minutes", s.outages.length_minutes}}}};
    return j;
}

} // namespace

std::string normalized_json(const RunConfig& config) { return normalized(config, true).dump(); }

RunConfig validate_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig c;
    Reader r;
    constexpr long long kBig = std::numeric_limits<int>::max();
    if (r.object(doc, "", {"seed", "paths", "cleaning", "grid", "split", "features", "models", "synth", "runtime"})) {
        if (const json* seed = r.child(doc, "seed"); !seed) {
            r.fail("seed", "is required");
        } else if (!seed->is_number_unsigned()) {
            r.fail("seed", "must be a non-negative integer");
        } else {
            c.seed = seed->get<std::uint64_t>();
        }

        if (const json* p = r.child(doc, "paths"); p && r.object(*p, "paths", {"raw", "chamber_map", "workdir"})) {
            r.string(*p, "paths", "raw", c.paths.raw);
            r.string(*p, "paths", "chamber_map", c.paths.chamber_map);
            r.string(*p, "paths", "workdir", c.paths.workdir);
        }

        if (const json* cl = r.child(doc, "cleaning");
            cl && r.object(*cl, "cleaning", {"min_points", "inactive_run_length", "default_low_value", "low_values"})) {
            r.integer(*cl, "cleaning", "min_points", c.cleaning.min_points, 0, kBig);
            r.integer(*cl, "cleaning", "inactive_run_length", c.cleaning.inactive_run_length, 2, kBig);
            if (const json* d = r.child(*cl, "default_low_value"); d && !d->is_null()) {
                double v = 0.0;
                r.number(*cl, "cleaning", "default_low_value", v, any_value, "must be finite");
                if (d->is_number() && std::isfinite(d->get<double>())) c.cleaning.default_low_value = v;
            }
            if (const json* lv = r.child(*cl, "low_values")) {
                if (!lv->is_object()) {
                    r.fail("cleaning.low_values", "must be an object of sensor -> value");
                } else {
                    for (const auto& [id, v] : lv->items()) {
                        if (!v.is_number() || !std::isfinite(v.get<double>())) {
                            r.fail("cleaning.low_values." + id, "must be a finite number");
                        } else {
                            c.cleaning.low_values[id] = v.get<double>();
                        }
                    }
                }
            }
        }

        if (const json* g = r.child(doc, "grid"); g && r.object(*g, "grid", {"step_minutes"})) {
            long long step = c.cleaning.step.count();
            r.integer(*g, "grid", "step_minutes", step, 1, 1440);
            c.cleaning.step = Minutes{step};
        }

        if (const json* s = r.child(doc, "split"); s && r.object(*s, "split", {"boundary"})) {
            r.timestamp(*s, "split", "boundary", c.split_boundary);
        }

        if (const json* f = r.child(doc, "features"); f && r.object(*f, "features", {"windows_minutes", "horizons_minutes"})) {
            r.minutes_list(*f, "features", "windows_minutes", c.windows.windows);
            r.minutes_list(*f, "features", "horizons_minutes", c.horizons);
        }

        if (const json* m = r.child(doc, "models"); m && r.object(*m, "models", {"roster", "linear", "gbt", "qnn"})) {
            if (const json* roster = r.child(*m, "roster")) {
                if (!roster->is_array()) {
                    r.fail("models.roster", "must be an array");
                } else {
                    c.roster.clear();
                    for (const auto& e : *roster) {
                        const std::string name = e.is_string() ? e.get<std::string>() : "";
                        std::optional<ModelKind> kind;
                        for (const auto k : {ModelKind::LastValue, ModelKind::Linear, ModelKind::Gbt, ModelKind::Qnn}) {
                            if (name == to_string(k)) kind = k;
                        }
                        if (!kind) {
                            r.fail("models.roster", "unknown model '" + name + "'");
                        } else if (c.has(*kind)) {
                            r.fail("models.roster", "duplicate model '" + name + "'");
                        } else {
                            c.roster.push_back(*kind);
                        }
                    }
                }
            }
            if (const json* l = r.child(*m, "linear"); l && r.object(*l, "models.linear", {"ridge"})) {
                r.number(*l, "models.linear", "ridge", c.ridge, non_negative, "must be >= 0");
            }
            if (const json* g = r.child(*m, "gbt");
                g && r.object(*g, "models.gbt", {"n_trees", "max_depth", "learning_rate", "min_samples_leaf"})) {
                r.integer(*g, "models.gbt", "n_trees", c.gbt.n_trees, 0, 100000);
                r.integer(*g, "models.gbt", "max_depth", c.gbt.max_depth, 0, 32);
                r.number(*g, "models.gbt", "learning_rate", c.gbt.learning_rate,
                         [](double v) { return v > 0.0 && v <= 1.0; }, "must be in (0, 1]");
                r.integer(*g, "models.gbt", "min_samples_leaf", c.gbt.min_samples_leaf, 1, kBig);
            }
            if (const json* q = r.child(*m, "qnn");
                q && r.object(*q, "models.qnn", {"windows_minutes", "epochs", "batch_size", "step_size"})) {
                r.minutes_list(*q, "models.qnn", "windows_minutes", c.qnn_windows);
                r.integer(*q, "models.qnn", "epochs", c.qnn_train.epochs, 1, 1000000);
                r.integer(*q, "models.qnn", "batch_size", c.qnn_train.batch_size, 1, kBig);
                r.number(*q, "models.qnn", "step_size", c.qnn_train.step_size, positive, "must be > 0");
            }
        }

        if (const json* s = r.child(doc, "synth");
            s && r.object(*s, "synth",
                          {"start", "days", "sensors_b100", "sensors_b200", "base_level_min", "base_level_max",
                           "noise_scale_min", "noise_scale_max", "signal_scale_min", "signal_scale_max",
                           "mean_reversion", "latent_mean_reversion", "latent_share", "latent_drivers", "gap_rate",
                           "inactivity", "regimes", "outages"})) {
            auto& sy = c.synth;
            r.timestamp(*s, "synth", "start", sy.start);
            r.integer(*s, "synth", "days", sy.days, 1, 3660);
            r.integer(*s, "synth", "sensors_b100", sy.sensors_b100, 0, 1000);
            r.integer(*s, "synth", "sensors_b200", sy.sensors_b200, 0, 1000);
            r.number(*s, "synth", "base_level_min", sy.base_level_min, any_value, "must be finite");
            r.number(*s, "synth", "base_level_max", sy.base_level_max, any_value, "must be finite");
            r.number(*s, "synth", "noise_scale_min", sy.noise_scale_min, non_negative, "must be >= 0");
            r.number(*s, "synth", "noise_scale_max", sy.noise_scale_max, non_negative, "must be >= 0");
            r.number(*s, "synth", "signal_scale_min", sy.signal_scale_min, non_negative, "must be >= 0");
            r.number(*s, "synth", "signal_scale_max", sy.signal_scale_max, non_negative, "must be >= 0");
            const auto rate = [](double v) { return v > 0.0 && v <= 0.2; };
            r.number(*s, "synth", "mean_reversion", sy.mean_reversion, rate, "must be in (0, 0.2]");
            r.number(*s, "synth", "latent_mean_reversion", sy.latent_mean_reversion, rate, "must be in (0, 0.2]");
            r.number(*s, "synth", "latent_share", sy.latent_share, [](double v) { return v >= 0.0 && v <= 1.0; },
                     "must be in [0, 1]");
            r.integer(*s, "synth", "latent_drivers", sy.latent_drivers, 0, 64);
            r.number(*s, "synth", "gap_rate", sy.gap_rate, [](double v) { return v >= 0.0 && v < 1.0; },
                     "must be in [0, 1)");
            if (const json* i = r.child(*s, "inactivity");
                i && r.object(*i, "synth.inactivity", {"count", "length_minutes", "low_level"})) {
                r.integer(*i, "synth.inactivity", "count", sy.inactivity.count, 0, 10000);
                r.integer(*i, "synth.inactivity", "length_minutes", sy.inactivity.length_minutes, 2, kBig);
                r.number(*i, "synth.inactivity", "low_level", sy.inactivity.low_level, any_value, "must be finite");
            }
            if (const json* g = r.child(*s, "regimes"); g && r.object(*g, "synth.regimes", {"count", "magnitude"})) {
                r.integer(*g, "synth.regimes", "count", sy.regimes.count, 0, 10000);
                r.number(*g, "synth.regimes", "magnitude", sy.regimes.magnitude, any_value, "must be finite");
            }
            if (const json* o = r.child(*s, "outages"); o && r.object(*o, "synth.outages", {"count", "length_minutes"})) {
                r.integer(*o, "synth.outages", "count", sy.outages.count, 0, 10000);
                r.integer(*o, "synth.outages", "length_minutes", sy.outages.length_minutes, 1, kBig);
            }
        }

        if (const json* rt = r.child(doc, "runtime"); rt && r.object(*rt, "runtime", {"threads"})) {
            r.integer(*rt, "runtime", "threads", c.threads, 0, 1024);
        }
    }

    // Cross-field checks.
    if (r.errors.empty()) {
        c.synth.seed = c.seed;
        auto capture = [&](const std::string& key, const std::function<void()>& check) {
            try {
                check();
            } catch (const ConfigError& e) {
                r.fail(key, e.what());
            }
        };
        capture("features.windows_minutes", [&] { c.windows.validate(c.cleaning.step); });
        for (const auto h : c.horizons) {
            if (h.count() % c.cleaning.step.count() != 0) {
                r.fail("features.horizons_minutes", "must be multiples of grid.step_minutes");
            }
        }
        for (const auto w : c.qnn_windows) {
            if (w.count() % c.cleaning.step.count() != 0) {
                r.fail("models.qnn.windows_minutes", "must be multiples of grid.step_minutes");
            }
        }
        capture("synth", [&] { c.synth.validate(); });
    }

    if (!r.errors.empty()) {
        std::string message = "invalid config:";
        for (const auto& e : r.errors) message += "\n  " + e;
        throw ConfigError(message);
    }
    c.fingerprint = csv::hex64(csv::fnv1a(normalized(c, false).dump()));
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return validate_config(text.str());
}

} // namespace plantcast::config
