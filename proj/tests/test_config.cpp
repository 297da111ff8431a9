#include "plantcast/config.hpp"
#include "plantcast/error.hpp"

#include <doctest.h>

#include <string>

using namespace plantcast;
using namespace plantcast::config;

namespace {

std::string error_of(const std::string& text) {
    try {
        validate_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool mentions(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("minimal config applies defaults") {
    const auto c = validate_config(R"({"seed": 5})");
    CHECK(c.seed == 5);
    CHECK(c.horizons == std::vector<Minutes>{Minutes{30}, Minutes{60}});
    CHECK(c.windows.windows == std::vector<Minutes>{Minutes{30}, Minutes{45}, Minutes{75}, Minutes{120},
                                                    Minutes{180}, Minutes{240}, Minutes{300}});
    CHECK(c.roster.size() == 4);
    CHECK(c.gbt.n_trees == 300);
    CHECK(c.gbt.max_depth == 6);
    CHECK(c.gbt.learning_rate == 0.05);
    CHECK(c.gbt.min_samples_leaf == 5);
    CHECK(c.qnn_train.epochs == 200);
    CHECK(c.cleaning.min_points == 6000);
    CHECK(c.synth.seed == 5);
    CHECK(c.fingerprint.size() == 16);
    CHECK(c.stamp().seed == 5);
}

TEST_CASE("seed is mandatory") {
    CHECK(mentions(error_of("{}"), "seed"));
    CHECK(mentions(error_of(R"({"seed": -1})"), "seed"));
    CHECK(mentions(error_of("not json"), "JSON"));
}

TEST_CASE("negative learning rate names its key") {
    const auto e = error_of(R"({"seed": 1, "models": {"gbt": {"learning_rate": -0.1}}})");
    CHECK(mentions(e, "models.gbt.learning_rate"));
}

TEST_CASE("every violation is listed") {
    const auto e = error_of(R"({"seed": 1, "colour": "red",
        "models": {"gbt": {"max_depth": -2, "shrink": 1}, "roster": ["gbt", "forest"]},
        "features": {"horizons_minutes": [30, 50]}})");
    CHECK(mentions(e, "colour"));
    CHECK(mentions(e, "shrink"));
    CHECK(mentions(e, "models.gbt.max_depth"));
    CHECK(mentions(e, "forest"));
}

TEST_CASE("cross-field checks") {
    CHECK(mentions(error_of(R"({"seed": 1, "features": {"horizons_minutes": [30, 50]}})"),
                   "features.horizons_minutes"));
    CHECK(mentions(error_of(R"({"seed": 1, "models": {"qnn": {"windows_minutes": [100]}}})"),
                   "models.qnn.windows_minutes"));
    CHECK(mentions(error_of(R"({"seed": 1, "synth": {"gap_rate": 1.5}})"), "synth.gap_rate"));
    CHECK(mentions(error_of(R"({"seed": 1, "models": {"roster": ["gbt", "gbt"]}})"), "roster"));
}

TEST_CASE("fingerprint ignores key order, workdir and threads but not content") {
    const auto a = validate_config(R"({"seed": 2, "models": {"gbt": {"n_trees": 10, "max_depth": 3}},
                                       "paths": {"workdir": "w1"}})");
    const auto b = validate_config(R"({"paths": {"workdir": "elsewhere"}, "runtime": {"threads": 4},
                                       "models": {"gbt": {"max_depth": 3, "n_trees": 10}}, "seed": 2})");
    CHECK(a.fingerprint == b.fingerprint);
    const auto c = validate_config(R"({"seed": 2, "models": {"gbt": {"n_trees": 11, "max_depth": 3}}})");
    CHECK(c.fingerprint != a.fingerprint);
    const auto d = validate_config(R"({"seed": 3, "models": {"gbt": {"n_trees": 10, "max_depth": 3}}})");
    CHECK(d.fingerprint != a.fingerprint);
    CHECK(normalized_json(a) != normalized_json(b));
}

TEST_CASE("unreadable config file is a config error naming the path") {
    try {
        load_config("/nonexistent/plant.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(mentions(e.what(), "/nonexistent/plant.json"));
    }
}

}
