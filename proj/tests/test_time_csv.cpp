#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"
#include "plantcast/time.hpp"

#include <doctest.h>

#include <cstring>
#include <sstream>

using namespace plantcast;

TEST_SUITE("time_csv") {

TEST_CASE("timestamp formats accepted on input") {
    const auto t = parse_timestamp("2016-10-31T00:15:00Z");
    CHECK(format_timestamp(t) == "2016-10-31T00:15:00Z");
    CHECK(parse_timestamp("2016-10-31 00:15") == t);
    CHECK(parse_timestamp("2016-10-31T00:15:59.999") == t);  // seconds are floored
    CHECK(parse_timestamp("2016-10-31T00:15:00+00:00") == t);
    CHECK(parse_timestamp("2016-10-31T00:15:00+0000") == t);
    CHECK(minutes_since_epoch(parse_timestamp("1970-01-01T00:01Z")) == 1);
}

TEST_CASE("malformed or non-UTC timestamps are rejected") {
    for (const char* bad : {"", "2016-10-31", "2016-13-01T00:00", "2016-02-30T00:00", "2016-10-31T24:00",
                            "2016-10-31T00:60", "2016-10-31T00:00+01:00", "yesterday", "2016-10-31T00:00Zjunk"}) {
        CAPTURE(bad);
        CHECK_FALSE(try_parse_timestamp(bad).has_value());
    }
    CHECK_THROWS_AS(parse_timestamp("nope"), FormatError);
}

TEST_CASE("timestamp round trip over random minutes") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto t = from_epoch_minutes(static_cast<std::int64_t>(rng.index(60ULL * 24 * 365 * 80)));
        REQUIRE(parse_timestamp(format_timestamp(t)) == t);
    }
}

TEST_CASE("csv field helpers") {
    const auto f = csv::split("a, b ,,c");
    REQUIRE(f.size() == 4);
    CHECK(csv::trim(f[1]) == "b");
    CHECK(f[2].empty());
    CHECK(csv::parse_double(" 2.5 ") == doctest::Approx(2.5));
    CHECK(csv::parse_double("+1e3") == doctest::Approx(1000.0));
    CHECK_FALSE(csv::parse_double("1.0x").has_value());
    CHECK_FALSE(csv::parse_double("").has_value());
    CHECK(csv::parse_int("-42") == -42);
    CHECK_FALSE(csv::parse_int("4.2").has_value());
    CHECK(csv::format_fixed(16.90301, 4) == "16.9030");
    CHECK(csv::format_fixed(0.00005, 4) == "0.0001");
}

TEST_CASE("shortest double formatting reloads bit-exactly") {
    Rng rng(5);
    for (int i = 0; i < 5000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.index(40)) - 20.0);
        const auto back = csv::parse_double(csv::format_double(v));
        REQUIRE(back.has_value());
        REQUIRE(std::memcmp(&*back, &v, sizeof v) == 0);
    }
}

TEST_CASE("data lines skip comments and blanks") {
    std::istringstream in("# header comment\n\nx,y\r\n  \n# more\n1,2\n");
    std::string line;
    REQUIRE(csv::next_data_line(in, line));
    CHECK(line == "x,y");
    REQUIRE(csv::next_data_line(in, line));
    CHECK(line == "1,2");
    CHECK_FALSE(csv::next_data_line(in, line));
}

TEST_CASE("stamp line round trip and peek rewinds") {
    const Stamp s{"00ff00ff00ff00ff", 7};
    CHECK(parse_stamp_line(stamp_line(s)) == s);
    CHECK_FALSE(parse_stamp_line("# something else").has_value());
    std::istringstream in(stamp_line(s) + "\nbody\n");
    CHECK(peek_stamp(in) == s);
    std::string first;
    std::getline(in, first);
    CHECK(first == stamp_line(s));
    std::istringstream plain("no stamp\n");
    CHECK_FALSE(peek_stamp(plain).has_value());
    std::getline(plain, first);
    CHECK(first == "no stamp");
}

TEST_CASE("fnv1a matches published test vectors") {
    CHECK(csv::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(csv::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(csv::hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("rng draws are in range and reproducible") {
    Rng a(3), b(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(u == b.uniform());
        REQUIRE(a.index(7) < 7);
        b.index(7);
    }
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

}
