#include "plantcast/error.hpp"
#include "plantcast/linear.hpp"
#include "plantcast/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace plantcast;
using namespace plantcast::linear;

namespace {

struct Data {
    Matrix x;
    std::vector<double> y;
};

Data random_linear(Rng& rng, std::size_t n, std::size_t p, double noise) {
    std::vector<double> w(p);
    for (auto& v : w) v = rng.uniform(-3.0, 3.0);
    const double b = rng.uniform(-10.0, 10.0);
    Data d;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> row(p);
        double t = b;
        for (std::size_t c = 0; c < p; ++c) {
            row[c] = rng.uniform(-5.0, 5.0) * (1.0 + static_cast<double>(c));
            t += w[c] * row[c];
        }
        d.x.push_row(row);
        d.y.push_back(t + noise * rng.normal());
    }
    return d;
}

// Plain least squares by Gauss-Jordan in long double on [1, x].
std::vector<long double> ols_oracle(const Matrix& x, const std::vector<double>& y) {
    const std::size_t m = x.cols() + 1;
    std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1, 0.0L));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<long double> z(m, 1.0L);
        for (std::size_t c = 0; c < x.cols(); ++c) z[c + 1] = x(r, c);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) a[i][j] += z[i] * z[j];
            a[i][m] += z[i] * y[r];
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t piv = i;
        for (std::size_t k = i + 1; k < m; ++k) {
            if (std::fabs(a[k][i]) > std::fabs(a[piv][i])) piv = k;
        }
        std::swap(a[i], a[piv]);
        for (std::size_t k = 0; k < m; ++k) {
            if (k == i) continue;
            const long double f = a[k][i] / a[i][i];
            for (std::size_t j = i; j <= m; ++j) a[k][j] -= f * a[i][j];
        }
    }
    std::vector<long double> beta(m);
    for (std::size_t i = 0; i < m; ++i) beta[i] = a[i][m] / a[i][i];
    return beta;
}

features::Sample sample_with_last(double last) {
    features::Sample s;
    s.features.values.assign(45, 0.0);
    s.features.values[42] = last;
    return s;
}

} // namespace

TEST_SUITE("linear") {

TEST_CASE("last value benchmark returns the anchor value") {
    CHECK(last_value_predict(sample_with_last(42.0)) == 42.0);
    auto s = sample_with_last(10.0);
    s.target = 10.0;
    CHECK(last_value_predict(s) - s.target == 0.0);  // constant series: no error
    s.target = 13.5;
    CHECK(s.target - last_value_predict(s) == 3.5);  // step after the anchor
}

TEST_CASE("noiseless linear targets are recovered") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto train = random_linear(rng, 200, 1 + rng.index(45), 0.0);
        const auto model = linear_fit(train.x, train.y);
        for (std::size_t r = 0; r < train.x.rows(); ++r) {
            REQUIRE(std::fabs(linear_predict(model, train.x.row(r)) - train.y[r]) < 1e-6);
        }
    }
}

TEST_CASE("held-out RMSE on noiseless linear data") {
    Rng rng(2);
    Rng twin(2);
    auto all = random_linear(rng, 400, 45, 0.0);
    const auto model = linear_fit(all.x, all.y);
    // Same weights, fresh rows.
    auto test = random_linear(twin, 400, 45, 0.0);
    double sse = 0.0;
    for (std::size_t r = 0; r < test.x.rows(); ++r) {
        const double e = linear_predict(model, test.x.row(r)) - test.y[r];
        sse += e * e;
    }
    CHECK(std::sqrt(sse / 400.0) < 1e-5);
}

TEST_CASE("duplicate columns fit through the ridge term") {
    Rng rng(3);
    const auto base = random_linear(rng, 150, 4, 0.5);
    Matrix dup;
    for (std::size_t r = 0; r < base.x.rows(); ++r) {
        auto row = std::vector<double>(base.x.row(r).begin(), base.x.row(r).end());
        row.push_back(row[1]);
        row.push_back(row[3]);
        dup.push_row(row);
    }
    const auto model = linear_fit(dup, base.y);
    const auto beta = ols_oracle(base.x, base.y);
    for (std::size_t r = 0; r < base.x.rows(); ++r) {
        long double expect = beta[0];
        for (std::size_t c = 0; c < 4; ++c) expect += beta[c + 1] * base.x(r, c);
        REQUIRE(std::fabs(linear_predict(model, dup.row(r)) - static_cast<double>(expect)) < 1e-6);
    }
}

TEST_CASE("constant targets and constant features") {
    Rng rng(4);
    auto d = random_linear(rng, 80, 6, 0.0);
    std::vector<double> y(80, 7.25);
    const auto model = linear_fit(d.x, y);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> probe(6);
        for (auto& v : probe) v = rng.uniform(-50.0, 50.0);
        REQUIRE(std::fabs(linear_predict(model, probe) - 7.25) < 1e-9);
    }
    Matrix flat(10, 3, 5.0);
    const auto m2 = linear_fit(flat, std::vector<double>(10, 1.0));
    CHECK(m2.feature_scales == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("residuals are orthogonal to standardized features") {
    Rng rng(5);
    const auto d = random_linear(rng, 300, 10, 2.0);
    const auto model = linear_fit(d.x, d.y);
    for (std::size_t c = 0; c < 10; ++c) {
        double dotp = 0.0, norm = 0.0;
        for (std::size_t r = 0; r < 300; ++r) {
            const double z = (d.x(r, c) - model.feature_means[c]) / model.feature_scales[c];
            dotp += z * (d.y[r] - linear_predict(model, d.x.row(r)));
            norm += z * z;
        }
        CHECK(std::fabs(dotp) / std::sqrt(norm) < 1e-6);
    }
}

TEST_CASE("linear beats last value on a noiseless linear sample set") {
    Rng rng(6);
    std::vector<features::Sample> samples;
    for (int i = 0; i < 200; ++i) {
        features::Sample s;
        s.features.values.resize(45);
        for (auto& v : s.features.values) v = rng.uniform(0.0, 10.0);
        s.target = 0.5 * s.features.values[42] + 0.3 * s.features.values[0] + 1.0;
        samples.push_back(s);
    }
    const auto model = linear_fit(samples);
    double lin = 0.0, lv = 0.0;
    for (const auto& s : samples) {
        lin += std::pow(linear_predict(model, s.features.values) - s.target, 2);
        lv += std::pow(last_value_predict(s) - s.target, 2);
    }
    CHECK(lin <= lv);
}

TEST_CASE("predict shape checks and hand model") {
    LinearModel m{{0.0, 0.0}, 5.0, {0.0, 0.0}, {1.0, 1.0}, layout_tag(2)};
    CHECK(linear_predict(m, std::vector<double>{3.0, -8.0}) == 5.0);
    CHECK_THROWS_AS(linear_predict(m, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS(linear_predict(m, std::vector<double>{1.0, NAN}), ShapeError);
    CHECK_THROWS_AS(linear_fit(Matrix{}, std::vector<double>{}), FitError);
    CHECK_THROWS_AS(linear_fit(std::span<const features::Sample>{}), FitError);
}

TEST_CASE("cholesky solve") {
    const auto x = cholesky_solve({4, 2, 2, 3}, {2, 1}, 2);
    CHECK(x[0] == doctest::Approx(0.5));
    CHECK(x[1] == doctest::Approx(0.0));
    CHECK_THROWS_AS(cholesky_solve({1, 2, 2, 1}, {1, 1}, 2), FitError);
}

TEST_CASE("fit is deterministic and serializes exactly") {
    Rng rng(7);
    const auto d = random_linear(rng, 120, 45, 1.0);
    const auto a = linear_fit(d.x, d.y);
    const auto b = linear_fit(d.x, d.y);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    std::stringstream io;
    write_model(io, a, Stamp{"x", 1});
    const auto back = read_model(io);
    CHECK(back.weights == a.weights);
    CHECK(back.bias == a.bias);
    CHECK(back.feature_means == a.feature_means);
    CHECK(back.feature_scales == a.feature_scales);
    CHECK(back.layout == "features-v1/45");
    std::istringstream junk("plantcast-linear-v1\nlayout x\n");
    CHECK_THROWS_AS(read_model(junk), FormatError);
}

}
