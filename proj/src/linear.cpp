#include "plantcast/linear.hpp"

#include "plantcast/error.hpp"

#include <algorithm>
#include <cmath>

namespace plantcast::linear {

double last_value_predict(const features::Sample& sample) { return sample.features.last_value(); }

std::string layout_tag(std::size_t feature_count) { return "features-v1/" + std::to_string(feature_count); }

std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
    // In-place lower factor L with A = L L^T.
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) throw FitError("normal equations are not positive definite");
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

LinearModel linear_fit(const Matrix& x, std::span<const double> y, double ridge) {
    if (x.rows() == 0) throw FitError("linear fit needs at least one sample");
    if (y.size() != x.rows()) throw ShapeError("target count does not match feature rows");
    if (!(ridge >= 0.0)) throw FitError("ridge must be non-negative");
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const double nd = static_cast<double>(n);

    LinearModel model;
    model.layout = layout_tag(p);
    model.feature_means.assign(p, 0.0);
    model.feature_scales.assign(p, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) model.feature_means[c] += x(r, c);
    }
    for (auto& m : model.feature_means) m /= nd;
    std::vector<double> var(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            const double d = x(r, c) - model.feature_means[c];
            var[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        const double sd = std::sqrt(var[c] / nd);
        // Constant columns keep scale 1.
        if (sd > 1e-12 * std::max(1.0, std::abs(model.feature_means[c]))) model.feature_scales[c] = sd;
    }

    // Normal system over [1, z_1..z_p]; z are the standardized features.
    const std::size_t m = p + 1;
    std::vector<double> a(m * m, 0.0), b(m, 0.0);
    std::vector<double> z(m);
    z[0] = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) z[c + 1] = (x(r, c) - model.feature_means[c]) / model.feature_scales[c];
        for (std::size_t i = 0; i < m; ++i) {
            b[i] += z[i] * y[r];
            for (std::size_t j = 0; j <= i; ++j) a[i * m + j] += z[i] * z[j];
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) a[j * m + i] = a[i * m + j];
    }
    for (std::size_t i = 1; i < m; ++i) a[i * m + i] += ridge;

    const auto solution = cholesky_solve(std::move(a), std::move(b), m);
    model.bias = solution[0];
    model.weights.assign(solution.begin() + 1, solution.end());
    return model;
}

LinearModel linear_fit(std::span<const features::Sample> samples, double ridge) {
    if (samples.empty()) throw FitError("linear fit needs at least one sample");
    const auto y = features::targets(samples);
    return linear_fit(features::feature_matrix(samples), y, ridge);
}

double linear_predict(const LinearModel& model, std::span<const double> features) {
    if (features.size() != model.weights.size()) {
        throw ShapeError("expected " + std::to_string(model.weights.size()) + " features, got " +
                         std::to_string(features.size()));
    }
    double out = model.bias;
    for (std::size_t c = 0; c < features.size(); ++c) {
        if (!std::isfinite(features[c])) throw ShapeError("non-finite feature at index " + std::to_string(c));
        out += model.weights[c] * (features[c] - model.feature_means[c]) / model.feature_scales[c];
    }
    return out;
}

void write_model(std::ostream& out, const LinearModel& model, const std::optional<Stamp>& stamp) {
    if (stamp) out << stamp_line(*stamp) << '\n';
    out << "plantcast-linear-v1\n"
        << "layout " << model.layout << '\n'
        << "features " << model.weights.size() << '\n'
        << "bias " << csv::format_double(model.bias) << '\n';
    for (std::size_t c = 0; c < model.weights.size(); ++c) {
        out << csv::format_double(model.weights[c]) << ' ' << csv::format_double(model.feature_means[c]) << ' '
            << csv::format_double(model.feature_scales[c]) << '\n';
    }
    if (!out) throw IoError("failed to write linear model");
}

LinearModel read_model(std::istream& in) {
    std::string line;
    auto expect = [&](std::string_view key) {
        if (!csv::next_data_line(in, line) || line.rfind(std::string(key) + ' ', 0) != 0) {
            throw FormatError("linear model: expected '" + std::string(key) + "'");
        }
        return std::string_view(line).substr(key.size() + 1);
    };
    if (!csv::next_data_line(in, line) || line != "plantcast-linear-v1") throw FormatError("linear model: bad magic");
    LinearModel model;
    model.layout = std::string(expect("layout"));
    const auto p = csv::parse_int(expect("features"));
    if (!p || *p < 0) throw FormatError("linear model: bad feature count");
    const auto bias = csv::parse_double(expect("bias"));
    if (!bias) throw FormatError("linear model: bad bias");
    model.bias = *bias;
    for (std::int64_t c = 0; c < *p; ++c) {
        if (!csv::next_data_line(in, line)) throw FormatError("linear model: truncated");
        std::string_view rest = line;
        double v[3];
        for (double& out : v) {
            const auto sp = rest.find(' ');
            const auto d = csv::parse_double(rest.substr(0, sp));
            if (!d) throw FormatError("linear model: bad coefficient row");
            out = *d;
            rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
        }
        if (!(v[2] > 0.0)) throw FormatError("linear model: scale must be positive");
        model.weights.push_back(v[0]);
        model.feature_means.push_back(v[1]);
        model.feature_scales.push_back(v[2]);
    }
    return model;
}

} // namespace plantcast::linear
