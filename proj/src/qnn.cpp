#include "plantcast/qnn.hpp"

#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace plantcast::qnn {

// --- scaling ---------------------------------------------------------------

void MinMaxScaler::fit(const Matrix& train) {
    if (train.rows() == 0) throw FitError("scaler needs at least one training row");
    min_.assign(train.cols(), 0.0);
    max_.assign(train.cols(), 0.0);
    for (std::size_t c = 0; c < train.cols(); ++c) {
        min_[c] = max_[c] = train(0, c);
    }
    for (std::size_t r = 1; r < train.rows(); ++r) {
        for (std::size_t c = 0; c < train.cols(); ++c) {
            min_[c] = std::min(min_[c], train(r, c));
            max_[c] = std::max(max_[c], train(r, c));
        }
    }
    fitted_ = true;
}

MinMaxScaler MinMaxScaler::from_stats(std::vector<double> mins, std::vector<double> maxs) {
    if (mins.size() != maxs.size()) throw ShapeError("scaler min/max size mismatch");
    for (std::size_t i = 0; i < mins.size(); ++i) {
        if (!(maxs[i] >= mins[i])) throw FormatError("scaler max below min");
    }
    MinMaxScaler s;
    s.min_ = std::move(mins);
    s.max_ = std::move(maxs);
    s.fitted_ = true;
    return s;
}

void MinMaxScaler::require_fitted(std::size_t dims) const {
    if (!fitted_) throw StateError("scaler used before fit");
    if (dims != min_.size()) throw ShapeError("scaler dimension mismatch");
}

double MinMaxScaler::transform(std::size_t dim, double v) const {
    if (!fitted_) throw StateError("scaler used before fit");
    const double range = max_[dim] - min_[dim];
    return range > 0.0 ? (v - min_[dim]) / range : 0.0;
}

double MinMaxScaler::inverse(std::size_t dim, double v) const {
    if (!fitted_) throw StateError("scaler used before fit");
    return min_[dim] + v * (max_[dim] - min_[dim]);
}

std::vector<double> MinMaxScaler::transform(std::span<const double> x) const {
    require_fitted(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = transform(i, x[i]);
    return out;
}

std::vector<double> MinMaxScaler::inverse(std::span<const double> x) const {
    require_fitted(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = inverse(i, x[i]);
    return out;
}

Matrix MinMaxScaler::transform(const Matrix& x) const {
    require_fitted(x.cols());
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = transform(c, x(r, c));
    }
    return out;
}

// --- network ---------------------------------------------------------------

std::size_t hidden_dim(std::size_t n_features, std::size_t n_targets) { return n_features / 2 + n_targets; }

std::size_t parameter_count(std::size_t n_features, std::size_t n_targets) {
    const std::size_t h = hidden_dim(n_features, n_targets);
    return h * (n_features + 1) + kHeads * n_targets * (h + 1);
}

double pinball_loss(std::span<const double> y_true, std::span<const double> y_pred, double q) {
    if (y_true.size() != y_pred.size()) throw ShapeError("pinball loss: length mismatch");
    if (y_true.empty()) throw ShapeError("pinball loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_true[i] - y_pred[i];
        sum += std::max(q * d, (q - 1.0) * d);
    }
    return sum / static_cast<double>(y_true.size());
}

QuantileNet QuantileNet::zeros(std::size_t n_features, std::size_t n_targets) {
    if (n_features == 0 || n_targets == 0) throw ShapeError("network needs at least one feature and one target");
    QuantileNet net;
    net.n_features = n_features;
    net.n_targets = n_targets;
    net.hidden = hidden_dim(n_features, n_targets);
    net.w1.assign(net.hidden * n_features, 0.0);
    net.b1.assign(net.hidden, 0.0);
    for (std::size_t q = 0; q < kHeads; ++q) {
        net.w2[q].assign(n_targets * net.hidden, 0.0);
        net.b2[q].assign(n_targets, 0.0);
    }
    return net;
}

QuantileNet QuantileNet::initialized(std::size_t n_features, std::size_t n_targets, std::uint64_t seed) {
    auto net = zeros(n_features, n_targets);
    Rng rng(seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(n_features));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(net.hidden));
    for (auto& w : net.w1) w = rng.uniform(-bound1, bound1);
    for (auto& b : net.b1) b = rng.uniform(-bound1, bound1);
    for (std::size_t q = 0; q < kHeads; ++q) {
        for (auto& w : net.w2[q]) w = rng.uniform(-bound2, bound2);
        for (auto& b : net.b2[q]) b = rng.uniform(-bound2, bound2);
    }
    return net;
}

std::size_t QuantileNet::parameter_count() const {
    return hidden * (n_features + 1) + kHeads * n_targets * (hidden + 1);
}

std::vector<double> QuantileNet::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    flat.insert(flat.end(), w1.begin(), w1.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    for (std::size_t q = 0; q < kHeads; ++q) {
        flat.insert(flat.end(), w2[q].begin(), w2[q].end());
        flat.insert(flat.end(), b2[q].begin(), b2[q].end());
    }
    return flat;
}

void QuantileNet::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    auto it = flat.begin();
    auto take = [&](std::vector<double>& dst) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(w1);
    take(b1);
    for (std::size_t q = 0; q < kHeads; ++q) {
        take(w2[q]);
        take(b2[q]);
    }
}

namespace {

// Four interleaved partial sums: fixed summation order, but not a serial chain.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// Hidden pre-activations and activations for one input row.
void hidden_layer(const QuantileNet& net, const double* x, double* pre, double* act) {
    const std::size_t nf = net.n_features;
    for (std::size_t j = 0; j < net.hidden; ++j) {
        const double* w = net.w1.data() + j * nf;
        const double z = net.b1[j] + dot(w, x, nf);
        pre[j] = z;
        act[j] = z > 0.0 ? z : 0.0;
    }
}

void head_output(const QuantileNet& net, std::size_t q, const double* act, double* out) {
    for (std::size_t t = 0; t < net.n_targets; ++t) {
        const double* w = net.w2[q].data() + t * net.hidden;
        out[t] = net.b2[q][t] + dot(w, act, net.hidden);
    }
}

void check_shapes(const QuantileNet& net, const Matrix& x, const Matrix& y) {
    if (x.cols() != net.n_features || y.cols() != net.n_targets || x.rows() != y.rows()) {
        throw ShapeError("network and data shapes disagree");
    }
}

} // namespace

HeadOutputs forward(const QuantileNet& net, std::span<const double> x) {
    if (x.size() != net.n_features) {
        throw ShapeError("expected " + std::to_string(net.n_features) + " inputs, got " + std::to_string(x.size()));
    }
    for (const double v : x) {
        if (!std::isfinite(v)) throw ShapeError("non-finite network input");
    }
    std::vector<double> pre(net.hidden), act(net.hidden);
    hidden_layer(net, x.data(), pre.data(), act.data());
    HeadOutputs out;
    for (std::size_t q = 0; q < kHeads; ++q) {
        out[q].resize(net.n_targets);
        head_output(net, q, act.data(), out[q].data());
    }
    return out;
}

double total_loss(const QuantileNet& net, const Matrix& x, const Matrix& y) {
    check_shapes(net, x, y);
    if (x.rows() == 0) throw ShapeError("loss over an empty set");
    std::vector<double> pre(net.hidden), act(net.hidden), out(net.n_targets);
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        hidden_layer(net, x.row(r).data(), pre.data(), act.data());
        for (std::size_t q = 0; q < kHeads; ++q) {
            head_output(net, q, act.data(), out.data());
            const double level = kQuantiles[q];
            for (std::size_t t = 0; t < net.n_targets; ++t) {
                const double d = y(r, t) - out[t];
                sum += std::max(level * d, (level - 1.0) * d);
            }
        }
    }
    return sum / static_cast<double>(x.rows() * net.n_targets);
}

double loss_and_gradient(const QuantileNet& net, const Matrix& x, const Matrix& y,
                         std::span<const std::size_t> rows, std::vector<double>& gradient) {
    check_shapes(net, x, y);
    if (rows.empty()) throw ShapeError("gradient over an empty batch");
    const std::size_t nf = net.n_features, nh = net.hidden, nt = net.n_targets;
    gradient.assign(net.parameter_count(), 0.0);
    double* g_w1 = gradient.data();
    double* g_b1 = g_w1 + nh * nf;
    std::array<double*, kHeads> g_w2{}, g_b2{};
    double* cursor = g_b1 + nh;
    for (std::size_t q = 0; q < kHeads; ++q) {
        g_w2[q] = cursor;
        g_b2[q] = cursor + nt * nh;
        cursor = g_b2[q] + nt;
    }

    const double norm = 1.0 / static_cast<double>(rows.size() * nt);
    std::vector<double> pre(nh), act(nh), out(nt), d_out(nt), d_hidden(nh);
    double loss = 0.0;
    for (const std::size_t r : rows) {
        const double* xr = x.row(r).data();
        hidden_layer(net, xr, pre.data(), act.data());
        std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
        for (std::size_t q = 0; q < kHeads; ++q) {
            head_output(net, q, act.data(), out.data());
            const double level = kQuantiles[q];
            for (std::size_t t = 0; t < nt; ++t) {
                const double d = y(r, t) - out[t];
                loss += std::max(level * d, (level - 1.0) * d);
                d_out[t] = d > 0.0 ? -level * norm : (d < 0.0 ? (1.0 - level) * norm : 0.0);
            }
            for (std::size_t t = 0; t < nt; ++t) {
                const double g = d_out[t];
                if (g == 0.0) continue;
                const double* w = net.w2[q].data() + t * nh;
                double* gw = g_w2[q] + t * nh;
                for (std::size_t j = 0; j < nh; ++j) {
                    gw[j] += g * act[j];
                    d_hidden[j] += g * w[j];
                }
                g_b2[q][t] += g;
            }
        }
        for (std::size_t j = 0; j < nh; ++j) {
            if (pre[j] <= 0.0) continue;
            const double g = d_hidden[j];
            double* gw = g_w1 + j * nf;
            for (std::size_t i = 0; i < nf; ++i) gw[i] += g * xr[i];
            g_b1[j] += g;
        }
    }
    return loss * norm;
}

void TrainConfig::validate() const {
    std::string problems;
    if (epochs < 1) problems += " epochs must be >= 1;";
    if (batch_size < 1) problems += " batch_size must be >= 1;";
    if (!(step_size > 0.0)) problems += " step_size must be > 0;";
    if (!problems.empty()) throw ConfigError("qnn train config:" + problems);
}

TrainResult train(const Matrix& x, const Matrix& y, const TrainConfig& config) {
    config.validate();
    if (x.rows() == 0) throw FitError("quantile net needs at least one training row");
    if (x.rows() != y.rows()) throw ShapeError("input and target row counts differ");

    TrainResult result{QuantileNet::initialized(x.cols(), y.cols(), config.seed), {}};
    auto& net = result.net;
    result.loss_trace.push_back(total_loss(net, x, y));

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> theta = net.parameters();
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0), grad;
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(mix_seed(config.seed, 1));
    double beta1_pow = 1.0, beta2_pow = 1.0;
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffler.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(batch, order.size() - start));
            loss_and_gradient(net, x, y, rows, grad);
            beta1_pow *= beta1;
            beta2_pow *= beta2;
            const double step = config.step_size * std::sqrt(1.0 - beta2_pow) / (1.0 - beta1_pow);
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                theta[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
            }
            net.set_parameters(theta);
        }
        result.loss_trace.push_back(total_loss(net, x, y));
    }
    return result;
}

// --- lag windows -----------------------------------------------------------

namespace {

std::vector<const timeseries::GridSeries*> chamber_series(const timeseries::PreparedDataset& ds,
                                                          const LagMatrixSpec& spec) {
    if (spec.sensors.empty()) throw ConfigError("lag spec has no sensors");
    if (spec.step != ds.step || spec.window.count() <= 0 || spec.window.count() % spec.step.count() != 0) {
        throw AlignmentError("lag window is not a positive multiple of the grid step");
    }
    std::vector<const timeseries::GridSeries*> series;
    for (const auto& id : spec.sensors) series.push_back(&ds.find(id));
    return series;
}

} // namespace

LagRows build_lag_rows(const timeseries::PreparedDataset& ds, const LagMatrixSpec& spec, Minutes horizon) {
    const auto series = chamber_series(ds, spec);
    if (horizon.count() <= 0 || horizon.count() % ds.step.count() != 0) {
        throw AlignmentError("horizon is not a positive multiple of the grid step");
    }
    const std::size_t lags = spec.lags();
    const auto ahead = static_cast<std::size_t>(horizon.count() / ds.step.count());
    LagRows rows;
    std::vector<double> in(spec.n_features()), out(series.size());
    for (std::size_t k = lags - 1; k + ahead < ds.n_cells; ++k) {
        bool complete = true;
        for (std::size_t s = 0; s < series.size() && complete; ++s) {
            const auto& cells = series[s]->cells;
            for (std::size_t l = 0; l < lags; ++l) {
                const auto& c = cells[k + 1 - lags + l];
                if (!c) {
                    complete = false;
                    break;
                }
                in[s * lags + l] = *c;
            }
            const auto& t = cells[k + ahead];
            if (!t) complete = false;
            else out[s] = *t;
        }
        if (!complete) continue;
        rows.inputs.push_row(in);
        rows.targets.push_row(out);
        rows.anchors.push_back(ds.origin + ds.step * static_cast<std::int64_t>(k + 1));
    }
    return rows;
}

std::vector<std::optional<double>> lag_window(const timeseries::PreparedDataset& ds, const LagMatrixSpec& spec,
                                              Timestamp anchor) {
    const auto series = chamber_series(ds, spec);
    const std::size_t lags = spec.lags();
    std::vector<std::optional<double>> window(spec.n_features());
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto k = series[s]->index_of(anchor);
        if (!k) throw AlignmentError("anchor " + format_timestamp(anchor) + " is not on the grid");
        for (std::size_t l = 0; l < lags; ++l) {
            if (*k + 1 + l >= lags) window[s * lags + l] = series[s]->cells[*k + 1 + l - lags];
        }
    }
    return window;
}

std::vector<QuantileTriple> predict_quantiles(const QuantileForecaster& model,
                                              std::span<const std::optional<double>> raw_window) {
    if (raw_window.size() != model.net.n_features) throw ShapeError("lag window has the wrong length");
    std::vector<double> scaled(raw_window.size());
    for (std::size_t i = 0; i < raw_window.size(); ++i) {
        if (!raw_window[i]) throw GapError("lag window has a missing cell");
        scaled[i] = model.input_scaler.transform(i, *raw_window[i]);
    }
    const auto heads = forward(model.net, scaled);
    std::vector<QuantileTriple> out(model.net.n_targets);
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] = {model.target_scaler.inverse(t, heads[0][t]), model.target_scaler.inverse(t, heads[1][t]),
                  model.target_scaler.inverse(t, heads[2][t])};
    }
    return out;
}

ForecasterFit fit_forecaster(const LagMatrixSpec& spec, Minutes horizon, const LagRows& train_rows,
                             const TrainConfig& config) {
    if (train_rows.inputs.rows() == 0) throw FitError("no complete lag rows to train on");
    ForecasterFit fit;
    fit.model.spec = spec;
    fit.model.horizon = horizon;
    fit.model.input_scaler.fit(train_rows.inputs);
    fit.model.target_scaler.fit(train_rows.targets);
    auto trained = train(fit.model.input_scaler.transform(train_rows.inputs),
                         fit.model.target_scaler.transform(train_rows.targets), config);
    fit.model.net = std::move(trained.net);
    fit.loss_trace = std::move(trained.loss_trace);
    return fit;
}

// --- serialization ---------------------------------------------------------

namespace {

void write_values(std::ostream& out, std::string_view key, std::span<const double> values) {
    out << key << ' ' << values.size();
    for (const double v : values) out << ' ' << csv::format_double(v);
    out << '\n';
}

std::vector<std::string> words_of(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> w;
    for (std::string s; ss >> s;) w.push_back(s);
    return w;
}

} // namespace

void write_model(std::ostream& out, const QuantileForecaster& model, const std::optional<Stamp>& stamp) {
    if (stamp) out << stamp_line(*stamp) << '\n';
    out << "plantcast-qnn-v1\n"
        << "horizon " << model.horizon.count() << '\n'
        << "window " << model.spec.window.count() << '\n'
        << "step " << model.spec.step.count() << '\n'
        << "sensors " << model.spec.sensors.size();
    for (const auto& s : model.spec.sensors) out << ' ' << s;
    out << '\n'
        << "dims " << model.net.n_features << ' ' << model.net.n_targets << ' ' << model.net.hidden << '\n';
    write_values(out, "input_min", model.input_scaler.mins());
    write_values(out, "input_max", model.input_scaler.maxs());
    write_values(out, "target_min", model.target_scaler.mins());
    write_values(out, "target_max", model.target_scaler.maxs());
    write_values(out, "params", model.net.parameters());
    if (!out) throw IoError("failed to write quantile net");
}

QuantileForecaster read_model(std::istream& in) {
    std::string line;
    auto next = [&](std::string_view key) {
        if (!csv::next_data_line(in, line)) throw FormatError("qnn model: truncated");
        auto w = words_of(line);
        if (w.size() < 2 || w[0] != key) throw FormatError("qnn model: expected '" + std::string(key) + "'");
        return w;
    };
    auto integer = [](const std::string& s) {
        const auto v = csv::parse_int(s);
        if (!v || *v < 0) throw FormatError("qnn model: bad integer '" + s + "'");
        return *v;
    };
    auto values = [&](std::string_view key) {
        const auto w = next(key);
        const auto n = static_cast<std::size_t>(integer(w[1]));
        if (w.size() != n + 2) throw FormatError("qnn model: wrong value count for " + std::string(key));
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = csv::parse_double(w[i + 2]);
            if (!v) throw FormatError("qnn model: bad number");
            out[i] = *v;
        }
        return out;
    };
    if (!csv::next_data_line(in, line) || line != "plantcast-qnn-v1") throw FormatError("qnn model: bad magic");
    QuantileForecaster model;
    model.horizon = Minutes{integer(next("horizon")[1])};
    model.spec.window = Minutes{integer(next("window")[1])};
    model.spec.step = Minutes{integer(next("step")[1])};
    {
        const auto w = next("sensors");
        const auto n = static_cast<std::size_t>(integer(w[1]));
        if (w.size() != n + 2) throw FormatError("qnn model: wrong sensor count");
        model.spec.sensors.assign(w.begin() + 2, w.end());
    }
    const auto dims = next("dims");
    if (dims.size() != 4) throw FormatError("qnn model: bad dims");
    const auto nf = static_cast<std::size_t>(integer(dims[1]));
    const auto nt = static_cast<std::size_t>(integer(dims[2]));
    model.net = QuantileNet::zeros(nf, nt);
    if (model.net.hidden != static_cast<std::size_t>(integer(dims[3]))) throw FormatError("qnn model: bad hidden dim");
    if (model.spec.step.count() <= 0 || nf != model.spec.n_features() || nt != model.spec.sensors.size()) {
        throw FormatError("qnn model: dims disagree with lag spec");
    }
    auto in_min = values("input_min");
    auto in_max = values("input_max");
    auto t_min = values("target_min");
    auto t_max = values("target_max");
    if (in_min.size() != nf || t_min.size() != nt) throw FormatError("qnn model: scaler size mismatch");
    model.input_scaler = MinMaxScaler::from_stats(std::move(in_min), std::move(in_max));
    model.target_scaler = MinMaxScaler::from_stats(std::move(t_min), std::move(t_max));
    model.net.set_parameters(values("params"));
    return model;
}

} // namespace plantcast::qnn
