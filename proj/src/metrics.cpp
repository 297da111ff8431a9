#include "plantcast/metrics.hpp"

#include "plantcast/error.hpp"
#include "plantcast/qnn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace plantcast::eval {

namespace {

void check(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size()) throw ShapeError("truth and prediction lengths differ");
    if (truth.empty()) throw ShapeError("metrics need at least one value");
}

} // namespace

double mse(std::span<const double> truth, std::span<const double> pred) {
    check(truth, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    return s / static_cast<double>(truth.size());
}

double mae(std::span<const double> truth, std::span<const double> pred) {
    check(truth, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
    return s / static_cast<double>(truth.size());
}

Metrics compute_metrics(std::span<const double> truth, std::span<const double> pred) {
    return {mse(truth, pred), mae(truth, pred), truth.size()};
}

std::size_t count_parameters(std::size_t n_features, std::size_t n_targets) {
    return qnn::parameter_count(n_features, n_targets);
}

std::string render_report_csv(const ReportTable& table) {
    std::ostringstream out;
    out << stamp_line({table.fingerprint, table.seed}) << '\n';
    out << "chamber,horizon,model,mse,mae\n";
    for (const auto& r : table.rows) {
        out << timeseries::to_string(r.chamber) << ',' << r.horizon.count() << ',' << r.model << ','
            << csv::format_fixed(r.mse, 4) << ',' << csv::format_fixed(r.mae, 4) << '\n';
    }
    return out.str();
}

std::string render_report_text(const ReportTable& table) {
    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"chamber", "horizon", "model", "MSE", "MAE"});
    for (const auto& r : table.rows) {
        cells.push_back({std::string(timeseries::to_string(r.chamber)), std::to_string(r.horizon.count()) + "min",
                         r.model, csv::format_fixed(r.mse, 4), csv::format_fixed(r.mae, 4)});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    out << "fingerprint " << table.fingerprint << "  seed " << table.seed << '\n';
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < 5; ++c) {
            const auto& s = cells[i][c];
            const std::string pad(width[c] - s.size(), ' ');
            // Text columns left-aligned, numbers right-aligned.
            out << (c < 3 ? s + pad : pad + s) << (c + 1 < 5 ? "  " : "\n");
        }
        if (i == 0) {
            std::size_t total = 8;
            for (const auto w : width) total += w;
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

ReportTable read_report_csv(std::istream& in) {
    ReportTable table;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("report: empty file");
    const auto stamp = parse_stamp_line(line);
    if (!stamp) throw FormatError("report: missing fingerprint line");
    table.fingerprint = stamp->fingerprint;
    table.seed = stamp->seed;
    if (!csv::next_data_line(in, line) || line != "chamber,horizon,model,mse,mae") {
        throw FormatError("report: missing header");
    }
    while (csv::next_data_line(in, line)) {
        const auto f = csv::split(line);
        if (f.size() != 5) throw FormatError("report: malformed row");
        const auto chamber = timeseries::parse_chamber(f[0]);
        const auto horizon = csv::parse_int(f[1]);
        const auto m = csv::parse_double(f[3]);
        const auto a = csv::parse_double(f[4]);
        if (!chamber || !horizon || !m || !a) throw FormatError("report: bad row '" + line + "'");
        table.rows.push_back({*chamber, Minutes{*horizon}, std::string(f[2]), *m, *a});
    }
    return table;
}

std::string export_trace(const PredictionTrace& trace, const std::optional<Stamp>& stamp) {
    std::ostringstream out;
    if (stamp) out << stamp_line(*stamp) << '\n';
    out << "timestamp,truth,pred,p10,p90\n";
    for (std::size_t i = 0; i < trace.points.size(); ++i) {
        const auto& p = trace.points[i];
        if (i > 0 && !(trace.points[i - 1].time < p.time)) throw FormatError("trace timestamps must increase");
        out << format_timestamp(p.time) << ',' << csv::format_double(p.truth) << ',' << csv::format_double(p.pred)
            << ',' << (p.p10 ? csv::format_double(*p.p10) : "") << ',' << (p.p90 ? csv::format_double(*p.p90) : "")
            << '\n';
    }
    return out.str();
}

} // namespace plantcast::eval
