#include "plantcast/gbt.hpp"

#include "plantcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

namespace plantcast::gbt {

void GBTParams::validate() const {
    std::string problems;
    if (n_trees < 0) problems += " n_trees must be >= 0;";
    if (max_depth < 0) problems += " max_depth must be >= 0;";
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) problems += " learning_rate must be in (0, 1];";
    if (min_samples_leaf < 1) problems += " min_samples_leaf must be >= 1;";
    if (!problems.empty()) throw ConfigError("gbt params:" + problems);
}

double Tree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

using RowList = std::vector<std::uint32_t>;

// A row of a feature column, kept with its value so scans stay sequential.
struct Entry {
    double value;
    std::uint32_t row;
};
using Column = std::vector<Entry>;

std::vector<Column> presort(const Matrix& x) {
    std::vector<Column> sorted(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto& col = sorted[f];
        col.reserve(x.rows());
        for (std::uint32_t r = 0; r < x.rows(); ++r) col.push_back({x(r, f), r});
        std::stable_sort(col.begin(), col.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
    }
    return sorted;
}

double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

struct NodeSplit {
    SplitChoice choice;
    std::size_t left_count = 0;
};

// Rows of a node: `rows` ascending by index, `sorted[f]` ordered by feature f.
std::optional<NodeSplit> find_split(std::span<const double> residuals, const RowList& rows,
                                    const std::vector<Column>& sorted, std::size_t min_leaf, double min_gain) {
    const std::size_t n = rows.size();
    if (n < 2 * min_leaf || n < 2) return std::nullopt;
    double sum = 0.0;
    for (const auto r : rows) sum += residuals[r];
    const double mean = sum / static_cast<double>(n);
    double total_centered = 0.0, node_sse = 0.0;
    for (const auto r : rows) {
        const double d = residuals[r] - mean;
        total_centered += d;
        node_sse += d * d;
    }
    const double parent_term = total_centered * total_centered / static_cast<double>(n);
    // Gains this close count as equal, so a partition reachable through two
    // features goes to the lower index whatever the summation order did.
    const double tie = kSplitTieTolerance * node_sse;

    // Reciprocal counts replace two divisions per candidate in the scan below.
    std::vector<double> inv(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) inv[k] = 1.0 / static_cast<double>(k);

    std::optional<NodeSplit> best;
    const std::size_t first = min_leaf - 1, last = n - min_leaf;  // candidates i in [first, last)
    for (std::size_t f = 0; f < sorted.size(); ++f) {
        const auto& order = sorted[f];
        double left_sum = 0.0;
        for (std::size_t i = 0; i < first; ++i) left_sum += residuals[order[i].row] - mean;
        for (std::size_t i = first; i < last; ++i) {
            left_sum += residuals[order[i].row] - mean;
            const double lo = order[i].value;
            const double hi = order[i + 1].value;
            if (!(lo < hi)) continue;
            const double right_sum = total_centered - left_sum;
            const double gain = left_sum * left_sum * inv[i + 1] + right_sum * right_sum * inv[n - i - 1] - parent_term;
            if (gain > min_gain && (!best || gain > best->choice.gain + tie)) {
                best = NodeSplit{{f, midpoint(lo, hi), gain}, i + 1};
            }
        }
    }
    return best;
}

class TreeBuilder {
public:
    TreeBuilder(std::size_t n_rows, std::span<const double> residuals, const GBTParams& params, double min_gain)
        : n_rows_(n_rows), residuals_(residuals), params_(params), min_gain_(min_gain), goes_left_(n_rows, 0) {}

    Tree build(std::vector<Column> sorted) {
        RowList rows(n_rows_);
        std::iota(rows.begin(), rows.end(), 0u);
        grow(std::move(rows), std::move(sorted), 0);
        return std::move(tree_);
    }

private:
    void grow(RowList rows, std::vector<Column> sorted, int depth) {
        const std::size_t index = tree_.nodes.size();
        tree_.nodes.emplace_back();
        double sum = 0.0;
        double lo = residuals_[rows.front()], hi = lo;
        for (const auto r : rows) {
            sum += residuals_[r];
            lo = std::min(lo, residuals_[r]);
            hi = std::max(hi, residuals_[r]);
        }
        tree_.nodes[index].n_rows = rows.size();
        tree_.nodes[index].value = sum / static_cast<double>(rows.size());

        if (depth >= params_.max_depth || lo == hi) return;
        const auto split = find_split(residuals_, rows, sorted,
                                      static_cast<std::size_t>(params_.min_samples_leaf), min_gain_);
        if (!split) return;

        const std::size_t f = split->choice.feature;
        for (std::size_t i = 0; i < sorted[f].size(); ++i) goes_left_[sorted[f][i].row] = i < split->left_count;

        RowList rows_left, rows_right;
        rows_left.reserve(split->left_count);
        rows_right.reserve(rows.size() - split->left_count);
        for (const auto r : rows) (goes_left_[r] ? rows_left : rows_right).push_back(r);
        std::vector<Column> sorted_left(sorted.size()), sorted_right(sorted.size());
        for (std::size_t g = 0; g < sorted.size(); ++g) {
            // Branch-free stable partition; the side of a row is data-dependent and unpredictable.
            auto& l = sorted_left[g];
            auto& r = sorted_right[g];
            l.resize(split->left_count + 1);
            r.resize(rows.size() - split->left_count + 1);
            std::size_t nl = 0, nr = 0;
            for (const auto& e : sorted[g]) {
                const std::size_t left = goes_left_[e.row];
                l[nl] = e;
                r[nr] = e;
                nl += left;
                nr += 1 - left;
            }
            l.pop_back();
            r.pop_back();
        }
        rows.clear();
        rows.shrink_to_fit();
        sorted.clear();
        sorted.shrink_to_fit();

        tree_.nodes[index].feature = static_cast<int>(f);
        tree_.nodes[index].threshold = split->choice.threshold;
        tree_.nodes[index].left = static_cast<std::int32_t>(tree_.nodes.size());
        grow(std::move(rows_left), std::move(sorted_left), depth + 1);
        tree_.nodes[index].right = static_cast<std::int32_t>(tree_.nodes.size());
        grow(std::move(rows_right), std::move(sorted_right), depth + 1);
    }

    std::size_t n_rows_;
    std::span<const double> residuals_;
    const GBTParams& params_;
    double min_gain_;
    std::vector<char> goes_left_;
    Tree tree_;
};

double centered_sse(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (const double e : v) s += (e - mean) * (e - mean);
    return s;
}

Tree fit_presorted(const Matrix& x, std::span<const double> residuals, const GBTParams& params,
                   std::vector<Column> sorted) {
    const double min_gain = kMinRelativeGain * centered_sse(residuals);
    return TreeBuilder(x.rows(), residuals, params, min_gain).build(std::move(sorted));
}

void check_inputs(const Matrix& x, std::span<const double> values) {
    if (x.rows() == 0) throw FitError("tree fit needs at least one row");
    if (values.size() != x.rows()) throw ShapeError("residual count does not match rows");
}

} // namespace

std::optional<SplitChoice> best_split(const Matrix& x, std::span<const double> residuals, std::size_t min_leaf,
                                      double min_gain) {
    check_inputs(x, residuals);
    RowList rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0u);
    const auto split = find_split(residuals, rows, presort(x), std::max<std::size_t>(min_leaf, 1), min_gain);
    if (!split) return std::nullopt;
    return split->choice;
}

Tree fit_tree(const Matrix& x, std::span<const double> residuals, const GBTParams& params) {
    check_inputs(x, residuals);
    params.validate();
    return fit_presorted(x, residuals, params, presort(x));
}

GBTModel gbt_fit(const Matrix& x, std::span<const double> y, const GBTParams& params,
                 std::vector<double>* training_mse) {
    check_inputs(x, y);
    params.validate();
    const std::size_t n = x.rows();
    GBTModel model;
    model.params = params;
    model.learning_rate = params.learning_rate;
    model.n_features = x.cols();
    model.base_prediction = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::vector<double> pred(n, model.base_prediction);
    std::vector<double> residuals(n);
    auto record = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
        if (training_mse) training_mse->push_back(s / static_cast<double>(n));
    };
    if (training_mse) training_mse->clear();
    record();

    const auto sorted = presort(x);
    model.trees.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) residuals[i] = y[i] - pred[i];
        model.trees.push_back(fit_presorted(x, residuals, params, sorted));
        const auto& tree = model.trees.back();
        for (std::size_t i = 0; i < n; ++i) pred[i] += model.learning_rate * tree.predict(x.row(i));
        record();
    }
    return model;
}

GBTModel gbt_fit(std::span<const features::Sample> samples, const GBTParams& params) {
    if (samples.empty()) throw FitError("gbt fit needs at least one sample");
    const auto y = features::targets(samples);
    return gbt_fit(features::feature_matrix(samples), y, params);
}

double gbt_predict(const GBTModel& model, std::span<const double> features) {
    if (features.size() != model.n_features) {
        throw ShapeError("expected " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(features.size()));
    }
    for (const double v : features) {
        if (!std::isfinite(v)) throw ShapeError("non-finite feature");
    }
    double out = model.base_prediction;
    for (const auto& tree : model.trees) out += model.learning_rate * tree.predict(features);
    return out;
}

void write_model(std::ostream& out, const GBTModel& model, const std::optional<Stamp>& stamp) {
    if (stamp) out << stamp_line(*stamp) << '\n';
    const auto& p = model.params;
    out << "plantcast-gbt-v1\n"
        << "params " << p.n_trees << ' ' << p.max_depth << ' ' << csv::format_double(p.learning_rate) << ' '
        << p.min_samples_leaf << '\n'
        << "features " << model.n_features << '\n'
        << "base " << csv::format_double(model.base_prediction) << '\n'
        << "learning_rate " << csv::format_double(model.learning_rate) << '\n'
        << "trees " << model.trees.size() << '\n';
    for (const auto& tree : model.trees) {
        out << "tree " << tree.nodes.size() << '\n';
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                out << "leaf " << csv::format_double(n.value) << ' ' << n.n_rows << '\n';
            } else {
                out << "split " << n.feature << ' ' << csv::format_double(n.threshold) << ' '
                    << csv::format_double(n.value) << ' ' << n.n_rows << '\n';
            }
        }
    }
    if (!out) throw IoError("failed to write gbt model");
}

namespace {

std::vector<std::string> words_of(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> w;
    for (std::string s; ss >> s;) w.push_back(s);
    return w;
}

double to_double(const std::string& s) {
    const auto v = csv::parse_double(s);
    if (!v) throw FormatError("gbt model: bad number '" + s + "'");
    return *v;
}

std::int64_t to_int(const std::string& s) {
    const auto v = csv::parse_int(s);
    if (!v) throw FormatError("gbt model: bad integer '" + s + "'");
    return *v;
}

// Rebuilds child links from a preorder listing.
std::size_t link_preorder(Tree& tree, std::size_t i) {
    if (i >= tree.nodes.size()) throw FormatError("gbt model: truncated tree");
    auto& n = tree.nodes[i];
    if (n.is_leaf()) return i + 1;
    n.left = static_cast<std::int32_t>(i + 1);
    const std::size_t right = link_preorder(tree, i + 1);
    tree.nodes[i].right = static_cast<std::int32_t>(right);
    return link_preorder(tree, right);
}

} // namespace

GBTModel read_model(std::istream& in) {
    std::string line;
    auto next = [&](std::string_view key, std::size_t arity) {
        if (!csv::next_data_line(in, line)) throw FormatError("gbt model: truncated");
        auto w = words_of(line);
        if (w.empty() || w[0] != key || w.size() != arity + 1) {
            throw FormatError("gbt model: expected '" + std::string(key) + "'");
        }
        return w;
    };
    if (!csv::next_data_line(in, line) || line != "plantcast-gbt-v1") throw FormatError("gbt model: bad magic");
    GBTModel model;
    const auto p = next("params", 4);
    model.params = {static_cast<int>(to_int(p[1])), static_cast<int>(to_int(p[2])), to_double(p[3]),
                    static_cast<int>(to_int(p[4]))};
    model.n_features = static_cast<std::size_t>(to_int(next("features", 1)[1]));
    model.base_prediction = to_double(next("base", 1)[1]);
    model.learning_rate = to_double(next("learning_rate", 1)[1]);
    const auto n_trees = to_int(next("trees", 1)[1]);
    for (std::int64_t t = 0; t < n_trees; ++t) {
        const auto n_nodes = to_int(next("tree", 1)[1]);
        Tree tree;
        for (std::int64_t k = 0; k < n_nodes; ++k) {
            if (!csv::next_data_line(in, line)) throw FormatError("gbt model: truncated");
            const auto w = words_of(line);
            TreeNode node;
            if (w.size() == 3 && w[0] == "leaf") {
                node.value = to_double(w[1]);
                node.n_rows = static_cast<std::size_t>(to_int(w[2]));
            } else if (w.size() == 5 && w[0] == "split") {
                node.feature = static_cast<int>(to_int(w[1]));
                if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.n_features) {
                    throw FormatError("gbt model: feature index out of range");
                }
                node.threshold = to_double(w[2]);
                node.value = to_double(w[3]);
                node.n_rows = static_cast<std::size_t>(to_int(w[4]));
            } else {
                throw FormatError("gbt model: bad node line");
            }
            tree.nodes.push_back(node);
        }
        if (tree.nodes.empty() || link_preorder(tree, 0) != tree.nodes.size()) {
            throw FormatError("gbt model: malformed tree");
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

} // namespace plantcast::gbt
