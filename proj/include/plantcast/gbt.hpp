#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/features.hpp"
#include "plantcast/matrix.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace plantcast::gbt {

struct GBTParams {
    int n_trees = 300;
    int max_depth = 6;
    double learning_rate = 0.05;
    int min_samples_leaf = 5;

    // ConfigError naming the offending field.
    void validate() const;
};

// A split needs gain above this fraction of the tree's root residual sum of
// squares; anything smaller counts as zero gain.
inline constexpr double kMinRelativeGain = 1e-10;

// Candidate gains within this fraction of the node's residual sum of squares
// are ties, resolved by the lowest feature and then the lowest threshold.
inline constexpr double kSplitTieTolerance = 1e-12;

// Internal nodes send `x[feature] <= threshold` left. Leaves have feature == -1.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t n_rows = 0;

    bool is_leaf() const { return feature < 0; }
};

// Nodes in preorder; nodes[0] is the root.
struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
    int depth() const;
};

struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Best exact split of `rows` (all rows when empty). Candidates are midpoints
// between consecutive distinct values; both sides need `min_leaf` rows; ties
// (see kSplitTieTolerance) go to the lowest feature, then the lowest threshold. nullopt when no
// candidate beats `min_gain`.
std::optional<SplitChoice> best_split(const Matrix& x, std::span<const double> residuals, std::size_t min_leaf,
                                      double min_gain = 0.0);

// One squared-error regression tree; leaves hold mean residuals.
Tree fit_tree(const Matrix& x, std::span<const double> residuals, const GBTParams& params);

struct GBTModel {
    double base_prediction = 0.0;
    double learning_rate = 0.05;
    std::vector<Tree> trees;
    GBTParams params;
    std::size_t n_features = 0;
};

// `training_mse`, when given, receives the training MSE after 0..n_trees trees.
GBTModel gbt_fit(const Matrix& x, std::span<const double> y, const GBTParams& params,
                 std::vector<double>* training_mse = nullptr);
GBTModel gbt_fit(std::span<const features::Sample> samples, const GBTParams& params);

// ShapeError on a length mismatch or a non-finite feature.
double gbt_predict(const GBTModel& model, std::span<const double> features);

void write_model(std::ostream& out, const GBTModel& model, const std::optional<Stamp>& stamp = std::nullopt);
GBTModel read_model(std::istream& in);

} // namespace plantcast::gbt
