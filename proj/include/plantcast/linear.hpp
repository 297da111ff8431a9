#pragma once

#include "plantcast/csv.hpp"
#include "plantcast/features.hpp"
#include "plantcast/matrix.hpp"

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace plantcast::linear {

// Persistence benchmark: the value at the anchor.
double last_value_predict(const features::Sample& sample);

struct LinearModel {
    std::vector<double> weights;  // on standardized features
    double bias = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_scales;
    std::string layout;  // feature layout tag, e.g. "features-v1/45"
};

std::string layout_tag(std::size_t feature_count);

// Standardizes the columns, then solves the ridge-stabilized normal equations
// (intercept unpenalized) by Cholesky. FitError on empty input.
LinearModel linear_fit(const Matrix& x, std::span<const double> y, double ridge = 1e-8);
LinearModel linear_fit(std::span<const features::Sample> samples, double ridge = 1e-8);

// ShapeError on a length mismatch or a non-finite feature.
double linear_predict(const LinearModel& model, std::span<const double> features);

// Solves A x = b for symmetric positive-definite A (n x n, row-major).
// FitError if A is not positive definite.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n);

void write_model(std::ostream& out, const LinearModel& model, const std::optional<Stamp>& stamp = std::nullopt);
LinearModel read_model(std::istream& in);

} // namespace plantcast::linear
