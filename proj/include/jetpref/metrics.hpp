#pragma once

#include <optional>
#include <span>
#include <vector>

namespace jetpref {

/// (oracle - model) / (oracle - random). Throws EvaluationError when the
/// denominator vanishes.
double orr(double mean_model, double mean_oracle, double mean_random);

/// Pearson correlation; empty when either side has zero variance or the
/// inputs have fewer than two points. Throws InputError on a length mismatch.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Kendall tau-b; empty when either side is entirely tied. Throws InputError
/// on a length mismatch or fewer than two points.
std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> v);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);
/// Q3 - Q1.
double iqr(std::vector<double> v);

}  // namespace jetpref
