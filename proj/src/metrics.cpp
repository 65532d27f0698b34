#include "jetpref/metrics.hpp"

#include "jetpref/error.hpp"

#include <algorithm>
#include <cmath>

namespace jetpref {

double orr(double mean_model, double mean_oracle, double mean_random) {
    const double den = mean_oracle - mean_random;
    if (!(std::abs(den) > 1e-12 * std::max(1.0, std::abs(mean_oracle)))) {
        throw EvaluationError("ORR undefined: oracle and random policies have equal mean return");
    }
    return (mean_oracle - mean_model) / den;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("pearson: inputs differ in length");
    const std::size_t n = a.size();
    if (n < 2) return std::nullopt;
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double da = a[k] - ma, db = b[k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("kendall_tau: inputs differ in length");
    if (a.size() < 2) throw InputError("kendall_tau needs at least two points");
    const std::size_t n = a.size();
    // O(n^2) pair scan; evaluation sets are a few hundred trajectories.
    long long concordant = 0, discordant = 0, tie_a = 0, tie_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0) continue;
            if (da == 0.0) {
                ++tie_a;
            } else if (db == 0.0) {
                ++tie_b;
            } else if ((da > 0.0) == (db > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double n1 = static_cast<double>(concordant + discordant + tie_b);  // pairs untied in a
    const double n2 = static_cast<double>(concordant + discordant + tie_a);  // pairs untied in b
    if (n1 == 0.0 || n2 == 0.0) return std::nullopt;
    return static_cast<double>(concordant - discordant) / std::sqrt(n1 * n2);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw InputError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double iqr(std::vector<double> v) { return quantile(v, 0.75) - quantile(v, 0.25); }

}  // namespace jetpref
