#pragma once

#include <cstddef>
#include <vector>

#include "dropmark/loss_vector.hpp"

namespace dropmark {

// Distribution of per-block loss counts: events are cut into floor(N/q)
// non-overlapping blocks of q (remainder discarded), f[k] = fraction of
// blocks containing exactly k ones, k = 0..q.
struct LossDensity {
    int q = 0;
    std::size_t blocks = 0;
    std::vector<double> f;  // size q + 1, sums to 1
};

struct Acf {
    double mean = 0.0;
    double c0 = 0.0;              // lag-0 autocovariance (1/(N-1) norm)
    std::vector<double> rho;      // rho[h], h = 0..max_lag; rho[0] == 1
};

struct KsResult {
    double distance = 0.0;
    double epsilon = 0.0;
    bool accepted = false;  // distance < epsilon, strict
};

LossDensity loss_density(const BinaryLossVector& v, int q);

// Sample autocovariance c_h = (1/(N-1)) * sum_{i=1}^{N-h} (b_i - m)(b_{i+h} - m),
// normalized to rho_h = c_h / c_0. Throws on zero variance.
Acf autocorrelation(const BinaryLossVector& v, int max_lag);

// Running sum of a density; last entry 1 within rounding.
std::vector<double> loss_cdf(const LossDensity& d);

// Two-sample Kolmogorov-Smirnov acceptance: max CDF gap vs. threshold.
KsResult ks_test(const LossDensity& a, const LossDensity& b, double epsilon);

// epsilon = c(conf) * sqrt((n_a + n_b) / (n_a * n_b)),
// c = sqrt(-ln((1 - conf) / 2) / 2); c(0.99) = 1.628, c(0.95) = 1.358.
double ks_critical(std::size_t n_a, std::size_t n_b, double confidence);

// Single-threaded reference kernels, kept for equivalence tests and the
// benchmark target.
namespace serial {
LossDensity loss_density(const BinaryLossVector& v, int q);
Acf autocorrelation(const BinaryLossVector& v, int max_lag);
}  // namespace serial

}  // namespace dropmark
