#include "dropmark/stats.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dropmark {

namespace {

void check_density_args(const BinaryLossVector& v, int q) {
    if (q < 1) throw std::invalid_argument("block size q must be >= 1");
    if (v.size() < static_cast<std::size_t>(q))
        throw std::invalid_argument("need at least one full block of q events");
}

void check_acf_args(const BinaryLossVector& v, int max_lag) {
    if (v.size() < 2) throw std::invalid_argument("need at least two events");
    if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= v.size())
        throw std::invalid_argument("max_lag must lie in [0, N)");
}

}  // namespace

LossDensity loss_density(const BinaryLossVector& v, int q) {
    check_density_args(v, q);
    const std::int64_t blocks = static_cast<std::int64_t>(v.size()) / q;

    std::vector<int> per_block(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < blocks; ++b) {
        int ones = 0;
        const std::size_t base = static_cast<std::size_t>(b) * static_cast<std::size_t>(q);
        for (int j = 0; j < q; ++j) ones += v.bits[base + static_cast<std::size_t>(j)];
        per_block[static_cast<std::size_t>(b)] = ones;
    }

    LossDensity d;
    d.q = q;
    d.blocks = static_cast<std::size_t>(blocks);
    d.f.assign(static_cast<std::size_t>(q) + 1, 0.0);
    for (int ones : per_block) d.f[static_cast<std::size_t>(ones)] += 1.0;
    for (double& x : d.f) x /= static_cast<double>(blocks);
    return d;
}

Acf autocorrelation(const BinaryLossVector& v, int max_lag) {
    check_acf_args(v, max_lag);
    const std::size_t n = v.size();

    double sum = 0.0;
    for (std::uint8_t b : v.bits) sum += b;
    const double mean = sum / static_cast<double>(n);

    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = v.bits[i] - mean;

    std::vector<double> c(static_cast<std::size_t>(max_lag) + 1, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int h = 0; h <= max_lag; ++h) {
        double acc = 0.0;
        const std::size_t upper = n - static_cast<std::size_t>(h);
        for (std::size_t i = 0; i < upper; ++i)
            acc += centered[i] * centered[i + static_cast<std::size_t>(h)];
        c[static_cast<std::size_t>(h)] = acc / static_cast<double>(n - 1);
    }

    if (c[0] == 0.0) throw std::runtime_error("zero-variance sequence has no autocorrelation");

    Acf a;
    a.mean = mean;
    a.c0 = c[0];
    a.rho.resize(c.size());
    for (std::size_t h = 0; h < c.size(); ++h) a.rho[h] = c[h] / c[0];
    return a;
}

std::vector<double> loss_cdf(const LossDensity& d) {
    std::vector<double> cdf(d.f.size());
    double run = 0.0;
    for (std::size_t i = 0; i < d.f.size(); ++i) {
        run += d.f[i];
        cdf[i] = run;
    }
    return cdf;
}

KsResult ks_test(const LossDensity& a, const LossDensity& b, double epsilon) {
    if (a.q != b.q) throw std::invalid_argument("densities use different block sizes");
    auto ca = loss_cdf(a);
    auto cb = loss_cdf(b);
    double dist = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) dist = std::max(dist, std::abs(ca[i] - cb[i]));
    KsResult r;
    r.distance = dist;
    r.epsilon = epsilon;
    r.accepted = dist < epsilon;
    return r;
}

double ks_critical(std::size_t n_a, std::size_t n_b, double confidence) {
    if (n_a < 1 || n_b < 1) throw std::invalid_argument("sample counts must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("confidence must lie in (0, 1)");
    double c = std::sqrt(-std::log((1.0 - confidence) / 2.0) / 2.0);
    double na = static_cast<double>(n_a);
    double nb = static_cast<double>(n_b);
    return c * std::sqrt((na + nb) / (na * nb));
}

namespace serial {

LossDensity loss_density(const BinaryLossVector& v, int q) {
    check_density_args(v, q);
    const std::size_t blocks = v.size() / static_cast<std::size_t>(q);
    LossDensity d;
    d.q = q;
    d.blocks = blocks;
    d.f.assign(static_cast<std::size_t>(q) + 1, 0.0);
    std::size_t i = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        int ones = 0;
        for (int j = 0; j < q; ++j) ones += v.bits[i++];
        d.f[static_cast<std::size_t>(ones)] += 1.0;
    }
    for (double& x : d.f) x /= static_cast<double>(blocks);
    return d;
}

Acf autocorrelation(const BinaryLossVector& v, int max_lag) {
    check_acf_args(v, max_lag);
    const std::size_t n = v.size();
    double sum = 0.0;
    for (std::uint8_t b : v.bits) sum += b;
    const double mean = sum / static_cast<double>(n);

    Acf a;
    a.mean = mean;
    a.rho.assign(static_cast<std::size_t>(max_lag) + 1, 0.0);
    std::vector<double> c(a.rho.size(), 0.0);
    for (int h = 0; h <= max_lag; ++h) {
        double acc = 0.0;
        for (std::size_t i = 0; i + static_cast<std::size_t>(h) < n; ++i)
            acc += (v.bits[i] - mean) * (v.bits[i + static_cast<std::size_t>(h)] - mean);
        c[static_cast<std::size_t>(h)] = acc / static_cast<double>(n - 1);
    }
    if (c[0] == 0.0) throw std::runtime_error("zero-variance sequence has no autocorrelation");
    a.c0 = c[0];
    for (std::size_t h = 0; h < c.size(); ++h) a.rho[h] = c[h] / c[0];
    return a;
}

}  // namespace serial

}  // namespace dropmark
