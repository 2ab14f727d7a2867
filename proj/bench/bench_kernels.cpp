#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "dropmark/detector.hpp"
#include "dropmark/loss_vector.hpp"
#include "dropmark/stats.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& f, int reps) {
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) f();
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    const std::size_t n = 2'000'000;
    std::mt19937_64 rng(42);

    dropmark::BinaryLossVector losses;
    losses.bits.resize(n);
    for (auto& b : losses.bits) b = (rng() % 1000) < 6 ? 1 : 0;

    std::vector<std::int64_t> ipd(n);
    for (auto& x : ipd) x = 500'000 + static_cast<std::int64_t>(rng() % 200'000);
    for (std::size_t i = 0; i < n; i += 997) ipd[i] = 90'000'000;

    const int reps = 3;

    double density_par = time_ms([&] { dropmark::loss_density(losses, 150); }, reps);
    double density_ser = time_ms([&] { dropmark::serial::loss_density(losses, 150); }, reps);
    std::printf("loss_density       n=%zu  parallel %8.2f ms   serial %8.2f ms   x%.2f\n", n,
                density_par, density_ser, density_ser / density_par);

    double acf_par = time_ms([&] { dropmark::autocorrelation(losses, 100); }, reps);
    double acf_ser = time_ms([&] { dropmark::serial::autocorrelation(losses, 100); }, reps);
    std::printf("autocorrelation    n=%zu  parallel %8.2f ms   serial %8.2f ms   x%.2f\n", n,
                acf_par, acf_ser, acf_ser / acf_par);

    std::vector<std::size_t> a, b;
    double outl_deque = time_ms([&] { a = dropmark::find_outliers(ipd, 0.8, 300); }, reps);
    double outl_scan = time_ms([&] { b = dropmark::find_outliers_scan(ipd, 0.8, 300); }, reps);
    std::printf("find_outliers      n=%zu  deque    %8.2f ms   scan   %8.2f ms   x%.2f\n", n,
                outl_deque, outl_scan, outl_scan / outl_deque);
    std::printf("outlier agreement: %s (%zu vs %zu)\n", a == b ? "identical" : "DIFFERENT",
                a.size(), b.size());
    return a == b ? 0 : 1;
}
