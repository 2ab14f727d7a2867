#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dropmark/stats.hpp"

using namespace dropmark;

namespace {

BinaryLossVector random_bits(std::size_t n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BinaryLossVector v;
    v.bits.resize(n);
    for (auto& b : v.bits)
        b = (static_cast<double>(rng() >> 11) * 0x1.0p-53) < p ? 1 : 0;
    return v;
}

}  // namespace

TEST_CASE("loss density counts whole blocks and discards the remainder") {
    BinaryLossVector v;
    v.bits = {1, 1, 0,  0, 0, 0,  1, 0, 1,  1, 1};  // 3 blocks of 3, 2 left over
    LossDensity d = loss_density(v, 3);
    CHECK(d.q == 3);
    CHECK(d.blocks == 3);
    REQUIRE(d.f.size() == 4);
    CHECK(d.f[0] == doctest::Approx(1.0 / 3.0));
    CHECK(d.f[1] == doctest::Approx(0.0));
    CHECK(d.f[2] == doctest::Approx(2.0 / 3.0));
    CHECK(d.f[3] == doctest::Approx(0.0));

    CHECK_THROWS_AS(loss_density(v, 0), std::invalid_argument);
    BinaryLossVector tiny;
    tiny.bits = {1};
    CHECK_THROWS_AS(loss_density(tiny, 2), std::invalid_argument);  // zero blocks
}

TEST_CASE("density sums to one and cdf ends at one") {
    BinaryLossVector v = random_bits(100'000, 0.02, 11);
    LossDensity d = loss_density(v, 150);
    double sum = std::accumulate(d.f.begin(), d.f.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    std::vector<double> cdf = loss_cdf(d);
    CHECK(std::abs(cdf.back() - 1.0) < 1e-12);
    for (std::size_t i = 1; i < cdf.size(); ++i) CHECK(cdf[i] >= cdf[i - 1]);
}

TEST_CASE("autocorrelation matches a hand computation") {
    BinaryLossVector v;
    v.bits = {1, 0, 1, 0};  // mean 1/2, c0 = (4 * 1/4) / 3 = 1/3
    Acf a = autocorrelation(v, 2);
    CHECK(a.mean == doctest::Approx(0.5));
    CHECK(a.c0 == doctest::Approx(1.0 / 3.0));
    REQUIRE(a.rho.size() == 3);
    CHECK(a.rho[0] == doctest::Approx(1.0));
    // c1 = (3 * (-1/4)) / 3 = -1/4; rho1 = -3/4
    CHECK(a.rho[1] == doctest::Approx(-0.75));
    // c2 = (2 * 1/4) / 3 = 1/6; rho2 = 1/2
    CHECK(a.rho[2] == doctest::Approx(0.5));
}

TEST_CASE("constant sequences have no autocorrelation to normalize") {
    BinaryLossVector v;
    v.bits = {1, 1, 1, 1};
    CHECK_THROWS_AS(autocorrelation(v, 1), std::runtime_error);
}

TEST_CASE("parallel kernels equal the serial reference") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        BinaryLossVector v = random_bits(250'000, 0.01, seed);

        LossDensity dp = loss_density(v, 150);
        LossDensity ds = serial::loss_density(v, 150);
        REQUIRE(dp.f.size() == ds.f.size());
        CHECK(dp.blocks == ds.blocks);
        for (std::size_t i = 0; i < dp.f.size(); ++i) CHECK(dp.f[i] == ds.f[i]);

        Acf ap = autocorrelation(v, 64);
        Acf as = serial::autocorrelation(v, 64);
        CHECK(ap.mean == as.mean);
        CHECK(ap.c0 == doctest::Approx(as.c0).epsilon(1e-12));
        REQUIRE(ap.rho.size() == as.rho.size());
        for (std::size_t h = 0; h < ap.rho.size(); ++h)
            CHECK(ap.rho[h] == doctest::Approx(as.rho[h]).epsilon(1e-9));
    }
}

TEST_CASE("iid sequences decorrelate fast") {
    BinaryLossVector v = random_bits(400'000, 0.05, 99);
    Acf a = autocorrelation(v, 20);
    for (std::size_t h = 1; h < a.rho.size(); ++h) CHECK(std::abs(a.rho[h]) < 0.01);
}

TEST_CASE("ks distance is the max cdf gap; identical inputs give zero") {
    BinaryLossVector v = random_bits(90'000, 0.03, 5);
    LossDensity d = loss_density(v, 150);
    KsResult same = ks_test(d, d, 0.01);
    CHECK(same.distance == 0.0);
    CHECK(same.accepted);

    // hand case: densities (1,0) vs (0,1) over q=1 have cdf gap 1 at k=0
    LossDensity a, b;
    a.q = b.q = 1;
    a.blocks = b.blocks = 10;
    a.f = {1.0, 0.0};
    b.f = {0.0, 1.0};
    KsResult far = ks_test(a, b, 0.5);
    CHECK(far.distance == doctest::Approx(1.0));
    CHECK_FALSE(far.accepted);

    LossDensity c = a;
    c.q = 2;
    c.f = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(ks_test(a, c, 0.5), std::invalid_argument);
}

TEST_CASE("ks critical value reproduces the tabulated coefficients") {
    // c(conf) = sqrt(-ln((1-conf)/2)/2)
    CHECK(ks_critical(100, 100, 0.99) ==
          doctest::Approx(1.6276 * std::sqrt(200.0 / 10'000.0)).epsilon(1e-3));
    CHECK(ks_critical(100, 100, 0.95) ==
          doctest::Approx(1.3581 * std::sqrt(200.0 / 10'000.0)).epsilon(1e-3));
    CHECK(ks_critical(400, 100, 0.95) ==
          doctest::Approx(1.3581 * std::sqrt(500.0 / 40'000.0)).epsilon(1e-3));
    CHECK_THROWS_AS(ks_critical(0, 10, 0.95), std::invalid_argument);
    CHECK_THROWS_AS(ks_critical(10, 10, 1.0), std::invalid_argument);
}

TEST_CASE("distinguishable processes fail the ks test at matched scale") {
    // same mean, different burst structure: iid vs paired ones
    BinaryLossVector iid = random_bits(300'000, 0.04, 21);
    std::mt19937_64 rng(22);
    BinaryLossVector paired;
    paired.bits.assign(300'000, 0);
    for (std::size_t i = 0; i + 1 < paired.bits.size(); i += 2)
        if ((static_cast<double>(rng() >> 11) * 0x1.0p-53) < 0.04) {
            paired.bits[i] = 1;
            paired.bits[i + 1] = 1;
        }
    LossDensity di = loss_density(iid, 150);
    LossDensity dp = loss_density(paired, 150);
    double eps = ks_critical(di.blocks, dp.blocks, 0.99);
    KsResult r = ks_test(di, dp, eps);
    CHECK_FALSE(r.accepted);
}
