#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "dropmark/netsim.hpp"
#include "dropmark/stats.hpp"

using namespace dropmark;

namespace {

BottleneckConfig poisson_bottleneck(double rho, int k, std::int64_t total) {
    BottleneckConfig cfg;
    cfg.buffer_packets = k;
    cfg.service_bytes_per_s = 1'500'000.0;  // D = 1 ms per 1500 B packet
    cfg.sizes.kind = PacketSizeSpec::Kind::fixed;
    cfg.sizes.bytes = 1500;
    cfg.arrivals.kind = ArrivalSpec::Kind::poisson;
    cfg.arrivals.rate_pps = rho * 1000.0;
    cfg.total_packets = total;
    return cfg;
}

// Loss probability of the M/D/1/K queue (K = system capacity) from the
// embedded chain at departures: with a_j = Poisson(lambda * D) arrival
// probabilities, states 0..K-1 count packets left behind, and
// P_loss = 1 - 1 / (pi_0 + rho).
double mdk1_loss(double rho, int k) {
    std::vector<double> a(static_cast<std::size_t>(k) + 1);
    a[0] = std::exp(-rho);
    for (int j = 1; j <= k; ++j)
        a[static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(j - 1)] * rho / j;

    auto arrivals_capped = [&](int cap, int j) {
        // P(min(A, cap) == j)
        if (j < cap) return a[static_cast<std::size_t>(j)];
        double tail = 1.0;
        for (int i = 0; i < cap; ++i) tail -= a[static_cast<std::size_t>(i)];
        return tail;
    };

    std::vector<std::vector<double>> p(static_cast<std::size_t>(k),
                                       std::vector<double>(static_cast<std::size_t>(k), 0.0));
    for (int j = 0; j < k; ++j) p[0][static_cast<std::size_t>(j)] = arrivals_capped(k - 1, j);
    for (int i = 1; i < k; ++i)
        for (int add = 0; add <= k - i; ++add)
            p[static_cast<std::size_t>(i)][static_cast<std::size_t>(i - 1 + add)] +=
                arrivals_capped(k - i, add);

    std::vector<double> pi(static_cast<std::size_t>(k), 1.0 / k), next(pi);
    for (int iter = 0; iter < 200'000; ++iter) {
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            for (int i = 0; i < k; ++i)
                s += pi[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            next[static_cast<std::size_t>(j)] = s;
        }
        double diff = 0.0;
        for (int j = 0; j < k; ++j) diff += std::abs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]);
        pi.swap(next);
        if (diff < 1e-15) break;
    }
    return 1.0 - 1.0 / (pi[0] + rho);
}

PathConfig clean_path(std::int64_t packets) {
    PathConfig cfg;
    cfg.rate_bytes_per_s = 500'000.0;
    cfg.packet_bytes = 1500;
    cfg.flow_packets = packets;
    cfg.rtt1_ns = 80'000'000;
    cfg.hop_latency_ns = {10'000'000, 15'000'000};
    return cfg;
}

}  // namespace

TEST_CASE("bottleneck counters conserve packets and runs are seed-deterministic") {
    BottleneckConfig cfg = poisson_bottleneck(0.9, 8, 50'000);
    BottleneckResult a = simulate_bottleneck(cfg, 42);
    BottleneckResult b = simulate_bottleneck(cfg, 42);
    BottleneckResult c = simulate_bottleneck(cfg, 43);

    CHECK(a.losses.size() == 50'000);
    CHECK(a.served + a.lost + a.residual == 50'000);
    CHECK(a.lost == static_cast<std::int64_t>(a.losses.ones()));
    CHECK(a.losses.bits == b.losses.bits);
    CHECK(a.losses.bits != c.losses.bits);
    CHECK(a.lost > 0);

    CHECK_THROWS_AS(simulate_bottleneck(BottleneckConfig{}, 1), std::invalid_argument);
}

TEST_CASE("bottleneck loss rate matches the embedded-chain queue formula") {
    struct Case {
        double rho;
        int k;
    } cases[] = {{1.1, 10}, {0.9, 5}, {0.95, 8}};
    for (const auto& cs : cases) {
        INFO("rho ", cs.rho, " K ", cs.k);
        double exact = mdk1_loss(cs.rho, cs.k);
        BottleneckResult r = simulate_bottleneck(poisson_bottleneck(cs.rho, cs.k, 2'000'000), 7);
        double sim = r.losses.mean();
        // losses come in bursts, so allow several binomial standard errors
        double se = std::sqrt(exact * (1.0 - exact) / 2e6);
        CHECK(std::abs(sim - exact) < std::max(10.0 * se, 0.08 * exact));
    }
}

TEST_CASE("on/off arrivals produce burstier losses than poisson at equal load") {
    BottleneckConfig po = poisson_bottleneck(0.95, 8, 800'000);

    // same 950 pps mean, alternating 1.4x / 0.5x the service rate
    BottleneckConfig oo = po;
    oo.arrivals.kind = ArrivalSpec::Kind::on_off;
    oo.arrivals.on_rate_pps = 1'400.0;
    oo.arrivals.off_rate_pps = 500.0;
    oo.arrivals.mean_on_s = 0.05;
    oo.arrivals.mean_off_s = 0.05;

    BottleneckResult rp = simulate_bottleneck(po, 11);
    BottleneckResult ro = simulate_bottleneck(oo, 11);
    REQUIRE(rp.lost > 100);
    REQUIRE(ro.lost > 100);

    // burstiness penalty: a lot more loss from the same offered load
    CHECK(ro.losses.mean() > 2.0 * rp.losses.mean());

    // and the losses carry memory past the queue's own drain horizon
    Acf ap = autocorrelation(rp.losses, 50);
    Acf ao = autocorrelation(ro.losses, 50);
    CHECK(ao.rho[10] > ap.rho[10] + 0.02);

    auto dispersion = [](const BinaryLossVector& bits) {
        LossDensity d = loss_density(bits, 150);
        double mean = 0.0, var = 0.0;
        for (std::size_t k = 0; k < d.f.size(); ++k) mean += d.f[k] * static_cast<double>(k);
        for (std::size_t k = 0; k < d.f.size(); ++k) {
            double c = static_cast<double>(k) - mean;
            var += d.f[k] * c * c;
        }
        return var / mean;
    };
    CHECK(dispersion(ro.losses) > dispersion(rp.losses) + 0.5);
}

TEST_CASE("clean path delivers everything in order at the target rate") {
    PathConfig cfg = clean_path(20'000);
    PathResult r = simulate_path(cfg, nullptr, 5);

    REQUIRE(r.destination.size() == 20'000);
    CHECK(r.watermark_drops == 0);
    CHECK(r.random_losses == 0);
    CHECK(r.retransmissions == 0);
    CHECK(r.decisions.empty());

    for (std::size_t i = 0; i < r.destination.records.size(); ++i) {
        CHECK(r.destination.records[i].seq == i + 1);  // wire numbering starts at 1
        if (i > 0)
            CHECK(r.destination.records[i].t_ns > r.destination.records[i - 1].t_ns);
    }
    // ramp costs a little; steady state runs at the configured rate
    double thr = effective_throughput(r.destination);
    CHECK(thr > 0.9 * cfg.rate_bytes_per_s);
    CHECK(thr < 1.02 * cfg.rate_bytes_per_s);
}

TEST_CASE("a single forced drop surfaces as one gap of about one round trip") {
    PathConfig cfg = clean_path(8'000);
    cfg.forced_drops = {4'000};
    PathResult r = simulate_path(cfg, nullptr, 9);

    CHECK(r.watermark_drops == 1);
    CHECK(r.retransmissions == 1);
    REQUIRE(r.destination.size() == 8'000);  // recovered, nothing missing

    std::int64_t max_gap = 0;
    std::size_t at = 0;
    for (std::size_t i = 1; i < r.destination.records.size(); ++i) {
        std::int64_t gap = r.destination.records[i].t_ns - r.destination.records[i - 1].t_ns;
        if (gap > max_gap) {
            max_gap = gap;
            at = i;
        }
    }
    // relay stalls from the drop until the retransmit arrives: at least the
    // source round trip, plus a few dupack slots, well under two round trips
    std::int64_t slot = 3'000'000;
    CHECK(max_gap >= cfg.rtt1_ns);
    CHECK(max_gap < 2 * cfg.rtt1_ns + 8 * slot);
    // the stall sits right where the hole was
    CHECK(r.destination.records[at].seq >= 4'000);
    CHECK(r.destination.records[at - 1].seq + 4 >= 4'000);
}

TEST_CASE("burst drops are recovered sequentially, one round trip each") {
    PathConfig cfg = clean_path(8'000);
    cfg.forced_drops = {4'000, 4'001, 4'002};
    PathResult r = simulate_path(cfg, nullptr, 13);

    CHECK(r.watermark_drops == 3);
    CHECK(r.retransmissions >= 3);
    REQUIRE(r.destination.size() == 8'000);

    std::vector<std::uint64_t> seqs;
    for (const auto& rec : r.destination.records) seqs.push_back(rec.seq);
    std::vector<std::uint64_t> sorted = seqs;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i + 1);

    // total stall spans at least one round trip per dropped packet
    std::int64_t span = 0;
    for (std::size_t i = 1; i < r.destination.records.size(); ++i) {
        std::int64_t gap = r.destination.records[i].t_ns - r.destination.records[i - 1].t_ns;
        if (gap > cfg.rtt1_ns / 2) span += gap;
    }
    CHECK(span >= 3 * cfg.rtt1_ns);
}

TEST_CASE("random segment loss is recovered and counted") {
    PathConfig cfg = clean_path(40'000);
    cfg.random_loss_prob = 2e-3;
    PathResult r = simulate_path(cfg, nullptr, 21);

    CHECK(r.random_losses > 40);   // ~80 expected
    CHECK(r.random_losses < 160);
    CHECK(r.retransmissions >= r.random_losses);
    REQUIRE(r.destination.size() == 40'000);
    double thr = effective_throughput(r.destination);
    CHECK(thr > 0.75 * cfg.rate_bytes_per_s);
}

TEST_CASE("downstream hops shift arrival times by their combined latency") {
    PathConfig base = clean_path(2'000);
    base.hop_latency_ns = {};
    PathConfig shifted = base;
    shifted.hop_latency_ns = {10'000'000, 15'000'000};

    PathResult a = simulate_path(base, nullptr, 3);
    PathResult b = simulate_path(shifted, nullptr, 3);
    REQUIRE(a.destination.size() == b.destination.size());
    for (std::size_t i = 0; i < a.destination.records.size(); ++i)
        CHECK(b.destination.records[i].t_ns - a.destination.records[i].t_ns == 25'000'000);
}

TEST_CASE("watermarked path drops per schedule and still delivers the flow") {
    PathConfig cfg = clean_path(30'000);
    WatermarkSpec wm;
    wm.key = SharedKey::from_strings("netsim-wm", "wm-1");
    wm.period.t0_ns = 0;
    wm.period.period_ns = 30'000'000'000;
    wm.period.rate_bytes_per_s = cfg.rate_bytes_per_s;
    wm.period.packet_bytes = cfg.packet_bytes;
    wm.params = GilbertParams::uniform(3, 1e-3);

    PathResult r = simulate_path(cfg, &wm, 17);
    CHECK(r.decisions.size() == 30'000);
    CHECK(r.watermark_drops > 5);
    CHECK(r.watermark_drops < 150);
    REQUIRE(r.destination.size() == 30'000);

    std::int64_t flagged = 0;
    for (const auto& d : r.decisions) flagged += d.dropped ? 1 : 0;
    CHECK(flagged == r.watermark_drops);

    // same seed, same key: identical run
    PathResult r2 = simulate_path(cfg, &wm, 17);
    REQUIRE(r2.destination.size() == r.destination.size());
    CHECK(r2.destination.records.back().t_ns == r.destination.records.back().t_ns);
}

TEST_CASE("trace csv round-trips and rejects non-increasing timestamps") {
    PacketTrace t;
    t.records = {{0, 100, 1500}, {1, 200, 1500}, {2, 350, 64}};
    const char* path = "trace_roundtrip.csv";
    save_trace(t, path);
    PacketTrace u = load_trace(path);
    std::remove(path);
    REQUIRE(u.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(u.records[i].seq == t.records[i].seq);
        CHECK(u.records[i].t_ns == t.records[i].t_ns);
        CHECK(u.records[i].size_bytes == t.records[i].size_bytes);
    }

    std::FILE* f = std::fopen(path, "w");
    std::fputs("seq,timestamp_ns,size_bytes\n1,200,1500\n2,200,1500\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_trace(path), std::runtime_error);
    std::remove(path);
}

TEST_CASE("effective throughput is bytes over the observed span") {
    PacketTrace t;
    t.records = {{0, 0, 1000}, {1, 1'000'000'000, 3000}};
    // 4000 bytes across one second
    CHECK(effective_throughput(t) == doctest::Approx(4000.0));
    PacketTrace one;
    one.records = {{0, 0, 1000}};
    CHECK_THROWS_AS(effective_throughput(one), std::invalid_argument);
}
