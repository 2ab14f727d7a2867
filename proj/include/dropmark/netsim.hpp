#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dropmark/dsg.hpp"
#include "dropmark/embedder.hpp"
#include "dropmark/loss_vector.hpp"

namespace dropmark {

// ---------------------------------------------------------------------------
// Bottleneck queue: produces realistic correlated loss vectors for fitting.
// ---------------------------------------------------------------------------

struct ArrivalSpec {
    enum class Kind { poisson, on_off };
    Kind kind = Kind::poisson;
    double rate_pps = 0.0;       // poisson
    double on_rate_pps = 0.0;    // on_off: arrival rate inside bursts
    double off_rate_pps = 0.0;   // on_off: arrival rate between bursts
    double mean_on_s = 0.0;      // exponential burst length
    double mean_off_s = 0.0;     // exponential gap length
};

struct PacketSizeSpec {
    enum class Kind { fixed, bimodal };
    Kind kind = Kind::fixed;
    std::int64_t bytes = 1500;
    std::int64_t small_bytes = 64;   // bimodal
    std::int64_t large_bytes = 1500;
    double small_prob = 0.5;
};

struct BottleneckConfig {
    int buffer_packets = 10;          // total system capacity, service slot included
    double service_bytes_per_s = 0.0;
    ArrivalSpec arrivals;
    PacketSizeSpec sizes;
    std::int64_t total_packets = 0;   // arrivals to simulate
};

struct BottleneckResult {
    BinaryLossVector losses;      // one bit per arrival, 1 = discarded
    std::int64_t served = 0;
    std::int64_t lost = 0;
    std::int64_t residual = 0;    // still queued when the last arrival was placed
};

BottleneckResult simulate_bottleneck(const BottleneckConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Relay path: source -> watermarker -> lossy segment -> relay -> fixed-latency
// hops -> capture point. The relay is a transport-layer proxy: it forwards
// in-order data only, asks the source to resend holes (three duplicate acks,
// fast retransmit), and flushes buffered packets in a burst once a hole fills.
// Every watermark drop therefore surfaces at the capture point as one
// inter-packet gap of roughly one source<->relay round trip.
// ---------------------------------------------------------------------------

struct PathConfig {
    double rate_bytes_per_s = 0.0;     // source target rate
    std::int64_t packet_bytes = 1500;
    std::int64_t flow_packets = 0;

    std::int64_t rtt1_ns = 80'000'000;          // source <-> first relay
    std::vector<std::int64_t> hop_latency_ns;   // one-way, per downstream hop
    double hop_jitter_sigma_ns = 0.0;           // gaussian, per hop, >= 0

    double random_loss_prob = 0.0;     // i.i.d. loss between watermarker and relay
    int dupack_threshold = 3;

    std::int64_t ramp_ns = 2'000'000'000;  // linear rate ramp at flow start
    double ramp_start_frac = 0.1;          // initial rate as a fraction of target

    std::int64_t burst_spacing_ns = 10'000;  // relay flush pacing

    // Source rate response to detected losses: multiplicative cut, linear
    // time-based recovery toward the target rate.
    double loss_rate_cut = 0.3;              // rate *= (1 - cut) per loss event
    double recovery_fraction_per_s = 0.5;    // recovered rate per second / target

    std::int64_t retransmit_timeout_ns = 0;  // 0 = 2 * rtt1 + 4 slots

    // Drop exactly these sequence numbers at the watermarker position,
    // independent of any keyed schedule (mechanism tests).
    std::vector<std::uint64_t> forced_drops;
};

struct PacketRecord {
    std::uint64_t seq = 0;
    std::int64_t t_ns = 0;
    std::int64_t size_bytes = 0;
};

struct PacketTrace {
    std::vector<PacketRecord> records;
    std::size_t size() const { return records.size(); }
};

struct PathResult {
    PacketTrace destination;
    std::vector<DropDecision> decisions;   // watermarker log (empty if disabled)
    std::int64_t watermark_drops = 0;
    std::int64_t random_losses = 0;
    std::int64_t retransmissions = 0;
    std::int64_t flow_end_ns = 0;
};

// Runs one flow. Watermarking is applied when `watermark` is non-null.
struct WatermarkSpec {
    SharedKey key;
    PeriodConfig period;
    GilbertParams params;
};

PathResult simulate_path(const PathConfig& cfg, const WatermarkSpec* watermark,
                         std::uint64_t seed);

// Delivered payload bytes divided by the capture-point time span.
double effective_throughput(const PacketTrace& trace);

// CSV: header then seq,timestamp_ns,size_bytes; timestamps strictly increasing.
void save_trace(const PacketTrace& trace, const std::string& path);
PacketTrace load_trace(const std::string& path);

}  // namespace dropmark
