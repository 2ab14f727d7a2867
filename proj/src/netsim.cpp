#include "dropmark/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dropmark {

namespace {

// Uniform in [0, 1) from the top 53 bits; transforms below stay explicit so
// traces do not depend on library distribution internals.
double unit_real(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double exp_interval(std::mt19937_64& rng, double rate_per_s) {
    // rate 0 => never
    if (rate_per_s <= 0.0) return std::numeric_limits<double>::infinity();
    double u = unit_real(rng);
    return -std::log1p(-u) / rate_per_s;
}

double gaussian(std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return 0.0;
    double u1 = unit_real(rng);
    double u2 = unit_real(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Bottleneck queue
// ---------------------------------------------------------------------------

BottleneckResult simulate_bottleneck(const BottleneckConfig& cfg, std::uint64_t seed) {
    if (cfg.buffer_packets < 1) throw std::invalid_argument("buffer must hold >= 1 packet");
    if (cfg.service_bytes_per_s <= 0.0) throw std::invalid_argument("service rate must be positive");
    if (cfg.total_packets < 1) throw std::invalid_argument("need at least one arrival");

    std::mt19937_64 rng(seed);

    const bool on_off = cfg.arrivals.kind == ArrivalSpec::Kind::on_off;
    if (!on_off && cfg.arrivals.rate_pps <= 0.0)
        throw std::invalid_argument("arrival rate must be positive");

    bool phase_on = true;
    double phase_end = on_off ? exp_interval(rng, 1.0 / std::max(cfg.arrivals.mean_on_s, 1e-12))
                              : std::numeric_limits<double>::infinity();

    BottleneckResult res;
    res.losses.bits.reserve(static_cast<std::size_t>(cfg.total_packets));

    // Departure times of packets currently in the system (front = in service).
    std::deque<double> system;
    double last_departure = 0.0;
    double t = 0.0;

    for (std::int64_t i = 0; i < cfg.total_packets; ++i) {
        // Next arrival, crossing on/off phase boundaries memorylessly.
        for (;;) {
            double rate = on_off ? (phase_on ? cfg.arrivals.on_rate_pps : cfg.arrivals.off_rate_pps)
                                 : cfg.arrivals.rate_pps;
            double dt = exp_interval(rng, rate);
            if (t + dt <= phase_end) {
                t += dt;
                break;
            }
            t = phase_end;
            phase_on = !phase_on;
            double mean = phase_on ? cfg.arrivals.mean_on_s : cfg.arrivals.mean_off_s;
            phase_end = t + exp_interval(rng, 1.0 / std::max(mean, 1e-12));
        }

        while (!system.empty() && system.front() <= t) system.pop_front();

        std::int64_t bytes = cfg.sizes.bytes;
        if (cfg.sizes.kind == PacketSizeSpec::Kind::bimodal)
            bytes = unit_real(rng) < cfg.sizes.small_prob ? cfg.sizes.small_bytes
                                                          : cfg.sizes.large_bytes;

        if (static_cast<int>(system.size()) >= cfg.buffer_packets) {
            res.losses.bits.push_back(1);
            ++res.lost;
        } else {
            double service = static_cast<double>(bytes) / cfg.service_bytes_per_s;
            double start = system.empty() ? t : std::max(t, last_departure);
            last_departure = std::max(start, last_departure) + service;
            system.push_back(last_departure);
            res.losses.bits.push_back(0);
        }
    }
    res.residual = static_cast<std::int64_t>(system.size());
    res.served = cfg.total_packets - res.lost - res.residual;
    return res;
}

// ---------------------------------------------------------------------------
// Relay path
// ---------------------------------------------------------------------------

namespace {

enum class Ev { send, relay_arrive, ack_arrive, retransmit, rto_check };

struct Event {
    std::int64_t t;
    std::uint64_t id;  // insertion order, breaks time ties deterministically
    Ev kind;
    std::uint64_t seq;
    bool retx;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.id > b.id;
    }
};

struct PathSim {
    const PathConfig& cfg;
    std::mt19937_64 rng;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
    std::uint64_t next_event_id = 0;

    // Source.
    std::uint64_t next_new_seq = 1;
    double aimd_base;          // rate right after the last cut
    std::int64_t aimd_t0 = 0;  // when the last cut happened
    std::int64_t last_progress = 0;
    std::uint64_t highest_acked = 0;
    bool rto_armed = false;
    std::int64_t rto_ns;
    std::int64_t slot;

    // Watermark segment.
    std::unique_ptr<Embedder> embedder;
    std::set<std::uint64_t> forced;

    // Relay.
    std::uint64_t expected = 1;
    std::map<std::uint64_t, std::int64_t> buffered;  // seq -> relay arrival time
    int dupacks = 0;
    std::int64_t dupack_guard = 0;
    std::int64_t last_release = -1;

    // Destination.
    std::int64_t downstream_ns = 0;
    std::int64_t last_dest = -1;

    PathResult res;
    std::uint64_t events_processed = 0;

    PathSim(const PathConfig& c, const WatermarkSpec* wm, std::uint64_t seed)
        : cfg(c), rng(seed) {
        if (cfg.rate_bytes_per_s <= 0.0) throw std::invalid_argument("source rate must be positive");
        if (cfg.packet_bytes <= 0) throw std::invalid_argument("packet size must be positive");
        if (cfg.flow_packets < 2) throw std::invalid_argument("flow needs at least two packets");
        if (cfg.rtt1_ns <= 0) throw std::invalid_argument("rtt must be positive");
        if (cfg.dupack_threshold < 1) throw std::invalid_argument("dupack threshold must be >= 1");
        if (!(cfg.random_loss_prob >= 0.0 && cfg.random_loss_prob < 1.0))
            throw std::invalid_argument("random loss probability must lie in [0, 1)");

        slot = std::llround(1e9 * static_cast<double>(cfg.packet_bytes) / cfg.rate_bytes_per_s);
        if (slot < 1) throw std::invalid_argument("packet slot rounds to zero ns");
        rto_ns = cfg.retransmit_timeout_ns > 0 ? cfg.retransmit_timeout_ns
                                               : 2 * cfg.rtt1_ns + 4 * slot;
        aimd_base = cfg.rate_bytes_per_s;
        for (std::int64_t h : cfg.hop_latency_ns) downstream_ns += h;
        forced.insert(cfg.forced_drops.begin(), cfg.forced_drops.end());
        if (wm) embedder = std::make_unique<Embedder>(wm->key, wm->period, wm->params);
    }

    void push(std::int64_t t, Ev kind, std::uint64_t seq = 0, bool retx = false) {
        queue.push(Event{t, next_event_id++, kind, seq, retx});
    }

    double rate_at(std::int64_t t) const {
        const double target = cfg.rate_bytes_per_s;
        double cap = target;
        if (cfg.ramp_ns > 0 && t < cfg.ramp_ns) {
            double frac = cfg.ramp_start_frac +
                          (1.0 - cfg.ramp_start_frac) * static_cast<double>(t) /
                              static_cast<double>(cfg.ramp_ns);
            cap = target * frac;
        }
        double recovered = aimd_base + cfg.recovery_fraction_per_s * target *
                                           (static_cast<double>(t - aimd_t0) * 1e-9);
        return std::max(std::min(cap, std::min(recovered, target)), 0.01 * target);
    }

    void cut_rate(std::int64_t t) {
        aimd_base = std::max(rate_at(t) * (1.0 - cfg.loss_rate_cut),
                             0.05 * cfg.rate_bytes_per_s);
        aimd_t0 = t;
    }

    void arm_rto(std::int64_t t) {
        if (!rto_armed) {
            rto_armed = true;
            push(t + rto_ns, Ev::rto_check);
        }
    }

    // Watermarker + lossy segment; schedules the relay arrival if the packet
    // survives. Returns true when the packet was watermark-dropped.
    void transmit(std::uint64_t seq, std::int64_t t, bool retx) {
        bool wm_dropped = false;
        if (!retx && forced.count(seq)) {
            forced.erase(seq);
            wm_dropped = true;
            ++res.watermark_drops;
        } else if (embedder) {
            DropDecision d = embedder->on_packet(PacketEvent{seq, t, cfg.packet_bytes});
            if (!retx) res.decisions.push_back(d);
            if (d.dropped) {
                wm_dropped = true;
                ++res.watermark_drops;
            }
        }
        if (wm_dropped) return;
        if (cfg.random_loss_prob > 0.0 && unit_real(rng) < cfg.random_loss_prob) {
            ++res.random_losses;
            return;
        }
        push(t + cfg.rtt1_ns / 2, Ev::relay_arrive, seq, retx);
    }

    void release(std::uint64_t seq, std::int64_t at) {
        last_release = std::max(at, last_release + 1);
        std::int64_t dest = last_release + downstream_ns;
        for (std::size_t h = 0; h < cfg.hop_latency_ns.size(); ++h)
            dest += std::llround(gaussian(rng, cfg.hop_jitter_sigma_ns));
        last_dest = std::max(dest, last_dest + 1);
        res.destination.records.push_back(PacketRecord{seq, last_dest, cfg.packet_bytes});
    }

    void on_relay_arrive(const Event& ev) {
        if (ev.seq < expected || buffered.count(ev.seq)) return;  // duplicate
        if (ev.seq == expected) {
            release(expected, ev.t);
            ++expected;
            std::int64_t rel = last_release;
            while (!buffered.empty() && buffered.begin()->first == expected) {
                rel += cfg.burst_spacing_ns;
                release(expected, rel);
                buffered.erase(buffered.begin());
                ++expected;
            }
            dupacks = 0;
            dupack_guard = 0;
            push(ev.t + cfg.rtt1_ns / 2, Ev::ack_arrive, expected - 1);
            return;
        }
        // Out of order: buffer and count a duplicate ack for the hole.
        buffered.emplace(ev.seq, ev.t);
        if (ev.t >= dupack_guard) {
            ++dupacks;
            if (dupacks >= cfg.dupack_threshold) {
                dupacks = 0;
                dupack_guard = ev.t + cfg.rtt1_ns;
                push(ev.t + cfg.rtt1_ns / 2, Ev::retransmit, expected);
            }
        }
    }

    void on_send(const Event& ev) {
        if (next_new_seq > static_cast<std::uint64_t>(cfg.flow_packets)) return;
        std::uint64_t seq = next_new_seq++;
        transmit(seq, ev.t, false);
        arm_rto(ev.t);
        if (next_new_seq <= static_cast<std::uint64_t>(cfg.flow_packets)) {
            double r = rate_at(ev.t);
            std::int64_t dt = r >= cfg.rate_bytes_per_s
                                  ? slot
                                  : std::llround(1e9 * static_cast<double>(cfg.packet_bytes) / r);
            push(ev.t + std::max<std::int64_t>(dt, 1), Ev::send);
        }
    }

    void on_retransmit(const Event& ev) {
        if (ev.seq <= highest_acked) return;  // already repaired
        cut_rate(ev.t);
        ++res.retransmissions;
        transmit(ev.seq, ev.t, true);
        arm_rto(ev.t);
    }

    void on_ack(const Event& ev) {
        if (ev.seq > highest_acked) {
            highest_acked = ev.seq;
            last_progress = ev.t;
        }
    }

    void on_rto(const Event& ev) {
        rto_armed = false;
        if (highest_acked >= static_cast<std::uint64_t>(cfg.flow_packets)) return;
        bool all_sent = next_new_seq > static_cast<std::uint64_t>(cfg.flow_packets);
        std::int64_t deadline = last_progress + rto_ns;
        if (ev.t < deadline) {
            rto_armed = true;
            push(deadline, Ev::rto_check);
            return;
        }
        if (all_sent || highest_acked + 1 < next_new_seq) {
            cut_rate(ev.t);
            ++res.retransmissions;
            transmit(highest_acked + 1, ev.t, true);
            last_progress = ev.t;
        }
        arm_rto(ev.t);
    }

    PathResult run() {
        const std::uint64_t max_events =
            200 * static_cast<std::uint64_t>(cfg.flow_packets) + 100'000;
        double r0 = rate_at(0);
        push(std::llround(1e9 * static_cast<double>(cfg.packet_bytes) / r0), Ev::send);
        while (!queue.empty()) {
            Event ev = queue.top();
            queue.pop();
            if (++events_processed > max_events)
                throw std::runtime_error("path simulation exceeded its event budget");
            switch (ev.kind) {
                case Ev::send: on_send(ev); break;
                case Ev::relay_arrive: on_relay_arrive(ev); break;
                case Ev::ack_arrive: on_ack(ev); break;
                case Ev::retransmit: on_retransmit(ev); break;
                case Ev::rto_check: on_rto(ev); break;
            }
        }
        if (!res.destination.records.empty()) res.flow_end_ns = last_dest;
        return std::move(res);
    }
};

}  // namespace

PathResult simulate_path(const PathConfig& cfg, const WatermarkSpec* watermark,
                         std::uint64_t seed) {
    PathSim sim(cfg, watermark, seed);
    return sim.run();
}

double effective_throughput(const PacketTrace& trace) {
    if (trace.records.size() < 2)
        throw std::invalid_argument("need at least two packets to measure throughput");
    std::int64_t span = trace.records.back().t_ns - trace.records.front().t_ns;
    if (span <= 0) throw std::invalid_argument("trace span is not positive");
    std::int64_t bytes = 0;
    for (const auto& r : trace.records) bytes += r.size_bytes;
    return static_cast<double>(bytes) * 1e9 / static_cast<double>(span);
}

void save_trace(const PacketTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "seq,timestamp_ns,size_bytes\n";
    for (const auto& r : trace.records)
        out << r.seq << ',' << r.t_ns << ',' << r.size_bytes << '\n';
}

PacketTrace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "seq,timestamp_ns,size_bytes")
        throw std::runtime_error(path + ": missing trace header");
    PacketTrace trace;
    std::int64_t last_t = std::numeric_limits<std::int64_t>::min();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        PacketRecord r;
        std::getline(row, field, ',');
        r.seq = std::stoull(field);
        std::getline(row, field, ',');
        r.t_ns = std::stoll(field);
        std::getline(row, field, ',');
        r.size_bytes = std::stoll(field);
        if (r.t_ns <= last_t)
            throw std::runtime_error(path + ": timestamps must be strictly increasing");
        last_t = r.t_ns;
        trace.records.push_back(r);
    }
    return trace;
}

}  // namespace dropmark
