#include "dropmark/embedder.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dropmark {

DropDecision decide(const PacketEvent& pkt, const DroppingSchedule& schedule,
                    const PeriodConfig& cfg) {
    std::int64_t period = cfg.period_of(pkt.t_ns);
    if (period != schedule.period_index)
        throw std::invalid_argument("packet does not belong to the supplied schedule's period");

    DropDecision d;
    d.seq = pkt.seq;
    d.t_ns = pkt.t_ns;
    d.period_index = period;

    std::int64_t off = pkt.t_ns - cfg.period_start(period);
    auto it = std::upper_bound(schedule.starts_ns.begin(), schedule.starts_ns.end(), off);
    if (it != schedule.starts_ns.begin()) {
        std::size_t j = static_cast<std::size_t>(it - schedule.starts_ns.begin()) - 1;
        if (off < schedule.starts_ns[j] + schedule.durations_ns[j]) {
            d.dropped = true;
            d.interval_index = static_cast<std::int32_t>(j);
        }
    }
    return d;
}

Embedder::Embedder(SharedKey key, PeriodConfig cfg, GilbertParams params)
    : provider_(std::move(key), cfg, std::move(params)), last_t_ns_(cfg.t0_ns) {}

DropDecision Embedder::on_packet(const PacketEvent& pkt) {
    if (pkt.t_ns < provider_.config().t0_ns)
        throw std::invalid_argument("packet precedes the watermarking epoch");
    if (any_ && pkt.t_ns < last_t_ns_)
        throw std::invalid_argument("packet timestamps must be nondecreasing");
    last_t_ns_ = pkt.t_ns;
    any_ = true;
    std::int64_t period = provider_.config().period_of(pkt.t_ns);
    return decide(pkt, provider_.schedule_for(period), provider_.config());
}

std::vector<DropDecision> run_embedder(std::span<const PacketEvent> packets,
                                       const SharedKey& key, const PeriodConfig& cfg,
                                       const GilbertParams& params) {
    Embedder e(key, cfg, params);
    std::vector<DropDecision> out;
    out.reserve(packets.size());
    for (const PacketEvent& pkt : packets) out.push_back(e.on_packet(pkt));
    return out;
}

void save_decisions(const std::vector<DropDecision>& decisions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "seq,timestamp_ns,dropped,period,interval\n";
    for (const auto& d : decisions) {
        out << d.seq << ',' << d.t_ns << ',' << (d.dropped ? 1 : 0) << ',' << d.period_index
            << ',';
        if (d.interval_index) out << *d.interval_index;
        out << '\n';
    }
}

std::vector<DropDecision> load_decisions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "seq,timestamp_ns,dropped,period,interval")
        throw std::runtime_error(path + ": missing decision header");
    std::vector<DropDecision> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        DropDecision d;
        std::getline(row, field, ',');
        d.seq = std::stoull(field);
        std::getline(row, field, ',');
        d.t_ns = std::stoll(field);
        std::getline(row, field, ',');
        d.dropped = field == "1";
        std::getline(row, field, ',');
        d.period_index = std::stoll(field);
        if (std::getline(row, field, ',') && !field.empty())
            d.interval_index = static_cast<std::int32_t>(std::stol(field));
        out.push_back(d);
    }
    return out;
}

}  // namespace dropmark
