#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dropmark/dsg.hpp"

namespace dropmark {

// A packet as the watermarker sees it. Timestamps are nanoseconds on the
// shared clock (same epoch as PeriodConfig::t0_ns).
struct PacketEvent {
    std::uint64_t seq = 0;
    std::int64_t t_ns = 0;
    std::int64_t size_bytes = 0;
};

struct DropDecision {
    std::uint64_t seq = 0;
    std::int64_t t_ns = 0;
    bool dropped = false;
    std::int64_t period_index = 0;
    // Index of the matching interval within the period, set iff dropped.
    std::optional<std::int32_t> interval_index;
};

// Pure decision: does this packet fall inside a dropping interval of the
// schedule for its own period? Half-open match: start <= off < start + dur.
DropDecision decide(const PacketEvent& pkt, const DroppingSchedule& schedule,
                    const PeriodConfig& cfg);

// Streaming watermarker: schedules are materialized lazily, one period at a
// time, as packet timestamps first enter each period.
class Embedder {
  public:
    Embedder(SharedKey key, PeriodConfig cfg, GilbertParams params);

    // Throws std::invalid_argument if timestamps go backwards or precede t0.
    DropDecision on_packet(const PacketEvent& pkt);

    std::size_t schedules_built() const { return provider_.schedules_built(); }

  private:
    ScheduleProvider provider_;
    std::int64_t last_t_ns_;
    bool any_ = false;
};

std::vector<DropDecision> run_embedder(std::span<const PacketEvent> packets,
                                       const SharedKey& key, const PeriodConfig& cfg,
                                       const GilbertParams& params);

// CSV: header then seq,timestamp_ns,dropped,period,interval
// (interval empty when the packet was forwarded).
void save_decisions(const std::vector<DropDecision>& decisions, const std::string& path);
std::vector<DropDecision> load_decisions(const std::string& path);

}  // namespace dropmark
