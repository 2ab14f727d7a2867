#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dropmark/gilbert.hpp"
#include "dropmark/keystream.hpp"
#include "dropmark/loss_vector.hpp"

namespace dropmark {

// Watermark key material shared by embedder and detector. The stream seed
// is secret || watermarker_id, so one secret can drive several watermarkers
// with unrelated schedules.
struct SharedKey {
    std::vector<std::uint8_t> secret;
    std::vector<std::uint8_t> watermarker_id;

    static SharedKey from_strings(std::string_view secret, std::string_view id);
    std::vector<std::uint8_t> combined() const;
};

// Time is carved into fixed periods of length T starting at the epoch t0.
// Each period is modeled as n_slots packet slots of width slot_ns, sized
// from the reference throughput and packet length. All schedule arithmetic
// is integer nanoseconds.
struct PeriodConfig {
    std::int64_t t0_ns = 0;
    std::int64_t period_ns = 0;        // T
    double rate_bytes_per_s = 0.0;     // R
    std::int64_t packet_bytes = 0;     // reference packet size

    std::int64_t slots_per_period() const;  // ceil(R * T / L)
    std::int64_t slot_ns() const;           // round(1e9 * L / R)
    void validate() const;

    std::int64_t period_of(std::int64_t t_ns) const;   // floor((t - t0) / T)
    std::int64_t period_start(std::int64_t index) const;
};

// Drop intervals for one period, offsets relative to the period start.
// starts are strictly ascending multiples of slot_ns; intervals never
// overlap. A packet inside [start, start + duration) is to be dropped.
struct DroppingSchedule {
    std::int64_t period_index = 0;
    std::vector<std::int64_t> starts_ns;
    std::vector<std::int64_t> durations_ns;

    std::size_t intervals() const { return starts_ns.size(); }
};

// Advance a fresh keyed stream to time `now`: one u64 draw per whole period
// elapsed in [t0, now). The next draw is then the seed of the period that
// contains `now`. Watermarker and detector syncing anywhere inside the same
// period end up bit-identical.
struct SyncedStream {
    KeyedStream stream;
    std::int64_t period_index;
};
SyncedStream sync_stream(const SharedKey& key, const PeriodConfig& cfg, std::int64_t now_ns);

// One period's pseudo-random loss pattern: reseed from the sync stream's
// next raw u64 (big-endian bytes), then walk the burst-loss chain for
// n_slots events. Consumes exactly one draw from `syn`.
BinaryLossVector gen_binary_sequence(KeyedStream& syn, const GilbertParams& params,
                                     std::int64_t n_slots);

// Collapse a loss pattern into dropping intervals: a run of m ones starting
// at 1-based slot k becomes [k * slot, (k + m) * slot).
DroppingSchedule to_schedule(const BinaryLossVector& bits, std::int64_t slot_width_ns,
                             std::int64_t period_index);

// Schedule source that walks periods in order, regenerating the underlying
// stream from scratch only when asked to move backwards.
class ScheduleProvider {
  public:
    ScheduleProvider(SharedKey key, PeriodConfig cfg, GilbertParams params);

    const DroppingSchedule& schedule_for(std::int64_t period_index);
    std::size_t schedules_built() const { return built_; }

    const PeriodConfig& config() const { return cfg_; }
    const GilbertParams& params() const { return params_; }

  private:
    void rewind();

    SharedKey key_;
    PeriodConfig cfg_;
    GilbertParams params_;
    KeyedStream stream_;
    std::int64_t next_period_ = 0;  // first period not yet consumed from stream_
    DroppingSchedule current_;
    bool have_current_ = false;
    std::size_t built_ = 0;
};

// Text form, one line per period:
//   period=<i> D=<comma-separated ns> E=<comma-separated ns>
std::string schedules_to_text(const std::vector<DroppingSchedule>& schedules);
std::vector<DroppingSchedule> schedules_from_text(const std::string& text);

}  // namespace dropmark
