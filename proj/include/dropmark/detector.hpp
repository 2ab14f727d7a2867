#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dropmark/dsg.hpp"
#include "dropmark/netsim.hpp"

namespace dropmark {

struct DetectionConfig {
    SharedKey key;
    PeriodConfig period;
    GilbertParams params;

    double alpha = 0.8;     // outlier dominance factor, (0, 1]
    int window = 300;       // neighbor IPDs compared on each side
    double beta = 0.25;     // per-period accept threshold on gamma / K

    // Interval match tolerance, applied to both ends of every interval.
    std::int64_t slack_ns = 85'000'000;
    // Constant observation delay (path latency + recovery round trip)
    // subtracted from trace timestamps before matching. IPDs are unaffected.
    std::int64_t time_offset_ns = 0;

    // packets_to_detect: shortest prefix must contain at least this many
    // fully elapsed intervals before a verdict counts.
    int min_intervals = 8;
};

struct Ipds {
    // ipd[i] = t[i+1] - t[i]; time[i] = raw timestamp of the later packet.
    std::vector<std::int64_t> ipd;
    std::vector<std::int64_t> time_ns;
};

Ipds compute_ipds(const PacketTrace& trace);

// Index i is an outlier iff alpha * ipd[i] > ipd[h] for every h within
// `window` positions on both sides (windows truncate at the edges).
// Returns flagged indices, ascending.
std::vector<std::size_t> find_outliers(const std::vector<std::int64_t>& ipd,
                                       double alpha, int window);

// Literal windowed scan of the same predicate (reference / benchmark twin).
std::vector<std::size_t> find_outliers_scan(const std::vector<std::int64_t>& ipd,
                                            double alpha, int window);

// Outlier observation times of one period, relative to its period start.
struct OutlierTimes {
    std::int64_t period_index = 0;
    std::vector<std::int64_t> times_ns;
};

struct PeriodVerdict {
    std::int64_t period_index = 0;
    std::int64_t intervals = 0;      // K
    std::int64_t hits = 0;           // gamma
    double ratio = 0.0;              // gamma / K (0 when K == 0)
    bool watermarked = false;        // ratio > beta, strict
    bool partial = false;            // trace does not cover the whole period
};

struct DetectionReport {
    std::vector<PeriodVerdict> periods;
    std::vector<OutlierTimes> outliers;
    std::int64_t total_intervals = 0;
    std::int64_t total_hits = 0;
    double cumulative_ratio = 0.0;
    bool watermarked = false;        // cumulative_ratio > beta, strict
};

// Regenerates the keyed schedules for every period the trace touches and
// counts intervals containing at least one outlier observation
// ([start - slack, end + slack), absolute time).
DetectionReport detect(const PacketTrace& trace, const DetectionConfig& cfg);

// Smallest packet-count prefix whose fully elapsed intervals give
// gamma / K > beta with at least cfg.min_intervals elapsed; nullopt if the
// whole trace never qualifies.
std::optional<std::int64_t> packets_to_detect(const PacketTrace& trace,
                                              const DetectionConfig& cfg);

// CSV: header then period,K,gamma,ratio,watermarked,partial (booleans 0/1).
void save_verdicts(const DetectionReport& report, const std::string& path);

}  // namespace dropmark
