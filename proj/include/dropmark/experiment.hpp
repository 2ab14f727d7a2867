#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dropmark/detector.hpp"
#include "dropmark/gilbert.hpp"
#include "dropmark/netsim.hpp"
#include "dropmark/stats.hpp"

namespace dropmark {

// ---------------------------------------------------------------------------
// Rate scaling: bisect a common multiplier on all state probabilities until
// the chain's stationary drop rate hits the target.
// ---------------------------------------------------------------------------

struct ScaleResult {
    GilbertParams params;
    double achieved_rate = 0.0;
    double factor = 1.0;
};

// Throws std::invalid_argument (message includes the maximum achievable
// rate) when the target exceeds what the capped factor can reach.
ScaleResult scale_params(const GilbertParams& base, double target_rate,
                         double tolerance = 1e-6);

// ---------------------------------------------------------------------------
// Trial plan: grid of (rate, p_w, p_l, beta) cells; per cell and trial one
// watermarked flow (true-positive), one unwatermarked flow and one flow
// watermarked under a different key (the two false-positive kinds).
// ---------------------------------------------------------------------------

struct CellSpec {
    double rate_bytes_per_s = 0.0;
    double p_w = 0.0;
    double p_l = 0.0;
    double beta = 0.25;
};

struct PlanConfig {
    std::vector<double> rates;
    std::vector<double> p_ws;
    std::vector<double> p_ls;
    std::vector<double> betas;
    int trials = 10;

    GilbertParams base_params;     // shape to scale per cell
    std::int64_t flow_packets = 100'000;
    std::int64_t period_ns = 30'000'000'000;
    std::int64_t t0_ns = 0;
    std::int64_t packet_bytes = 1500;

    PathConfig path;               // rate/flow/loss fields overridden per cell

    double alpha = 0.8;
    int window = 30;
    int min_intervals = 8;
    // < 0: derive slack/offset from the path (recovery delay + hop latency).
    std::int64_t slack_ns = -1;
    std::int64_t time_offset_ns = -1;

    std::string key_secret = "dropmark-experiment";
    std::uint64_t base_seed = 1;
};

enum class TrialKind : char {
    true_positive = 'T',   // watermarked, detector holds the right key
    no_watermark = 'N',    // clean flow, detector holds the right key
    wrong_key = 'W',       // watermarked under an unrelated key
};

struct TrialOutcome {
    int cell_index = 0;
    int trial = 0;
    TrialKind kind = TrialKind::true_positive;
    double ratio = 0.0;
    bool watermarked = false;
    std::optional<std::int64_t> packets_to_detect;
    double throughput_bytes_per_s = 0.0;
};

struct CellSummary {
    CellSpec spec;
    int trials = 0;
    double tp_rate = 0.0;
    double fp_no_watermark = 0.0;
    double fp_wrong_key = 0.0;
    double mean_packets_to_detect = 0.0;  // over detected TP trials; 0 if none
    double mean_throughput = 0.0;         // over TP trials
};

struct PlanReport {
    std::vector<CellSummary> cells;
    std::vector<TrialOutcome> trials;
};

PlanReport run_plan(const PlanConfig& cfg);

// cells.csv + trials.csv; identical config and base seed give byte-identical
// files.
void save_report(const PlanReport& report, const std::string& dir);

// Detector settings the plan would use for a given cell path; exposed so the
// CLI detect command and tests share the derivation.
DetectionConfig plan_detection_config(const PlanConfig& cfg, const CellSpec& cell,
                                      const SharedKey& key);

// ---------------------------------------------------------------------------
// Invisibility pipeline: bottleneck losses -> fit -> regenerate -> compare.
// ---------------------------------------------------------------------------

struct InvisConfig {
    BottleneckConfig bottleneck;
    int n = 4;
    int q = 150;
    double confidence = 0.99;
    std::string key_secret = "dropmark-invis";
};

struct InvisResult {
    GilbertParams fitted;
    double observed_rate = 0.0;
    double model_rate = 0.0;
    BinaryLossVector observed;     // bottleneck losses the fit saw
    BinaryLossVector generated;    // same-length regeneration from the fit
    LossDensity density_observed;
    LossDensity density_generated;
    Acf acf_observed;
    Acf acf_generated;
    KsResult ks;
};

// Throws std::runtime_error when the bottleneck run yields no losses (the
// fit would be degenerate: zero-variance sequences have no density shape to
// compare).
InvisResult run_invisibility(const InvisConfig& cfg, std::uint64_t seed);

// density_observed.csv, density_generated.csv (k,f), acf_observed.csv,
// acf_generated.csv (h,rho), fitted_params.txt, ks.txt
void save_invisibility(const InvisResult& result, const std::string& dir);

}  // namespace dropmark
