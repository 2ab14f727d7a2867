#include "dropmark/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dropmark {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t base, int cell, int trial, int variant) {
    std::uint64_t s = splitmix64(base ^ 0x1234'5678'9abc'def0ULL);
    s = splitmix64(s ^ static_cast<std::uint64_t>(cell));
    s = splitmix64(s ^ static_cast<std::uint64_t>(trial));
    return splitmix64(s ^ static_cast<std::uint64_t>(variant));
}

}  // namespace

ScaleResult scale_params(const GilbertParams& base, double target_rate, double tolerance) {
    base.validate();
    if (!(target_rate >= 0.0 && target_rate <= 1.0))
        throw std::invalid_argument("target rate must lie in [0, 1]");
    if (tolerance <= 0.0) throw std::invalid_argument("tolerance must be positive");

    auto rate_of = [&](double factor) {
        GilbertParams p = base;
        for (double& x : p.probs) x *= factor;
        return stationary_drop_rate(p).rate;
    };
    auto scaled = [&](double factor) {
        GilbertParams p = base;
        for (double& x : p.probs) x *= factor;
        return p;
    };

    double current = stationary_drop_rate(base).rate;
    if (std::abs(current - target_rate) <= tolerance) return {base, current, 1.0};

    double p_max = *std::max_element(base.probs.begin(), base.probs.end());
    if (p_max <= 0.0) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "target rate %.6g unreachable: all probabilities are zero", target_rate);
        throw std::invalid_argument(msg);
    }
    const double f_max = 1.0 / p_max;  // keep every probability inside [0, 1]
    double reachable = rate_of(f_max);
    if (target_rate > reachable + tolerance) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "target rate %.6g unreachable: maximum achievable with capped factor "
                      "%.6g is %.6g",
                      target_rate, f_max, reachable);
        throw std::invalid_argument(msg);
    }

    double lo = 0.0, hi = f_max;
    double mid = f_max, rate = reachable;
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        rate = rate_of(mid);
        if (std::abs(rate - target_rate) <= tolerance) break;
        if (rate < target_rate)
            lo = mid;
        else
            hi = mid;
    }
    if (std::abs(rate - target_rate) > tolerance)
        throw std::runtime_error("rate bisection failed to converge");
    return {scaled(mid), rate, mid};
}

DetectionConfig plan_detection_config(const PlanConfig& cfg, const CellSpec& cell,
                                      const SharedKey& key) {
    DetectionConfig d;
    d.key = key;
    d.period.t0_ns = cfg.t0_ns;
    d.period.period_ns = cfg.period_ns;
    d.period.rate_bytes_per_s = cell.rate_bytes_per_s;
    d.period.packet_bytes = cfg.packet_bytes;
    d.params = scale_params(cfg.base_params, cell.p_w).params;
    d.alpha = cfg.alpha;
    d.window = cfg.window;
    d.beta = cell.beta;
    d.min_intervals = cfg.min_intervals;

    std::int64_t slot = d.period.slot_ns();
    std::int64_t downstream = 0;
    for (std::int64_t h : cfg.path.hop_latency_ns) downstream += h;
    // Constant part of the observable delay: recovery round trip plus the
    // one-way path; dupack spacing contributes ~3 slots.
    d.time_offset_ns = cfg.time_offset_ns >= 0
                           ? cfg.time_offset_ns
                           : cfg.path.rtt1_ns + cfg.path.rtt1_ns / 2 + downstream + 3 * slot;
    d.slack_ns = cfg.slack_ns >= 0 ? cfg.slack_ns : 5'000'000 + 8 * slot;
    return d;
}

PlanReport run_plan(const PlanConfig& cfg) {
    if (cfg.rates.empty() || cfg.p_ws.empty() || cfg.p_ls.empty() || cfg.betas.empty())
        throw std::invalid_argument("every plan grid needs at least one value");
    if (cfg.trials < 1) throw std::invalid_argument("need at least one trial per cell");
    cfg.base_params.validate();

    struct PreparedCell {
        CellSpec spec;
        GilbertParams params;
        PeriodConfig period;
        PathConfig path;
        DetectionConfig det;
    };

    SharedKey key = SharedKey::from_strings(cfg.key_secret, "wm-primary");
    SharedKey decoy = SharedKey::from_strings(cfg.key_secret, "wm-decoy");

    std::vector<PreparedCell> cells;
    for (double rate : cfg.rates)
        for (double p_w : cfg.p_ws)
            for (double p_l : cfg.p_ls)
                for (double beta : cfg.betas) {
                    PreparedCell c;
                    c.spec = {rate, p_w, p_l, beta};
                    c.det = plan_detection_config(cfg, c.spec, key);
                    c.params = c.det.params;
                    c.period = c.det.period;
                    c.path = cfg.path;
                    c.path.rate_bytes_per_s = rate;
                    c.path.packet_bytes = cfg.packet_bytes;
                    c.path.flow_packets = cfg.flow_packets;
                    c.path.random_loss_prob = p_l;
                    cells.push_back(std::move(c));
                }

    const int n_cells = static_cast<int>(cells.size());
    const int per_cell = cfg.trials;
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(n_cells) * per_cell * 3);

    const std::int64_t flat_total = static_cast<std::int64_t>(n_cells) * per_cell;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t flat = 0; flat < flat_total; ++flat) {
        const int ci = static_cast<int>(flat / per_cell);
        const int trial = static_cast<int>(flat % per_cell);
        const PreparedCell& cell = cells[static_cast<std::size_t>(ci)];

        for (int variant = 0; variant < 3; ++variant) {
            TrialKind kind = variant == 0   ? TrialKind::true_positive
                             : variant == 1 ? TrialKind::no_watermark
                                            : TrialKind::wrong_key;
            std::uint64_t seed = trial_seed(cfg.base_seed, ci, trial, variant);

            WatermarkSpec wm;
            wm.period = cell.period;
            wm.params = cell.params;
            const WatermarkSpec* wm_ptr = nullptr;
            if (kind == TrialKind::true_positive) {
                wm.key = key;
                wm_ptr = &wm;
            } else if (kind == TrialKind::wrong_key) {
                wm.key = decoy;
                wm_ptr = &wm;
            }

            PathResult sim = simulate_path(cell.path, wm_ptr, seed);
            DetectionReport rep = detect(sim.destination, cell.det);

            TrialOutcome o;
            o.cell_index = ci;
            o.trial = trial;
            o.kind = kind;
            o.ratio = rep.cumulative_ratio;
            o.watermarked = rep.watermarked;
            if (kind == TrialKind::true_positive)
                o.packets_to_detect = packets_to_detect(sim.destination, cell.det);
            o.throughput_bytes_per_s = effective_throughput(sim.destination);
            outcomes[(static_cast<std::size_t>(flat)) * 3 + static_cast<std::size_t>(variant)] = o;
        }
    }

    PlanReport report;
    report.trials = std::move(outcomes);
    for (int ci = 0; ci < n_cells; ++ci) {
        CellSummary s;
        s.spec = cells[static_cast<std::size_t>(ci)].spec;
        s.trials = per_cell;
        std::int64_t tp = 0, fp_nw = 0, fp_wk = 0, detected = 0;
        double ptd_sum = 0.0, thr_sum = 0.0;
        for (int trial = 0; trial < per_cell; ++trial) {
            std::size_t base =
                (static_cast<std::size_t>(ci) * per_cell + static_cast<std::size_t>(trial)) * 3;
            const TrialOutcome& t = report.trials[base + 0];
            const TrialOutcome& n = report.trials[base + 1];
            const TrialOutcome& w = report.trials[base + 2];
            if (t.watermarked) ++tp;
            if (n.watermarked) ++fp_nw;
            if (w.watermarked) ++fp_wk;
            if (t.packets_to_detect) {
                ++detected;
                ptd_sum += static_cast<double>(*t.packets_to_detect);
            }
            thr_sum += t.throughput_bytes_per_s;
        }
        s.tp_rate = static_cast<double>(tp) / per_cell;
        s.fp_no_watermark = static_cast<double>(fp_nw) / per_cell;
        s.fp_wrong_key = static_cast<double>(fp_wk) / per_cell;
        s.mean_packets_to_detect = detected > 0 ? ptd_sum / static_cast<double>(detected) : 0.0;
        s.mean_throughput = thr_sum / per_cell;
        report.cells.push_back(s);
    }
    return report;
}

void save_report(const PlanReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char buf[64];

    std::ofstream cells(dir + "/cells.csv");
    if (!cells) throw std::runtime_error("cannot write " + dir + "/cells.csv");
    cells << "rate_Bps,p_w,p_l,beta,trials,tp_rate,fp_no_watermark,fp_wrong_key,"
             "mean_packets_to_detect,mean_throughput_Bps\n";
    for (const auto& c : report.cells) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g", c.spec.rate_bytes_per_s, c.spec.p_w,
                      c.spec.p_l, c.spec.beta);
        cells << buf << ',' << c.trials;
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", c.tp_rate, c.fp_no_watermark,
                      c.fp_wrong_key);
        cells << buf;
        std::snprintf(buf, sizeof buf, ",%.9g,%.9g\n", c.mean_packets_to_detect,
                      c.mean_throughput);
        cells << buf;
    }

    std::ofstream trials(dir + "/trials.csv");
    if (!trials) throw std::runtime_error("cannot write " + dir + "/trials.csv");
    trials << "cell,trial,kind,ratio,watermarked,packets_to_detect,throughput_Bps\n";
    for (const auto& t : report.trials) {
        std::snprintf(buf, sizeof buf, "%.6f", t.ratio);
        trials << t.cell_index << ',' << t.trial << ',' << static_cast<char>(t.kind) << ',' << buf
               << ',' << (t.watermarked ? 1 : 0) << ',';
        if (t.packets_to_detect) trials << *t.packets_to_detect;
        std::snprintf(buf, sizeof buf, ",%.9g\n", t.throughput_bytes_per_s);
        trials << buf;
    }
}

InvisResult run_invisibility(const InvisConfig& cfg, std::uint64_t seed) {
    if (cfg.n < 1) throw std::invalid_argument("memory depth n must be >= 1");
    if (cfg.q < 1) throw std::invalid_argument("block size q must be >= 1");

    BottleneckResult bn = simulate_bottleneck(cfg.bottleneck, seed);
    if (bn.lost == 0)
        throw std::runtime_error(
            "bottleneck run produced no losses; the loss model fit would be degenerate "
            "(increase load or packet count)");

    InvisResult r;
    r.fitted = estimate_params(bn.losses, cfg.n);
    r.observed_rate = bn.losses.mean();
    r.model_rate = stationary_drop_rate(r.fitted).rate;

    KeyedStream stream(std::string(cfg.key_secret) + "/" + std::to_string(seed));
    r.observed = std::move(bn.losses);
    r.generated =
        gen_binary_sequence(stream, r.fitted, static_cast<std::int64_t>(r.observed.size()));

    r.density_observed = loss_density(r.observed, cfg.q);
    r.density_generated = loss_density(r.generated, cfg.q);
    const int max_lag = 64;
    r.acf_observed = autocorrelation(r.observed, max_lag);
    r.acf_generated = autocorrelation(r.generated, max_lag);

    double eps = ks_critical(r.density_generated.blocks, r.density_observed.blocks,
                             cfg.confidence);
    r.ks = ks_test(r.density_generated, r.density_observed, eps);
    return r;
}

namespace {

void save_density_csv(const LossDensity& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "k,f\n";
    char buf[48];
    for (std::size_t k = 0; k < d.f.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", k, d.f[k]);
        out << buf;
    }
}

void save_acf_csv(const Acf& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "h,rho\n";
    char buf[48];
    for (std::size_t h = 0; h < a.rho.size(); ++h) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", h, a.rho[h]);
        out << buf;
    }
}

}  // namespace

void save_invisibility(const InvisResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_density_csv(r.density_observed, dir + "/density_observed.csv");
    save_density_csv(r.density_generated, dir + "/density_generated.csv");
    save_acf_csv(r.acf_observed, dir + "/acf_observed.csv");
    save_acf_csv(r.acf_generated, dir + "/acf_generated.csv");
    save_params(r.fitted, dir + "/fitted_params.txt");
    std::ofstream ks(dir + "/ks.txt");
    if (!ks) throw std::runtime_error("cannot write " + dir + "/ks.txt");
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "distance=%.9g\nepsilon=%.9g\naccepted=%d\nobserved_rate=%.9g\n"
                  "model_rate=%.9g\n",
                  r.ks.distance, r.ks.epsilon, r.ks.accepted ? 1 : 0, r.observed_rate,
                  r.model_rate);
    ks << buf;
}

}  // namespace dropmark
