#include "dropmark/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dropmark {

namespace {

void check_outlier_args(double alpha, int window) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
}

// max over ipd[i-window .. i-1] (forward pass) or the mirrored right-side
// window when fed the reversed sequence.
std::vector<std::int64_t> sliding_prev_max(const std::vector<std::int64_t>& x, int window) {
    const std::size_t n = x.size();
    std::vector<std::int64_t> out(n, -1);  // -1 = empty window (ipds are > 0)
    std::deque<std::size_t> dq;            // indices, values decreasing
    for (std::size_t i = 0; i < n; ++i) {
        while (!dq.empty() && dq.front() + static_cast<std::size_t>(window) < i) dq.pop_front();
        if (!dq.empty()) out[i] = x[dq.front()];
        while (!dq.empty() && x[dq.back()] <= x[i]) dq.pop_back();
        dq.push_back(i);
    }
    return out;
}

}  // namespace

Ipds compute_ipds(const PacketTrace& trace) {
    if (trace.records.size() < 2)
        throw std::invalid_argument("need at least two packets for inter-packet delays");
    Ipds out;
    out.ipd.reserve(trace.records.size() - 1);
    out.time_ns.reserve(trace.records.size() - 1);
    for (std::size_t i = 1; i < trace.records.size(); ++i) {
        std::int64_t d = trace.records[i].t_ns - trace.records[i - 1].t_ns;
        if (d <= 0) throw std::invalid_argument("trace timestamps must be strictly increasing");
        out.ipd.push_back(d);
        out.time_ns.push_back(trace.records[i].t_ns);
    }
    return out;
}

std::vector<std::size_t> find_outliers(const std::vector<std::int64_t>& ipd, double alpha,
                                       int window) {
    check_outlier_args(alpha, window);
    const std::size_t n = ipd.size();
    std::vector<std::size_t> out;
    if (n == 0) return out;

    std::vector<std::int64_t> left = sliding_prev_max(ipd, window);
    std::vector<std::int64_t> rev(ipd.rbegin(), ipd.rend());
    std::vector<std::int64_t> right_rev = sliding_prev_max(rev, window);

    for (std::size_t i = 0; i < n; ++i) {
        double scaled = alpha * static_cast<double>(ipd[i]);
        std::int64_t right = right_rev[n - 1 - i];
        if ((left[i] < 0 || scaled > static_cast<double>(left[i])) &&
            (right < 0 || scaled > static_cast<double>(right)))
            out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> find_outliers_scan(const std::vector<std::int64_t>& ipd, double alpha,
                                            int window) {
    check_outlier_args(alpha, window);
    const std::int64_t n = static_cast<std::int64_t>(ipd.size());
    std::vector<std::uint8_t> flag(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        double scaled = alpha * static_cast<double>(ipd[static_cast<std::size_t>(i)]);
        bool outlier = true;
        std::int64_t lo = std::max<std::int64_t>(0, i - window);
        std::int64_t hi = std::min<std::int64_t>(n - 1, i + window);
        for (std::int64_t h = lo; h <= hi && outlier; ++h) {
            if (h == i) continue;
            if (!(scaled > static_cast<double>(ipd[static_cast<std::size_t>(h)]))) outlier = false;
        }
        flag[static_cast<std::size_t>(i)] = outlier ? 1 : 0;
    }
    std::vector<std::size_t> out;
    for (std::int64_t i = 0; i < n; ++i)
        if (flag[static_cast<std::size_t>(i)]) out.push_back(static_cast<std::size_t>(i));
    return out;
}

namespace {

struct IntervalWindow {
    std::int64_t start;  // absolute, slack applied
    std::int64_t end;
    std::int64_t period;
};

struct MatchContext {
    std::vector<std::int64_t> outlier_times;  // adjusted, ascending
    std::vector<IntervalWindow> windows;      // ascending by end
    std::int64_t first_period = 0;
    std::int64_t last_period = 0;
    std::int64_t adj_first = 0;
    std::int64_t adj_last = 0;
};

bool window_hit(const std::vector<std::int64_t>& times, const IntervalWindow& w) {
    auto it = std::lower_bound(times.begin(), times.end(), w.start);
    return it != times.end() && *it < w.end;
}

MatchContext build_context(const PacketTrace& trace, const DetectionConfig& cfg,
                           ScheduleProvider& provider) {
    cfg.period.validate();
    cfg.params.validate();
    if (cfg.slack_ns < 0) throw std::invalid_argument("slack must be non-negative");

    Ipds ipds = compute_ipds(trace);
    std::vector<std::size_t> idx = find_outliers(ipds.ipd, cfg.alpha, cfg.window);

    MatchContext ctx;
    ctx.adj_first = trace.records.front().t_ns - cfg.time_offset_ns;
    ctx.adj_last = trace.records.back().t_ns - cfg.time_offset_ns;
    if (ctx.adj_last < cfg.period.t0_ns)
        throw std::invalid_argument("trace ends before the watermarking epoch");

    for (std::size_t i : idx) ctx.outlier_times.push_back(ipds.time_ns[i] - cfg.time_offset_ns);

    ctx.first_period = std::max<std::int64_t>(0, cfg.period.period_of(ctx.adj_first));
    ctx.last_period = std::max(ctx.first_period, cfg.period.period_of(ctx.adj_last));

    for (std::int64_t p = ctx.first_period; p <= ctx.last_period; ++p) {
        const DroppingSchedule& sched = provider.schedule_for(p);
        std::int64_t base = cfg.period.period_start(p);
        for (std::size_t j = 0; j < sched.intervals(); ++j) {
            IntervalWindow w;
            w.start = base + sched.starts_ns[j] - cfg.slack_ns;
            w.end = base + sched.starts_ns[j] + sched.durations_ns[j] + cfg.slack_ns;
            w.period = p;
            ctx.windows.push_back(w);
        }
    }
    std::stable_sort(ctx.windows.begin(), ctx.windows.end(),
                     [](const IntervalWindow& a, const IntervalWindow& b) { return a.end < b.end; });
    return ctx;
}

}  // namespace

DetectionReport detect(const PacketTrace& trace, const DetectionConfig& cfg) {
    ScheduleProvider provider(cfg.key, cfg.period, cfg.params);
    MatchContext ctx = build_context(trace, cfg, provider);

    DetectionReport report;
    std::map<std::int64_t, PeriodVerdict> verdicts;
    for (std::int64_t p = ctx.first_period; p <= ctx.last_period; ++p) {
        PeriodVerdict v;
        v.period_index = p;
        std::int64_t start = cfg.period.period_start(p);
        v.partial = !(ctx.adj_first <= start && ctx.adj_last >= start + cfg.period.period_ns);
        verdicts[p] = v;
    }
    for (const IntervalWindow& w : ctx.windows) {
        PeriodVerdict& v = verdicts[w.period];
        ++v.intervals;
        if (window_hit(ctx.outlier_times, w)) ++v.hits;
    }

    for (auto& [p, v] : verdicts) {
        v.ratio = v.intervals > 0 ? static_cast<double>(v.hits) / static_cast<double>(v.intervals)
                                  : 0.0;
        v.watermarked = v.intervals > 0 && v.ratio > cfg.beta;
        report.total_intervals += v.intervals;
        report.total_hits += v.hits;
        report.periods.push_back(v);
    }
    report.cumulative_ratio =
        report.total_intervals > 0
            ? static_cast<double>(report.total_hits) / static_cast<double>(report.total_intervals)
            : 0.0;
    report.watermarked = report.total_intervals > 0 && report.cumulative_ratio > cfg.beta;

    // Outlier observation times bucketed by period, relative to period start.
    std::map<std::int64_t, OutlierTimes> buckets;
    for (std::int64_t t : ctx.outlier_times) {
        std::int64_t p = cfg.period.period_of(t);
        if (p < ctx.first_period || p > ctx.last_period) continue;
        auto& b = buckets[p];
        b.period_index = p;
        b.times_ns.push_back(t - cfg.period.period_start(p));
    }
    for (auto& [p, b] : buckets) report.outliers.push_back(std::move(b));
    return report;
}

std::optional<std::int64_t> packets_to_detect(const PacketTrace& trace,
                                              const DetectionConfig& cfg) {
    if (cfg.min_intervals < 1) throw std::invalid_argument("min_intervals must be >= 1");
    ScheduleProvider provider(cfg.key, cfg.period, cfg.params);
    MatchContext ctx = build_context(trace, cfg, provider);

    std::size_t next_window = 0;
    std::int64_t elapsed = 0;
    std::int64_t hits = 0;
    for (std::size_t m = 0; m < trace.records.size(); ++m) {
        std::int64_t now = trace.records[m].t_ns - cfg.time_offset_ns;
        while (next_window < ctx.windows.size() && ctx.windows[next_window].end <= now) {
            ++elapsed;
            if (window_hit(ctx.outlier_times, ctx.windows[next_window])) ++hits;
            ++next_window;
        }
        if (elapsed >= cfg.min_intervals &&
            static_cast<double>(hits) > cfg.beta * static_cast<double>(elapsed))
            return static_cast<std::int64_t>(m + 1);
    }
    return std::nullopt;
}

void save_verdicts(const DetectionReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "period,K,gamma,ratio,watermarked,partial\n";
    char buf[64];
    for (const auto& v : report.periods) {
        std::snprintf(buf, sizeof buf, "%.6f", v.ratio);
        out << v.period_index << ',' << v.intervals << ',' << v.hits << ',' << buf << ','
            << (v.watermarked ? 1 : 0) << ',' << (v.partial ? 1 : 0) << '\n';
    }
}

}  // namespace dropmark
