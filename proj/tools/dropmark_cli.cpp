#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dropmark/config.hpp"
#include "dropmark/detector.hpp"
#include "dropmark/dsg.hpp"
#include "dropmark/embedder.hpp"
#include "dropmark/experiment.hpp"
#include "dropmark/gilbert.hpp"
#include "dropmark/netsim.hpp"
#include "dropmark/stats.hpp"

namespace {

using namespace dropmark;

std::vector<double> parse_real_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        std::size_t a = item.find_first_not_of(" \t");
        if (a == std::string::npos) throw std::invalid_argument(what + ": empty list element");
        std::size_t b = item.find_last_not_of(" \t");
        item = item.substr(a, b - a + 1);
        std::size_t used = 0;
        double v = std::stod(item, &used);
        if (used != item.size())
            throw std::invalid_argument(what + ": bad number '" + item + "'");
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<std::int64_t> out;
    for (double v : parse_real_list(text, what)) out.push_back(static_cast<std::int64_t>(v));
    return out;
}

SharedKey key_from(const Config& cfg) {
    return SharedKey::from_strings(cfg.get_str("key.secret"),
                                   cfg.get_str("key.id", "wm-primary"));
}

PeriodConfig period_from(const Config& cfg) {
    PeriodConfig p;
    p.t0_ns = cfg.get_int("period.t0_ns", 0);
    p.period_ns = cfg.get_int("period.period_ns");
    p.rate_bytes_per_s = cfg.get_real("period.rate_bytes_per_s");
    p.packet_bytes = cfg.get_int("period.packet_bytes", 1500);
    p.validate();
    return p;
}

GilbertParams params_from(const Config& cfg) {
    GilbertParams params;
    if (cfg.has("params.file")) {
        params = load_params(cfg.get_str("params.file"));
    } else {
        params = GilbertParams::uniform(static_cast<int>(cfg.get_int("params.n", 3)),
                                        cfg.get_real("params.p", 0.5));
    }
    if (cfg.has("params.target_rate"))
        params = scale_params(params, cfg.get_real("params.target_rate")).params;
    params.validate();
    return params;
}

PathConfig path_from(const Config& cfg) {
    PathConfig p;
    p.rate_bytes_per_s = cfg.get_real("path.rate_bytes_per_s");
    p.packet_bytes = cfg.get_int("path.packet_bytes", 1500);
    p.flow_packets = cfg.get_int("path.flow_packets");
    p.rtt1_ns = cfg.get_int("path.rtt1_ns", 80'000'000);
    if (cfg.has("path.hop_latency_ns"))
        p.hop_latency_ns = parse_int_list(cfg.get_str("path.hop_latency_ns"),
                                          "path.hop_latency_ns");
    p.hop_jitter_sigma_ns = cfg.get_real("path.hop_jitter_sigma_ns", 0.0);
    p.random_loss_prob = cfg.get_real("path.random_loss_prob", 0.0);
    p.dupack_threshold = static_cast<int>(cfg.get_int("path.dupack_threshold", 3));
    p.ramp_ns = cfg.get_int("path.ramp_ns", 2'000'000'000);
    p.ramp_start_frac = cfg.get_real("path.ramp_start_frac", 0.1);
    p.burst_spacing_ns = cfg.get_int("path.burst_spacing_ns", 10'000);
    p.loss_rate_cut = cfg.get_real("path.loss_rate_cut", 0.3);
    p.recovery_fraction_per_s = cfg.get_real("path.recovery_fraction_per_s", 0.5);
    p.retransmit_timeout_ns = cfg.get_int("path.retransmit_timeout_ns", 0);
    return p;
}

BottleneckConfig bottleneck_from(const Config& cfg) {
    BottleneckConfig b;
    b.buffer_packets = static_cast<int>(cfg.get_int("bottleneck.buffer_packets", 10));
    b.service_bytes_per_s = cfg.get_real("bottleneck.service_bytes_per_s");
    b.total_packets = cfg.get_int("bottleneck.total_packets");
    std::string arrivals = cfg.get_str("bottleneck.arrivals", "poisson");
    if (arrivals == "poisson") {
        b.arrivals.kind = ArrivalSpec::Kind::poisson;
        b.arrivals.rate_pps = cfg.get_real("bottleneck.rate_pps");
    } else if (arrivals == "on_off") {
        b.arrivals.kind = ArrivalSpec::Kind::on_off;
        b.arrivals.on_rate_pps = cfg.get_real("bottleneck.on_rate_pps");
        b.arrivals.off_rate_pps = cfg.get_real("bottleneck.off_rate_pps", 0.0);
        b.arrivals.mean_on_s = cfg.get_real("bottleneck.mean_on_s");
        b.arrivals.mean_off_s = cfg.get_real("bottleneck.mean_off_s");
    } else {
        throw std::invalid_argument("bottleneck.arrivals: expected poisson or on_off, got " +
                                    arrivals);
    }
    std::string sizes = cfg.get_str("bottleneck.sizes", "fixed");
    if (sizes == "fixed") {
        b.sizes.kind = PacketSizeSpec::Kind::fixed;
        b.sizes.bytes = cfg.get_int("bottleneck.bytes", 1500);
    } else if (sizes == "bimodal") {
        b.sizes.kind = PacketSizeSpec::Kind::bimodal;
        b.sizes.small_bytes = cfg.get_int("bottleneck.small_bytes", 64);
        b.sizes.large_bytes = cfg.get_int("bottleneck.large_bytes", 1500);
        b.sizes.small_prob = cfg.get_real("bottleneck.small_prob", 0.5);
    } else {
        throw std::invalid_argument("bottleneck.sizes: expected fixed or bimodal, got " + sizes);
    }
    return b;
}

DetectionConfig detection_from(const Config& cfg) {
    DetectionConfig d;
    d.key = key_from(cfg);
    d.period = period_from(cfg);
    d.params = params_from(cfg);
    d.alpha = cfg.get_real("detector.alpha", 0.8);
    d.window = static_cast<int>(cfg.get_int("detector.window", 300));
    d.beta = cfg.get_real("detector.beta", 0.25);
    d.slack_ns = cfg.get_int("detector.slack_ns", 85'000'000);
    d.time_offset_ns = cfg.get_int("detector.time_offset_ns", 0);
    d.min_intervals = static_cast<int>(cfg.get_int("detector.min_intervals", 8));
    return d;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

int cmd_genseq(const Config& cfg, const std::string& out_dir, std::int64_t first,
               std::int64_t count) {
    ScheduleProvider provider(key_from(cfg), period_from(cfg), params_from(cfg));
    std::vector<DroppingSchedule> schedules;
    for (std::int64_t i = first; i < first + count; ++i)
        schedules.push_back(provider.schedule_for(i));
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/schedules.txt", schedules_to_text(schedules));
    std::size_t intervals = 0;
    for (const auto& s : schedules) intervals += s.intervals();
    std::printf("periods=%lld intervals=%zu -> %s/schedules.txt\n",
                static_cast<long long>(count), intervals, out_dir.c_str());
    return 0;
}

int cmd_embed(const Config& cfg, const std::string& in_path, const std::string& out_dir) {
    PacketTrace trace = load_trace(in_path);
    std::vector<PacketEvent> packets;
    packets.reserve(trace.records.size());
    for (const auto& r : trace.records) packets.push_back({r.seq, r.t_ns, r.size_bytes});

    std::vector<DropDecision> decisions =
        run_embedder(packets, key_from(cfg), period_from(cfg), params_from(cfg));

    PacketTrace kept;
    std::int64_t drops = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i].dropped)
            ++drops;
        else
            kept.records.push_back(trace.records[i]);
    }
    std::filesystem::create_directories(out_dir);
    save_decisions(decisions, out_dir + "/decisions.csv");
    save_trace(kept, out_dir + "/embedded.csv");
    std::printf("packets=%zu dropped=%lld -> %s\n", packets.size(),
                static_cast<long long>(drops), out_dir.c_str());
    return 0;
}

int cmd_simulate(const Config& cfg, const std::string& out_dir, std::uint64_t seed,
                 bool no_watermark) {
    PathConfig path = path_from(cfg);
    WatermarkSpec wm;
    const WatermarkSpec* wm_ptr = nullptr;
    if (!no_watermark) {
        wm.key = key_from(cfg);
        wm.period = period_from(cfg);
        wm.params = params_from(cfg);
        wm_ptr = &wm;
    }
    PathResult res = simulate_path(path, wm_ptr, seed);
    std::filesystem::create_directories(out_dir);
    save_trace(res.destination, out_dir + "/trace.csv");
    if (wm_ptr) save_decisions(res.decisions, out_dir + "/decisions.csv");
    double thr = res.destination.size() >= 2 ? effective_throughput(res.destination) : 0.0;
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "packets=%zu\nwatermark_drops=%lld\nrandom_losses=%lld\n"
                  "retransmissions=%lld\nflow_end_ns=%lld\nthroughput_Bps=%.9g\n",
                  res.destination.size(), static_cast<long long>(res.watermark_drops),
                  static_cast<long long>(res.random_losses),
                  static_cast<long long>(res.retransmissions),
                  static_cast<long long>(res.flow_end_ns), thr);
    write_text(out_dir + "/summary.txt", buf);
    std::fputs(buf, stdout);
    return 0;
}

int cmd_bottleneck(const Config& cfg, const std::string& out_dir, std::uint64_t seed) {
    BottleneckResult res = simulate_bottleneck(bottleneck_from(cfg), seed);
    std::filesystem::create_directories(out_dir);
    save_loss_vector(res.losses, out_dir + "/losses.txt");
    std::printf("arrivals=%zu lost=%lld loss_rate=%.6g -> %s/losses.txt\n", res.losses.size(),
                static_cast<long long>(res.lost), res.losses.mean(), out_dir.c_str());
    return 0;
}

int cmd_detect(const Config& cfg, const std::string& in_path, const std::string& out_dir) {
    PacketTrace trace = load_trace(in_path);
    DetectionConfig det = detection_from(cfg);
    DetectionReport rep = detect(trace, det);
    std::filesystem::create_directories(out_dir);
    save_verdicts(rep, out_dir + "/verdicts.csv");
    auto ptd = packets_to_detect(trace, det);
    std::printf("watermarked=%d ratio=%.6f intervals=%lld hits=%lld", rep.watermarked ? 1 : 0,
                rep.cumulative_ratio, static_cast<long long>(rep.total_intervals),
                static_cast<long long>(rep.total_hits));
    if (ptd)
        std::printf(" packets_to_detect=%lld\n", static_cast<long long>(*ptd));
    else
        std::printf("\n");
    return rep.watermarked ? 0 : 2;
}

int cmd_invis(const Config& cfg, const std::string& out_dir, std::uint64_t seed) {
    InvisConfig ic;
    ic.bottleneck = bottleneck_from(cfg);
    ic.n = static_cast<int>(cfg.get_int("invis.n", 4));
    ic.q = static_cast<int>(cfg.get_int("invis.q", 150));
    ic.confidence = cfg.get_real("invis.confidence", 0.99);
    ic.key_secret = cfg.get_str("invis.key_secret", "dropmark-invis");
    InvisResult res = run_invisibility(ic, seed);
    save_invisibility(res, out_dir);
    std::printf("ks_distance=%.6g epsilon=%.6g accepted=%d observed_rate=%.6g "
                "model_rate=%.6g\n",
                res.ks.distance, res.ks.epsilon, res.ks.accepted ? 1 : 0, res.observed_rate,
                res.model_rate);
    return 0;
}

int cmd_experiment(const Config& cfg, const std::string& out_dir) {
    PlanConfig pc;
    pc.rates = parse_real_list(cfg.get_str("plan.rates"), "plan.rates");
    pc.p_ws = parse_real_list(cfg.get_str("plan.p_ws"), "plan.p_ws");
    pc.p_ls = parse_real_list(cfg.get_str("plan.p_ls", "0"), "plan.p_ls");
    pc.betas = parse_real_list(cfg.get_str("plan.betas", "0.25"), "plan.betas");
    pc.trials = static_cast<int>(cfg.get_int("plan.trials", 10));
    pc.base_params = params_from(cfg);
    pc.flow_packets = cfg.get_int("plan.flow_packets", 100'000);
    pc.period_ns = cfg.get_int("plan.period_ns", 30'000'000'000);
    pc.t0_ns = cfg.get_int("plan.t0_ns", 0);
    pc.packet_bytes = cfg.get_int("plan.packet_bytes", 1500);
    pc.path = path_from(cfg);
    pc.alpha = cfg.get_real("plan.alpha", 0.8);
    pc.window = static_cast<int>(cfg.get_int("plan.window", 30));
    pc.min_intervals = static_cast<int>(cfg.get_int("plan.min_intervals", 8));
    pc.slack_ns = cfg.get_int("plan.slack_ns", -1);
    pc.time_offset_ns = cfg.get_int("plan.time_offset_ns", -1);
    pc.key_secret = cfg.get_str("plan.key_secret", "dropmark-experiment");
    pc.base_seed = static_cast<std::uint64_t>(cfg.get_int("plan.base_seed", 1));

    PlanReport report = run_plan(pc);
    save_report(report, out_dir);
    for (const auto& c : report.cells)
        std::printf("rate=%.6g p_w=%.6g p_l=%.6g beta=%.6g tp=%.2f fp_nw=%.2f fp_wk=%.2f\n",
                    c.spec.rate_bytes_per_s, c.spec.p_w, c.spec.p_l, c.spec.beta, c.tp_rate,
                    c.fp_no_watermark, c.fp_wrong_key);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"packet-drop watermarking toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_dir = "out";
    std::uint64_t seed = 1;
    std::int64_t first_period = 0, period_count = 1;
    bool no_watermark = false;

    auto* genseq = app.add_subcommand("genseq", "generate keyed dropping schedules");
    genseq->add_option("--config", config_path, "config file")->required();
    genseq->add_option("--out", out_dir, "output directory");
    genseq->add_option("--first", first_period, "first period index");
    genseq->add_option("--periods", period_count, "number of periods");

    auto* embed = app.add_subcommand("embed", "apply drop decisions to a packet trace");
    embed->add_option("--config", config_path, "config file")->required();
    embed->add_option("--in", in_path, "input trace csv")->required();
    embed->add_option("--out", out_dir, "output directory");

    auto* simulate = app.add_subcommand("simulate", "run one flow through the relay path");
    simulate->add_option("--config", config_path, "config file")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--seed", seed, "simulation seed");
    simulate->add_flag("--no-watermark", no_watermark, "disable the watermarker");

    auto* bottleneck = app.add_subcommand("bottleneck", "run the bottleneck queue");
    bottleneck->add_option("--config", config_path, "config file")->required();
    bottleneck->add_option("--out", out_dir, "output directory");
    bottleneck->add_option("--seed", seed, "simulation seed");

    auto* detect_cmd = app.add_subcommand("detect", "scan a trace for a keyed watermark");
    detect_cmd->add_option("--config", config_path, "config file")->required();
    detect_cmd->add_option("--in", in_path, "input trace csv")->required();
    detect_cmd->add_option("--out", out_dir, "output directory");

    auto* invis = app.add_subcommand("invis", "fit bottleneck losses and compare statistics");
    invis->add_option("--config", config_path, "config file")->required();
    invis->add_option("--out", out_dir, "output directory");
    invis->add_option("--seed", seed, "simulation seed");

    auto* experiment = app.add_subcommand("experiment", "run a detection trial plan");
    experiment->add_option("--config", config_path, "config file")->required();
    experiment->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = Config::load(config_path);
        if (genseq->parsed()) return cmd_genseq(cfg, out_dir, first_period, period_count);
        if (embed->parsed()) return cmd_embed(cfg, in_path, out_dir);
        if (simulate->parsed()) return cmd_simulate(cfg, out_dir, seed, no_watermark);
        if (bottleneck->parsed()) return cmd_bottleneck(cfg, out_dir, seed);
        if (detect_cmd->parsed()) return cmd_detect(cfg, in_path, out_dir);
        if (invis->parsed()) return cmd_invis(cfg, out_dir, seed);
        if (experiment->parsed()) return cmd_experiment(cfg, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
