#include "dropmark/dsg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dropmark {

SharedKey SharedKey::from_strings(std::string_view secret, std::string_view id) {
    SharedKey k;
    k.secret.assign(secret.begin(), secret.end());
    k.watermarker_id.assign(id.begin(), id.end());
    return k;
}

std::vector<std::uint8_t> SharedKey::combined() const {
    std::vector<std::uint8_t> out(secret);
    out.insert(out.end(), watermarker_id.begin(), watermarker_id.end());
    return out;
}

void PeriodConfig::validate() const {
    if (period_ns <= 0) throw std::invalid_argument("period_ns must be positive");
    if (rate_bytes_per_s <= 0.0) throw std::invalid_argument("rate must be positive");
    if (packet_bytes <= 0) throw std::invalid_argument("packet_bytes must be positive");
    if (slots_per_period() < 1) throw std::invalid_argument("period shorter than one slot");
}

std::int64_t PeriodConfig::slots_per_period() const {
    long double n = rate_bytes_per_s * static_cast<long double>(period_ns) /
                    (static_cast<long double>(packet_bytes) * 1e9L);
    return static_cast<std::int64_t>(std::ceil(n));
}

std::int64_t PeriodConfig::slot_ns() const {
    return std::llround(1e9 * static_cast<double>(packet_bytes) / rate_bytes_per_s);
}

std::int64_t PeriodConfig::period_of(std::int64_t t_ns) const {
    std::int64_t d = t_ns - t0_ns;
    // Floor division (timestamps may precede the epoch after offset removal).
    std::int64_t q = d / period_ns;
    if (d % period_ns != 0 && d < 0) --q;
    return q;
}

std::int64_t PeriodConfig::period_start(std::int64_t index) const {
    return t0_ns + index * period_ns;
}

SyncedStream sync_stream(const SharedKey& key, const PeriodConfig& cfg, std::int64_t now_ns) {
    cfg.validate();
    if (now_ns < cfg.t0_ns) throw std::invalid_argument("cannot sync before the epoch");
    KeyedStream stream(std::span<const std::uint8_t>(key.combined()));
    std::int64_t elapsed_periods = (now_ns - cfg.t0_ns) / cfg.period_ns;
    for (std::int64_t i = 0; i < elapsed_periods; ++i) stream.next_u64();
    return {std::move(stream), elapsed_periods};
}

BinaryLossVector gen_binary_sequence(KeyedStream& syn, const GilbertParams& params,
                                     std::int64_t n_slots) {
    params.validate();
    if (n_slots < 0) throw std::invalid_argument("slot count must be non-negative");
    KeyedStream child = KeyedStream::from_raw_u64(syn.next_u64());
    BinaryLossVector out;
    out.bits.resize(static_cast<std::size_t>(n_slots));
    GilbertState s{initial_state(params.n)};
    for (std::int64_t i = 0; i < n_slots; ++i) {
        StepResult r = step(s, params, child.next_real());
        out.bits[static_cast<std::size_t>(i)] = r.drop ? 1 : 0;
        s = r.next;
    }
    return out;
}

DroppingSchedule to_schedule(const BinaryLossVector& bits, std::int64_t slot_width_ns,
                             std::int64_t period_index) {
    if (slot_width_ns <= 0) throw std::invalid_argument("slot width must be positive");
    DroppingSchedule sched;
    sched.period_index = period_index;
    const std::size_t n = bits.size();
    std::size_t i = 0;
    while (i < n) {
        if (!bits[i]) {
            ++i;
            continue;
        }
        std::size_t run = 1;
        while (i + run < n && bits[i + run]) ++run;
        // 1-based slot position of the first drop in the run.
        sched.starts_ns.push_back(static_cast<std::int64_t>(i + 1) * slot_width_ns);
        sched.durations_ns.push_back(static_cast<std::int64_t>(run) * slot_width_ns);
        i += run;
    }
    return sched;
}

ScheduleProvider::ScheduleProvider(SharedKey key, PeriodConfig cfg, GilbertParams params)
    : key_(std::move(key)),
      cfg_(cfg),
      params_(std::move(params)),
      stream_(sync_stream(key_, cfg_, cfg_.t0_ns).stream) {
    cfg_.validate();
    params_.validate();
}

void ScheduleProvider::rewind() {
    stream_ = sync_stream(key_, cfg_, cfg_.t0_ns).stream;
    next_period_ = 0;
}

const DroppingSchedule& ScheduleProvider::schedule_for(std::int64_t period_index) {
    if (period_index < 0) throw std::invalid_argument("period index must be >= 0");
    if (have_current_ && current_.period_index == period_index) return current_;
    if (period_index < next_period_) rewind();
    while (next_period_ < period_index) {
        stream_.next_u64();  // discard the skipped period's seed
        ++next_period_;
    }
    BinaryLossVector bits = gen_binary_sequence(stream_, params_, cfg_.slots_per_period());
    current_ = to_schedule(bits, cfg_.slot_ns(), period_index);
    have_current_ = true;
    ++next_period_;
    ++built_;
    return current_;
}

namespace {

void append_list(std::ostringstream& out, const std::vector<std::int64_t>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out << ',';
        out << xs[i];
    }
}

std::vector<std::int64_t> parse_list(const std::string& s) {
    std::vector<std::int64_t> out;
    if (s.empty()) return out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoll(item));
    return out;
}

}  // namespace

std::string schedules_to_text(const std::vector<DroppingSchedule>& schedules) {
    std::ostringstream out;
    for (const auto& s : schedules) {
        out << "period=" << s.period_index << " D=";
        append_list(out, s.starts_ns);
        out << " E=";
        append_list(out, s.durations_ns);
        out << "\n";
    }
    return out.str();
}

std::vector<DroppingSchedule> schedules_from_text(const std::string& text) {
    std::vector<DroppingSchedule> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto dpos = line.find(" D=");
        auto epos = line.find(" E=");
        if (line.rfind("period=", 0) != 0 || dpos == std::string::npos ||
            epos == std::string::npos || epos < dpos)
            throw std::runtime_error("bad schedule line: " + line);
        DroppingSchedule s;
        s.period_index = std::stoll(line.substr(7, dpos - 7));
        s.starts_ns = parse_list(line.substr(dpos + 3, epos - dpos - 3));
        s.durations_ns = parse_list(line.substr(epos + 3));
        if (s.starts_ns.size() != s.durations_ns.size())
            throw std::runtime_error("start/duration count mismatch: " + line);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dropmark
