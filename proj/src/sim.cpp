#include "capsule/sim.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::sim {

namespace {

// Calibrated processing constants (microseconds). Absolute hardware
// figures are not the target; orderings and the network-dominated
// magnitudes are.
constexpr double kPolicyUs = 300.0;
constexpr double kDataBaseUs = 170.0;
constexpr double kPerByteUs = 0.002;   // marshalling cost per payload byte
constexpr double kHubMarshalUs = 140.0;
constexpr double kTtpPerEventUs = 2000.0;     // server-side per-tick cost
constexpr double kColoPerEventUs = 400.0;     // policy+data per tick
constexpr double kFramingBytes = 1024;        // constant per-invocation overhead
constexpr double kPerByteOverhead = 0.08;     // wire expansion factor
constexpr double kEventReqBytes = 150;
constexpr double kEventRespBytes = 100;
constexpr double kEventFrameBytes = 128;
constexpr double kBlobOverheadBytes = 530;    // crowd id + AEAD + framing

struct Jitter {
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> dist{0.97, 1.03};
    explicit Jitter(uint64_t seed) : rng(seed) {}
    double operator()() { return dist(rng); }
};

uint64_t invocation_bytes(Mode mode, size_t req, size_t resp) {
    if (mode != Mode::Ttp) return 0;  // no network involved
    return uint64_t(double(req + resp) * (1.0 + kPerByteOverhead) + kFramingBytes);
}

}  // namespace

Mode parse_mode(const std::string& name) {
    if (name == "base") return Mode::Base;
    if (name == "ttp") return Mode::Ttp;
    if (name == "colocated") return Mode::Colocated;
    throw Error("unknown mode '" + name + "' (expected base|ttp|colocated)");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Base: return "base";
        case Mode::Ttp: return "ttp";
        default: return "colocated";
    }
}

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) return 0;
    std::sort(samples.begin(), samples.end());
    double rank = p / 100.0 * double(samples.size() - 1);
    size_t lo = size_t(rank);
    size_t hi = std::min(lo + 1, samples.size() - 1);
    double frac = rank - double(lo);
    return samples[lo] * (1 - frac) + samples[hi] * frac;
}

void Metrics::finalize() {
    median = percentile(latency_us, 50);
    p50lo = percentile(latency_us, 25);
    p50hi = percentile(latency_us, 75);
    p95lo = percentile(latency_us, 2.5);
    p95hi = percentile(latency_us, 97.5);
}

Metrics run_invocation_bench(const ScenarioConfig& cfg) {
    if (cfg.reps < 1) throw Error("reps must be >= 1");
    Jitter j(cfg.seed * 1000003 + uint64_t(cfg.mode));
    Metrics m;
    std::map<std::string, double> sums;

    for (int i = 0; i < cfg.reps; ++i) {
        double policy = kPolicyUs * j();
        double data =
            (kDataBaseUs + kPerByteUs * double(cfg.payload_req + cfg.payload_resp)) *
            j();
        double boundary = 0, hub = 0;
        if (cfg.mode == Mode::Colocated) {
            boundary = cfg.boundary_overhead_us * j();
        } else if (cfg.mode == Mode::Ttp) {
            boundary = cfg.boundary_overhead_us * j();
            // One connection round trip plus one request round trip.
            hub = (2.0 * cfg.rtt_ms * 1000.0 + kHubMarshalUs) * j();
        }
        double total = policy + data + boundary + hub;
        m.latency_us.push_back(total);
        sums["policy"] += policy;
        sums["data"] += data;
        sums["boundary"] += boundary;
        sums["hub"] += hub;
    }
    for (const auto& [k, v] : sums) m.breakdown_us[k] = v / double(cfg.reps);
    m.bandwidth_bytes = invocation_bytes(cfg.mode, cfg.payload_req, cfg.payload_resp);
    m.finalize();
    return m;
}

std::vector<std::pair<size_t, Metrics>> run_payload_sweep(
    const ScenarioConfig& cfg, const std::vector<size_t>& sizes) {
    std::vector<std::pair<size_t, Metrics>> out;
    for (size_t sz : sizes) {
        if (sz == 0) throw Error("payload size must be positive");
        ScenarioConfig c = cfg;
        c.payload_req = sz;
        c.payload_resp = sz;
        c.seed = cfg.seed + sz;  // independent jitter stream per size
        out.emplace_back(sz, run_invocation_bench(c));
    }
    return out;
}

Metrics run_stock_burst(const ScenarioConfig& cfg, int n_events) {
    if (n_events < 0) throw Error("event count must be >= 0");
    Jitter j(cfg.seed * 7000003 + uint64_t(cfg.mode));
    Metrics m;
    std::map<std::string, double> sums;

    for (int rep = 0; rep < std::max(cfg.reps, 1); ++rep) {
        double hub = 0, boundary = 0, policy = 0, data = 0;
        if (n_events > 0 && cfg.mode == Mode::Ttp && !cfg.fresh_connection_per_event)
            hub += 2.0 * cfg.rtt_ms * 1000.0 * j();  // one handshake per burst
        for (int e = 0; e < n_events; ++e) {
            switch (cfg.mode) {
                case Mode::Ttp: {
                    double rtts = cfg.fresh_connection_per_event ? 2.0 : 1.0;
                    hub += rtts * cfg.rtt_ms * 1000.0 * j();
                    data += kTtpPerEventUs * j();
                    break;
                }
                case Mode::Colocated:
                    boundary += cfg.boundary_overhead_us * j();
                    data += kColoPerEventUs * j();
                    break;
                case Mode::Base:
                    data += kColoPerEventUs * j();
                    break;
            }
        }
        m.latency_us.push_back(hub + boundary + policy + data);
        sums["hub"] += hub;
        sums["boundary"] += boundary;
        sums["policy"] += policy;
        sums["data"] += data;
    }
    double reps = double(std::max(cfg.reps, 1));
    for (const auto& [k, v] : sums) m.breakdown_us[k] = v / reps;
    if (cfg.mode == Mode::Ttp)
        m.bandwidth_bytes = uint64_t(
            double(n_events) * ((kEventReqBytes + kEventRespBytes) *
                                    (1.0 + kPerByteOverhead) +
                                kEventFrameBytes));
    m.finalize();
    return m;
}

uint64_t run_aggregation_bench(int n_users, Mode mode, size_t per_user_bytes) {
    if (n_users < 2) throw Error("aggregation needs at least 2 users");
    uint64_t blob = uint64_t(double(per_user_bytes) + kBlobOverheadBytes);
    uint64_t n = uint64_t(n_users);
    // Hub-and-spoke: N-1 contributions travel to the aggregator, the final
    // release moves all N. Under TTP hosting each contribution additionally
    // transits from the contributor's third-party host.
    uint64_t total = (n - 1) * blob + n * blob;
    if (mode == Mode::Ttp) total += (n - 1) * blob;
    return total;
}

std::string csv_row(const std::string& metric, const std::string& scenario,
                    double param, const Metrics& m) {
    std::ostringstream os;
    os << metric << "," << scenario << "," << param << "," << m.median << ","
       << m.p50lo << "," << m.p50hi << "," << m.p95lo << "," << m.p95hi;
    return os.str();
}

}  // namespace capsule::sim
