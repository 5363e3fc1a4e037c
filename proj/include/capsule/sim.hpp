#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace capsule::sim {

enum class Mode { Base, Ttp, Colocated };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

// One benchmark scenario. Latency is computed in virtual time from a
// seeded model (network transit, boundary crossings, calibrated processing
// constants with multiplicative jitter), so results are deterministic for
// a fixed seed. rtt_ms is the full network round trip.
struct ScenarioConfig {
    Mode mode = Mode::Base;
    double rtt_ms = 10.0;
    size_t payload_req = 1024;
    size_t payload_resp = 1024;
    std::string kind = "dummy";
    int reps = 100;
    double boundary_overhead_us = 800.0;
    uint64_t seed = 1;
    // Stock bursts: open a fresh connection per event (adds one RTT each)
    // instead of one handshake per burst.
    bool fresh_connection_per_event = false;
};

struct Metrics {
    std::vector<double> latency_us;
    double median = 0, p50lo = 0, p50hi = 0, p95lo = 0, p95hi = 0;
    uint64_t bandwidth_bytes = 0;  // network bytes per operation
    std::map<std::string, double> breakdown_us;  // mean per component

    void finalize();  // computes the percentile fields from latency_us
};

// p in [0,100]; linear interpolation between order statistics.
double percentile(std::vector<double> samples, double p);

// Single-invocation cost (1 KB / 1 KB by default), one sample per rep.
Metrics run_invocation_bench(const ScenarioConfig& cfg);

// Per-payload-size metrics with payload_req = payload_resp = size.
std::vector<std::pair<size_t, Metrics>> run_payload_sweep(
    const ScenarioConfig& cfg, const std::vector<size_t>& sizes);

// Back-to-back ticker events; each sample is the total burst latency.
Metrics run_stock_burst(const ScenarioConfig& cfg, int n_events);

// Hub-and-spoke crowd aggregation: users 1..N-1 merge into user N, then
// one release pull. Returns total network bytes.
uint64_t run_aggregation_bench(int n_users, Mode mode,
                               size_t per_user_bytes = 15 * 1024);

std::string csv_row(const std::string& metric, const std::string& scenario,
                    double param, const Metrics& m);

}  // namespace capsule::sim
