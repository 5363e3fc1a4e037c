#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "capsule/errors.hpp"
#include "capsule/sim.hpp"

int main(int argc, char** argv) {
    using namespace capsule::sim;

    CLI::App app{"deployment benchmark harness"};
    app.require_subcommand(1);

    std::string mode = "base", out_file;
    double rtt_ms = 10.0;
    size_t payload = 1024;
    int reps = 100, events = 1000, users = 10;
    uint64_t seed = 1;
    bool fresh_conn = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--mode", mode, "base|ttp|colocated");
        cmd->add_option("--rtt-ms", rtt_ms, "network round-trip time");
        cmd->add_option("--payload", payload, "payload bytes each way");
        cmd->add_option("--reps", reps, "repetitions");
        cmd->add_option("--seed", seed, "jitter seed");
        cmd->add_option("--out", out_file, "also write rows to this file");
    };

    auto* invoke = app.add_subcommand("invoke", "single invocation cost");
    add_common(invoke);
    auto* sweep = app.add_subcommand("sweep", "payload sweep 256B..32KB");
    add_common(sweep);
    auto* stock = app.add_subcommand("stock", "ticker event burst");
    add_common(stock);
    stock->add_option("--events", events, "ticker events per burst");
    stock->add_flag("--fresh-connection", fresh_conn,
                    "open a connection per event instead of per burst");
    auto* aggregate = app.add_subcommand("aggregate", "crowd aggregation bandwidth");
    add_common(aggregate);
    aggregate->add_option("--users", users, "crowd size");

    CLI11_PARSE(app, argc, argv);

    std::ostringstream rows;
    rows << "metric,scenario,param,median,p50lo,p50hi,p95lo,p95hi\n";

    try {
        ScenarioConfig cfg;
        cfg.mode = parse_mode(mode);
        cfg.rtt_ms = rtt_ms;
        cfg.payload_req = cfg.payload_resp = payload;
        cfg.reps = reps;
        cfg.seed = seed;
        cfg.fresh_connection_per_event = fresh_conn;

        auto bw_row = [&](const std::string& metric, double param, uint64_t bytes) {
            rows << metric << "," << mode << "," << param << "," << bytes << ","
                 << bytes << "," << bytes << "," << bytes << "," << bytes << "\n";
        };

        if (*invoke) {
            Metrics m = run_invocation_bench(cfg);
            rows << csv_row("invoke_latency_us", mode, double(payload), m) << "\n";
            bw_row("invoke_bandwidth_bytes", double(payload), m.bandwidth_bytes);
            std::cerr << "invoke " << mode << ": median " << m.median / 1000.0
                      << " ms, " << m.bandwidth_bytes << " bytes/op\n";
        } else if (*sweep) {
            std::vector<size_t> sizes;
            for (size_t s = 256; s <= 32768; s *= 2) sizes.push_back(s);
            for (const auto& [sz, m] : run_payload_sweep(cfg, sizes)) {
                rows << csv_row("sweep_latency_us", mode, double(sz), m) << "\n";
                bw_row("sweep_bandwidth_bytes", double(sz), m.bandwidth_bytes);
            }
        } else if (*stock) {
            Metrics m = run_stock_burst(cfg, events);
            rows << csv_row("stock_burst_latency_us", mode, double(events), m) << "\n";
            bw_row("stock_burst_bandwidth_bytes", double(events), m.bandwidth_bytes);
            std::cerr << "stock burst " << mode << " n=" << events << ": median "
                      << m.median / 1e6 << " s\n";
        } else if (*aggregate) {
            uint64_t bytes = run_aggregation_bench(users, cfg.mode);
            bw_row("aggregation_bandwidth_bytes", double(users), bytes);
            std::cerr << "aggregation " << mode << " N=" << users << ": " << bytes
                      << " bytes\n";
        }
    } catch (const capsule::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::cout << rows.str();
    if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::trunc);
        out << rows.str();
        if (!out) {
            std::cerr << "error: cannot write " << out_file << "\n";
            return 1;
        }
    }
    return 0;
}
