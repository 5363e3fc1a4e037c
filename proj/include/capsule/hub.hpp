#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "capsule/bytes.hpp"
#include "capsule/crypto.hpp"

namespace capsule::hub {

// Availability faults the hub may inject: drop or corrupt a message with
// the given probability, or delay it. CLI form: drop:p|corrupt:p|delay:ms
struct FaultConfig {
    double drop_p = 0.0;
    double corrupt_p = 0.0;
    int delay_ms = 0;

    static FaultConfig parse(const std::string& spec);
    bool any() const { return drop_p > 0 || corrupt_p > 0 || delay_ms > 0; }
};

struct SignedTime {
    int64_t secs = 0;
    Bytes nonce;
    Bytes signature;

    Bytes signed_payload() const;
    Bytes encode() const;
    static SignedTime decode(const Bytes& b);
};

// Checks the authority signature, the nonce echo, and that the timestamp
// has not moved backwards past the skew window relative to the newest time
// this verifier has already accepted.
bool verify_signed_time(const SignedTime& st, const Bytes& authority_public,
                        const Bytes& expected_nonce, int64_t last_accepted_secs,
                        int64_t skew_secs = 300);

// A registered service: consumes one request message, produces one response.
using Handler = std::function<Bytes(const Bytes&)>;

// Untrusted service-side proxy. Relays opaque messages between capsules and
// endpoints, serves signed time and 4 KiB block storage, and keeps exact
// byte counters. Trusted for availability only: it may drop, delay, or
// corrupt traffic but holds no capsule keys.
class Hub {
public:
    explicit Hub(uint64_t fault_seed = 0);

    void register_endpoint(const std::string& name, Handler h);

    // Socket-style relay. connect returns a descriptor (>= 0) or -1 for an
    // unknown endpoint. send pushes the endpoint's response onto the
    // channel's receive queue; recv pops it (nullopt models a timeout).
    int connect(const std::string& endpoint);
    bool send(int fd, const Bytes& msg);
    std::optional<Bytes> recv(int fd);
    void close(int fd);

    // Trusted time service (the authority key is held by the simulated NTP
    // server, not by the hub relay logic).
    SignedTime time(const Bytes& nonce_echo);
    const Bytes& time_authority_public() const { return time_public_; }
    void set_clock(int64_t secs) { now_secs_ = secs; }
    void advance_clock(int64_t d) { now_secs_ += d; }
    int64_t clock() const { return now_secs_; }

    // Block storage: 4 KiB blocks keyed by (namespace, index). Contents are
    // opaque ciphertext; integrity is the capsule's job.
    static constexpr size_t kBlockSize = 4096;
    void block_write(const std::string& ns, uint32_t index, const Bytes& data);
    std::optional<Bytes> block_read(const std::string& ns, uint32_t index) const;
    // Adversarial helper for tests: swap two stored blocks.
    void block_swap(const std::string& ns, uint32_t a, uint32_t b);

    void set_faults(FaultConfig f) { faults_ = f; }
    const FaultConfig& faults() const { return faults_; }

    uint64_t bytes_in() const { return bytes_in_; }    // responses to capsules
    uint64_t bytes_out() const { return bytes_out_; }  // requests from capsules
    uint64_t bytes_total() const { return bytes_in_ + bytes_out_; }
    void reset_counters() {
        bytes_in_ = 0;
        bytes_out_ = 0;
    }

private:
    struct Channel {
        std::string endpoint;
        std::vector<Bytes> recv_queue;
        bool open = false;
    };

    bool maybe_fault(Bytes& msg);  // returns false if the message is dropped

    std::map<std::string, Handler> endpoints_;
    std::vector<Channel> channels_;
    FaultConfig faults_;
    std::mt19937_64 rng_;

    int64_t now_secs_ = 1262304000;  // simulated clock epoch
    crypto::SigningKey time_key_;
    Bytes time_public_;

    std::map<std::pair<std::string, uint32_t>, Bytes> blocks_;
    uint64_t bytes_in_ = 0;
    uint64_t bytes_out_ = 0;
};

}  // namespace capsule::hub
