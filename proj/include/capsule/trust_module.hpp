#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "capsule/bytes.hpp"
#include "capsule/crypto.hpp"

namespace capsule {

// Signed evidence that code identified by `code_id` ran inside the module's
// boundary, consuming `input` and producing `output`, bound to a fresh nonce
// and the module's monotonic counter.
struct Attestation {
    Bytes code_id;
    Bytes nonce;
    Bytes input_digest;
    Bytes output_digest;
    uint64_t counter_snapshot = 0;
    Bytes signature;

    Bytes signed_payload() const;
    Bytes encode() const;
    static Attestation decode(const Bytes& b);
};

// Deterministic CSPRNG stream (SHA-256 in counter mode over a seed).
class Drbg {
public:
    explicit Drbg(Bytes seed);
    Bytes generate(size_t n);

private:
    Bytes seed_;
    uint64_t counter_ = 0;
    Bytes pool_;
};

// Simulated trusted module: isolation boundary identity, durable monotonic
// counter, CSPRNG, and attestation key. Stands in for a VMM/TPM/secure
// co-processor; the boundary is a process-level compartment.
class TrustModule {
public:
    // counter_path empty -> counter held in memory only (no durability).
    // A decimal CAPSULE_TEST_SEED environment variable makes random_bytes
    // reproducible.
    explicit TrustModule(std::string boundary_id,
                         std::filesystem::path counter_path = {});

    Attestation attest(const Bytes& code_id, const Bytes& nonce, const Bytes& input,
                       const Bytes& output);

    uint64_t counter_read() const;
    // Durable before return; throws Error on persistence failure.
    uint64_t counter_advance();

    Bytes random_bytes(size_t n);

    const Bytes& attestation_public_key() const { return attestation_public_; }
    const std::string& boundary_id() const { return boundary_id_; }

private:
    void persist_counter(uint64_t value);

    std::string boundary_id_;
    std::filesystem::path counter_path_;
    mutable std::mutex mutex_;
    uint64_t counter_ = 0;
    crypto::SigningKey attestation_key_;
    Bytes attestation_public_;
    std::optional<Drbg> drbg_;
};

// Verifier-side check against the module's certified public attestation key.
// Throws SignatureError if `module_public_key` is empty (unknown key), which
// is distinct from a false result.
bool verify_attestation(const Attestation& att, const Bytes& module_public_key,
                        const Bytes& expected_code_id, const Bytes& expected_nonce);

}  // namespace capsule
