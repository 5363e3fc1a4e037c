#include "capsule/trust_module.hpp"

#include <cstdlib>
#include <fstream>

#include "capsule/errors.hpp"

namespace capsule {

Bytes Attestation::signed_payload() const {
    Encoder enc;
    enc.put_bytes(code_id);
    enc.put_bytes(nonce);
    enc.put_bytes(input_digest);
    enc.put_bytes(output_digest);
    enc.put_u64(counter_snapshot);
    return enc.take();
}

Bytes Attestation::encode() const {
    Encoder enc;
    enc.put_bytes(code_id);
    enc.put_bytes(nonce);
    enc.put_bytes(input_digest);
    enc.put_bytes(output_digest);
    enc.put_u64(counter_snapshot);
    enc.put_bytes(signature);
    return enc.take();
}

Attestation Attestation::decode(const Bytes& b) {
    Decoder dec(b);
    Attestation a;
    a.code_id = dec.get_bytes();
    a.nonce = dec.get_bytes();
    a.input_digest = dec.get_bytes();
    a.output_digest = dec.get_bytes();
    a.counter_snapshot = dec.get_u64();
    a.signature = dec.get_bytes();
    dec.expect_done();
    return a;
}

Drbg::Drbg(Bytes seed) : seed_(std::move(seed)) {}

Bytes Drbg::generate(size_t n) {
    Bytes out;
    out.reserve(n);
    while (out.size() < n) {
        if (pool_.empty()) {
            Encoder enc;
            enc.put_bytes(seed_);
            enc.put_u64(counter_++);
            pool_ = crypto::sha256(enc.bytes());
        }
        size_t take = std::min(n - out.size(), pool_.size());
        out.insert(out.end(), pool_.begin(), pool_.begin() + long(take));
        pool_.erase(pool_.begin(), pool_.begin() + long(take));
    }
    return out;
}

TrustModule::TrustModule(std::string boundary_id, std::filesystem::path counter_path)
    : boundary_id_(std::move(boundary_id)),
      counter_path_(std::move(counter_path)),
      attestation_key_(crypto::SigningKey::generate()) {
    attestation_public_ = attestation_key_.public_der();

    if (const char* seed = std::getenv("CAPSULE_TEST_SEED")) {
        Encoder enc;
        enc.put_string(seed);
        enc.put_string(boundary_id_);
        drbg_.emplace(crypto::sha256(enc.bytes()));
    }

    if (!counter_path_.empty() && std::filesystem::exists(counter_path_)) {
        std::ifstream in(counter_path_, std::ios::binary);
        Bytes raw(8);
        in.read(reinterpret_cast<char*>(raw.data()), 8);
        if (in.gcount() != 8) throw Error("corrupt counter file");
        Decoder dec(raw);
        counter_ = dec.get_u64();
    }
}

Attestation TrustModule::attest(const Bytes& code_id, const Bytes& nonce,
                                const Bytes& input, const Bytes& output) {
    std::lock_guard lock(mutex_);
    Attestation att;
    att.code_id = code_id;
    att.nonce = nonce;
    att.input_digest = crypto::sha256(input);
    att.output_digest = crypto::sha256(output);
    att.counter_snapshot = counter_;
    att.signature = attestation_key_.sign(att.signed_payload());
    return att;
}

uint64_t TrustModule::counter_read() const {
    std::lock_guard lock(mutex_);
    return counter_;
}

uint64_t TrustModule::counter_advance() {
    std::lock_guard lock(mutex_);
    uint64_t next = counter_ + 1;
    persist_counter(next);
    counter_ = next;
    return next;
}

void TrustModule::persist_counter(uint64_t value) {
    if (counter_path_.empty()) return;
    // write-temp-then-rename for crash atomicity
    std::filesystem::path tmp = counter_path_;
    tmp += ".tmp";
    {
        Encoder enc;
        enc.put_u64(value);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(enc.bytes().data()),
                  long(enc.bytes().size()));
        out.flush();
        if (!out) throw Error("counter persistence failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, counter_path_, ec);
    if (ec) throw Error("counter persistence failed: " + ec.message());
}

Bytes TrustModule::random_bytes(size_t n) {
    if (n < 1) throw Error("random_bytes requires n >= 1");
    std::lock_guard lock(mutex_);
    if (drbg_) return drbg_->generate(n);
    return crypto::system_random(n);
}

bool verify_attestation(const Attestation& att, const Bytes& module_public_key,
                        const Bytes& expected_code_id, const Bytes& expected_nonce) {
    if (module_public_key.empty())
        throw SignatureError("unknown attestation key");
    if (!crypto::verify_signature(module_public_key, att.signed_payload(),
                                  att.signature))
        return false;
    return att.code_id == expected_code_id && att.nonce == expected_nonce;
}

}  // namespace capsule
