#include "capsule/hub.hpp"

#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::hub {

FaultConfig FaultConfig::parse(const std::string& spec) {
    FaultConfig cfg;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, '|')) {
        if (part.empty()) continue;
        auto colon = part.find(':');
        if (colon == std::string::npos)
            throw Error("bad fault spec: " + part);
        std::string kind = part.substr(0, colon);
        std::string val = part.substr(colon + 1);
        if (kind == "drop")
            cfg.drop_p = std::stod(val);
        else if (kind == "corrupt")
            cfg.corrupt_p = std::stod(val);
        else if (kind == "delay")
            cfg.delay_ms = std::stoi(val);
        else
            throw Error("unknown fault kind: " + kind);
    }
    if (cfg.drop_p < 0 || cfg.drop_p > 1 || cfg.corrupt_p < 0 || cfg.corrupt_p > 1 ||
        cfg.delay_ms < 0)
        throw Error("fault parameters out of range");
    return cfg;
}

Bytes SignedTime::signed_payload() const {
    Encoder enc;
    enc.put_i64(secs);
    enc.put_bytes(nonce);
    return enc.take();
}

Bytes SignedTime::encode() const {
    Encoder enc;
    enc.put_i64(secs);
    enc.put_bytes(nonce);
    enc.put_bytes(signature);
    return enc.take();
}

SignedTime SignedTime::decode(const Bytes& b) {
    Decoder dec(b);
    SignedTime st;
    st.secs = dec.get_i64();
    st.nonce = dec.get_bytes();
    st.signature = dec.get_bytes();
    dec.expect_done();
    return st;
}

bool verify_signed_time(const SignedTime& st, const Bytes& authority_public,
                        const Bytes& expected_nonce, int64_t last_accepted_secs,
                        int64_t skew_secs) {
    if (st.signature.empty()) return false;
    if (!crypto::verify_signature(authority_public, st.signed_payload(), st.signature))
        return false;
    if (st.nonce != expected_nonce) return false;
    // A replayed old timestamp may lag the newest accepted one by at most
    // the skew window.
    if (st.secs + skew_secs < last_accepted_secs) return false;
    return true;
}

Hub::Hub(uint64_t fault_seed)
    : rng_(fault_seed), time_key_(crypto::SigningKey::generate()) {
    time_public_ = time_key_.public_der();
}

void Hub::register_endpoint(const std::string& name, Handler h) {
    endpoints_[name] = std::move(h);
}

int Hub::connect(const std::string& endpoint) {
    if (!endpoints_.count(endpoint)) return -1;
    channels_.push_back(Channel{endpoint, {}, true});
    return int(channels_.size()) - 1;
}

bool Hub::maybe_fault(Bytes& msg) {
    if (faults_.drop_p > 0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng_) < faults_.drop_p) return false;
    }
    if (faults_.corrupt_p > 0 && !msg.empty()) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng_) < faults_.corrupt_p) {
            std::uniform_int_distribution<size_t> pos(0, msg.size() * 8 - 1);
            size_t bit = pos(rng_);
            msg[bit / 8] ^= uint8_t(1u << (bit % 8));
        }
    }
    return true;
}

bool Hub::send(int fd, const Bytes& msg) {
    if (fd < 0 || size_t(fd) >= channels_.size() || !channels_[fd].open)
        throw Error("send on closed or invalid channel");
    bytes_out_ += msg.size();

    Bytes delivered = msg;
    if (!maybe_fault(delivered)) return true;  // dropped in flight

    auto& handler = endpoints_.at(channels_[fd].endpoint);
    Bytes resp = handler(delivered);

    Bytes back = std::move(resp);
    if (!maybe_fault(back)) return true;  // response dropped

    bytes_in_ += back.size();
    channels_[fd].recv_queue.push_back(std::move(back));
    return true;
}

std::optional<Bytes> Hub::recv(int fd) {
    if (fd < 0 || size_t(fd) >= channels_.size() || !channels_[fd].open)
        throw Error("recv on closed or invalid channel");
    auto& q = channels_[fd].recv_queue;
    if (q.empty()) return std::nullopt;  // timeout
    Bytes msg = std::move(q.front());
    q.erase(q.begin());
    return msg;
}

void Hub::close(int fd) {
    if (fd >= 0 && size_t(fd) < channels_.size()) channels_[fd].open = false;
}

SignedTime Hub::time(const Bytes& nonce_echo) {
    SignedTime st;
    st.secs = now_secs_;
    st.nonce = nonce_echo;
    st.signature = time_key_.sign(st.signed_payload());
    return st;
}

void Hub::block_write(const std::string& ns, uint32_t index, const Bytes& data) {
    if (data.size() > kBlockSize) throw Error("block larger than 4 KiB");
    blocks_[{ns, index}] = data;
}

std::optional<Bytes> Hub::block_read(const std::string& ns, uint32_t index) const {
    auto it = blocks_.find({ns, index});
    if (it == blocks_.end()) return std::nullopt;
    return it->second;
}

void Hub::block_swap(const std::string& ns, uint32_t a, uint32_t b) {
    std::swap(blocks_[{ns, a}], blocks_[{ns, b}]);
}

}  // namespace capsule::hub
