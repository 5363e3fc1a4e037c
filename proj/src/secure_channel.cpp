#include "capsule/secure_channel.hpp"

#include "capsule/errors.hpp"

namespace capsule {

namespace {

constexpr std::string_view kHelloTag = "sc-hello";
constexpr std::string_view kReplyTag = "sc-reply";

Bytes record_aad(std::string_view direction, uint64_t seq) {
    Encoder enc;
    enc.put_string(direction);
    enc.put_u64(seq);
    return enc.take();
}

Bytes seal_record(const Bytes& key, std::string_view direction, uint64_t seq,
                  const Bytes& plaintext) {
    Bytes nonce = crypto::system_random(12);
    return crypto::aead_seal(key, nonce, plaintext, record_aad(direction, seq));
}

Bytes open_record(const Bytes& key, std::string_view direction, uint64_t seq,
                  const Bytes& record) {
    auto pt = crypto::aead_open(key, record, record_aad(direction, seq));
    if (!pt) throw TamperError("secure channel record failed authentication");
    return *pt;
}

Bytes identity_transcript(const std::string& name, const Bytes& client_pub,
                          const Bytes& server_pub, const Bytes& nonce) {
    Encoder enc;
    enc.put_string(name);
    enc.put_bytes(client_pub);
    enc.put_bytes(server_pub);
    enc.put_bytes(nonce);
    return enc.take();
}

}  // namespace

SecureClient::SecureClient(std::string server_name, Bytes pinned_identity_public,
                           Bytes seed32)
    : server_name_(std::move(server_name)),
      pinned_public_(std::move(pinned_identity_public)),
      dh_(crypto::DhKeyPair::generate(seed32)),
      nonce_(crypto::sha256(seed32)) {
    nonce_.resize(16);
}

Bytes SecureClient::hello() const {
    Encoder enc;
    enc.put_string(kHelloTag);
    enc.put_string(server_name_);
    enc.put_bytes(dh_.public_key());
    enc.put_bytes(nonce_);
    return enc.take();
}

void SecureClient::finish(const Bytes& server_hello) {
    Decoder dec(server_hello);
    if (dec.get_string() != kReplyTag)
        throw TamperError("secure channel: unexpected handshake reply");
    Bytes server_pub = dec.get_bytes();
    Bytes sig = dec.get_bytes();
    dec.expect_done();

    Bytes transcript =
        identity_transcript(server_name_, dh_.public_key(), server_pub, nonce_);
    if (!crypto::verify_signature(pinned_public_, transcript, sig))
        throw TamperError("secure channel: pinned identity mismatch for " +
                          server_name_);

    key_ = crypto::derive_key(dh_.shared_secret(server_pub), "secure-channel");
    established_ = true;
}

Bytes SecureClient::seal(const Bytes& plaintext) {
    if (!established_) throw Error("secure channel not established");
    return seal_record(key_, "c2s", send_seq_++, plaintext);
}

Bytes SecureClient::open(const Bytes& record) {
    if (!established_) throw Error("secure channel not established");
    return open_record(key_, "s2c", recv_seq_++, record);
}

SecureServer::SecureServer(std::string name, const crypto::SigningKey* identity)
    : name_(std::move(name)), identity_(identity) {}

bool SecureServer::is_hello(const Bytes& msg) const {
    Decoder dec(msg);
    try {
        return dec.get_string() == kHelloTag;
    } catch (const DecodeError&) {
        return false;
    }
}

Bytes SecureServer::handle_hello(const Bytes& client_hello, const Bytes& seed32) {
    Decoder dec(client_hello);
    if (dec.get_string() != kHelloTag)
        throw TamperError("secure channel: not a handshake message");
    std::string requested = dec.get_string();
    Bytes client_pub = dec.get_bytes();
    Bytes nonce = dec.get_bytes();
    dec.expect_done();
    if (requested != name_)
        throw TamperError("secure channel: handshake for wrong server name");

    crypto::DhKeyPair dh = crypto::DhKeyPair::generate(seed32);
    Bytes server_pub = dh.public_key();
    Bytes sig =
        identity_->sign(identity_transcript(name_, client_pub, server_pub, nonce));

    key_ = crypto::derive_key(dh.shared_secret(client_pub), "secure-channel");
    established_ = true;
    send_seq_ = 0;
    recv_seq_ = 0;

    Encoder enc;
    enc.put_string(kReplyTag);
    enc.put_bytes(server_pub);
    enc.put_bytes(sig);
    return enc.take();
}

Bytes SecureServer::open(const Bytes& record) {
    if (!established_) throw Error("secure channel not established");
    return open_record(key_, "c2s", recv_seq_++, record);
}

Bytes SecureServer::seal(const Bytes& plaintext) {
    if (!established_) throw Error("secure channel not established");
    return seal_record(key_, "s2c", send_seq_++, plaintext);
}

}  // namespace capsule
