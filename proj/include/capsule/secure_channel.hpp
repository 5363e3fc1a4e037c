#pragma once

#include <string>

#include "capsule/bytes.hpp"
#include "capsule/crypto.hpp"

namespace capsule {

// Capsule-terminated secure channel: ephemeral X25519 handshake
// authenticated by the server's long-term identity key, then AEAD-framed
// records with per-direction sequence numbers. The hub relays these bytes
// blindly; it can break availability but cannot read or forge traffic.
//
// The client pins the expected identity by name and public key, so a relay
// that redirects the connection to a different server is detected before
// any payload is sent.
class SecureClient {
public:
    SecureClient(std::string server_name, Bytes pinned_identity_public, Bytes seed32);

    Bytes hello() const;
    // Processes the server's handshake reply. Throws TamperError if the
    // identity signature fails the pin check.
    void finish(const Bytes& server_hello);

    bool established() const { return established_; }
    Bytes seal(const Bytes& plaintext);  // client-to-server record
    Bytes open(const Bytes& record);     // server-to-client record

private:
    std::string server_name_;
    Bytes pinned_public_;
    crypto::DhKeyPair dh_;
    Bytes nonce_;
    Bytes key_;
    bool established_ = false;
    uint64_t send_seq_ = 0;
    uint64_t recv_seq_ = 0;
};

class SecureServer {
public:
    SecureServer(std::string name, const crypto::SigningKey* identity);

    bool is_hello(const Bytes& msg) const;
    Bytes handle_hello(const Bytes& client_hello, const Bytes& seed32);

    Bytes open(const Bytes& record);     // client-to-server record
    Bytes seal(const Bytes& plaintext);  // server-to-client record

private:
    std::string name_;
    const crypto::SigningKey* identity_;
    Bytes key_;
    bool established_ = false;
    uint64_t send_seq_ = 0;
    uint64_t recv_seq_ = 0;
};

}  // namespace capsule
