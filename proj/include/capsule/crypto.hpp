#pragma once

#include <memory>
#include <optional>
#include <string>

#include "capsule/bytes.hpp"

namespace capsule::crypto {

Bytes sha256(const Bytes& data);
Bytes hmac_sha256(const Bytes& key, const Bytes& data);
Bytes system_random(size_t n);

// 2048-bit RSA signing key. Principals, capsule instances, attestation
// keys, and the time authority are all identified by such keys.
class SigningKey {
public:
    static SigningKey generate();
    static SigningKey from_private_der(const Bytes& der);

    SigningKey(SigningKey&&) noexcept;
    SigningKey& operator=(SigningKey&&) noexcept;
    SigningKey(const SigningKey&);
    SigningKey& operator=(const SigningKey&);
    ~SigningKey();

    Bytes sign(const Bytes& msg) const;
    Bytes public_der() const;
    Bytes private_der() const;

private:
    SigningKey();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Verifies `sig` over `msg` under a DER-encoded RSA public key.
bool verify_signature(const Bytes& public_der, const Bytes& msg, const Bytes& sig);

// Ephemeral X25519 key pair for the hosting protocol and the
// capsule-side secure channel.
class DhKeyPair {
public:
    static DhKeyPair generate(const Bytes& seed32);

    DhKeyPair(DhKeyPair&&) noexcept;
    DhKeyPair& operator=(DhKeyPair&&) noexcept;
    ~DhKeyPair();
    DhKeyPair(const DhKeyPair&) = delete;
    DhKeyPair& operator=(const DhKeyPair&) = delete;

    Bytes public_key() const;
    Bytes shared_secret(const Bytes& peer_public) const;

private:
    DhKeyPair();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HKDF-SHA256 of the DH shared secret into a 256-bit AEAD key.
Bytes derive_key(const Bytes& secret, const std::string& label);

// AES-256-GCM. Output layout: 12-byte nonce || ciphertext || 16-byte tag.
Bytes aead_seal(const Bytes& key32, const Bytes& nonce12, const Bytes& plaintext,
                const Bytes& aad);
// Returns nullopt on tag failure.
std::optional<Bytes> aead_open(const Bytes& key32, const Bytes& sealed, const Bytes& aad);

}  // namespace capsule::crypto
