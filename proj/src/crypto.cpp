#include "capsule/crypto.hpp"

#include <algorithm>

#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/sha.h>
#include <openssl/x509.h>

#include "capsule/errors.hpp"

namespace capsule::crypto {

namespace {

[[noreturn]] void throw_openssl(const std::string& where) {
    char buf[256];
    ERR_error_string_n(ERR_get_error(), buf, sizeof(buf));
    throw Error(where + ": " + buf);
}

using PkeyPtr = std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)>;
using CtxPtr = std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

}  // namespace

Bytes sha256(const Bytes& data) {
    Bytes out(SHA256_DIGEST_LENGTH);
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Bytes hmac_sha256(const Bytes& key, const Bytes& data) {
    Bytes out(SHA256_DIGEST_LENGTH);
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), int(key.size()), data.data(), data.size(),
              out.data(), &len))
        throw_openssl("HMAC");
    out.resize(len);
    return out;
}

Bytes system_random(size_t n) {
    Bytes out(n);
    if (RAND_bytes(out.data(), int(n)) != 1) throw_openssl("RAND_bytes");
    return out;
}

struct SigningKey::Impl {
    PkeyPtr key{nullptr, EVP_PKEY_free};
};

SigningKey::SigningKey() : impl_(std::make_unique<Impl>()) {}
SigningKey::~SigningKey() = default;
SigningKey::SigningKey(SigningKey&&) noexcept = default;
SigningKey& SigningKey::operator=(SigningKey&&) noexcept = default;

SigningKey::SigningKey(const SigningKey& other) : SigningKey() {
    *this = other;
}

SigningKey& SigningKey::operator=(const SigningKey& other) {
    if (this != &other) {
        EVP_PKEY_up_ref(other.impl_->key.get());
        impl_->key.reset(other.impl_->key.get());
    }
    return *this;
}

SigningKey SigningKey::generate() {
    CtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr), EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
        EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), 2048) <= 0)
        throw_openssl("RSA keygen init");
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) <= 0) throw_openssl("RSA keygen");
    SigningKey k;
    k.impl_->key.reset(raw);
    return k;
}

SigningKey SigningKey::from_private_der(const Bytes& der) {
    const unsigned char* p = der.data();
    EVP_PKEY* raw = d2i_AutoPrivateKey(nullptr, &p, long(der.size()));
    if (!raw) throw_openssl("private key decode");
    SigningKey k;
    k.impl_->key.reset(raw);
    return k;
}

Bytes SigningKey::sign(const Bytes& msg) const {
    MdCtxPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                                   impl_->key.get()) <= 0)
        throw_openssl("sign init");
    size_t len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &len, msg.data(), msg.size()) <= 0)
        throw_openssl("sign size");
    Bytes sig(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, msg.data(), msg.size()) <= 0)
        throw_openssl("sign");
    sig.resize(len);
    return sig;
}

Bytes SigningKey::public_der() const {
    unsigned char* p = nullptr;
    int len = i2d_PUBKEY(impl_->key.get(), &p);
    if (len <= 0) throw_openssl("public key encode");
    Bytes out(p, p + len);
    OPENSSL_free(p);
    return out;
}

Bytes SigningKey::private_der() const {
    unsigned char* p = nullptr;
    int len = i2d_PrivateKey(impl_->key.get(), &p);
    if (len <= 0) throw_openssl("private key encode");
    Bytes out(p, p + len);
    OPENSSL_free(p);
    return out;
}

bool verify_signature(const Bytes& public_der, const Bytes& msg, const Bytes& sig) {
    const unsigned char* p = public_der.data();
    PkeyPtr key(d2i_PUBKEY(nullptr, &p, long(public_der.size())), EVP_PKEY_free);
    if (!key) return false;
    // reject non-canonical encodings: the DER parser tolerates mangled bytes
    // in fields it ignores, which would let tampered key material verify
    unsigned char* canon = nullptr;
    int canon_len = i2d_PUBKEY(key.get(), &canon);
    bool canonical = canon_len > 0 && size_t(canon_len) == public_der.size() &&
                     std::equal(canon, canon + canon_len, public_der.begin());
    OPENSSL_free(canon);
    if (!canonical) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                                     key.get()) <= 0)
        return false;
    return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), msg.data(),
                            msg.size()) == 1;
}

struct DhKeyPair::Impl {
    PkeyPtr key{nullptr, EVP_PKEY_free};
};

DhKeyPair::DhKeyPair() : impl_(std::make_unique<Impl>()) {}
DhKeyPair::~DhKeyPair() = default;
DhKeyPair::DhKeyPair(DhKeyPair&&) noexcept = default;
DhKeyPair& DhKeyPair::operator=(DhKeyPair&&) noexcept = default;

DhKeyPair DhKeyPair::generate(const Bytes& seed32) {
    if (seed32.size() != 32) throw Error("X25519 seed must be 32 bytes");
    EVP_PKEY* raw = EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr,
                                                 seed32.data(), seed32.size());
    if (!raw) throw_openssl("X25519 key");
    DhKeyPair k;
    k.impl_->key.reset(raw);
    return k;
}

Bytes DhKeyPair::public_key() const {
    size_t len = 32;
    Bytes out(len);
    if (EVP_PKEY_get_raw_public_key(impl_->key.get(), out.data(), &len) <= 0)
        throw_openssl("X25519 public");
    out.resize(len);
    return out;
}

Bytes DhKeyPair::shared_secret(const Bytes& peer_public) const {
    PkeyPtr peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr,
                                             peer_public.data(), peer_public.size()),
                 EVP_PKEY_free);
    if (!peer) throw Error("bad X25519 peer key");
    CtxPtr ctx(EVP_PKEY_CTX_new(impl_->key.get(), nullptr), EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
        EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) <= 0)
        throw_openssl("X25519 derive init");
    size_t len = 0;
    if (EVP_PKEY_derive(ctx.get(), nullptr, &len) <= 0) throw_openssl("X25519 derive");
    Bytes out(len);
    if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) throw_openssl("X25519 derive");
    out.resize(len);
    return out;
}

Bytes derive_key(const Bytes& secret, const std::string& label) {
    CtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr), EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
        EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) <= 0 ||
        EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), secret.data(), int(secret.size())) <= 0 ||
        EVP_PKEY_CTX_add1_hkdf_info(ctx.get(),
                                    reinterpret_cast<const unsigned char*>(label.data()),
                                    int(label.size())) <= 0)
        throw_openssl("HKDF init");
    Bytes out(32);
    size_t len = out.size();
    if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) throw_openssl("HKDF");
    return out;
}

Bytes aead_seal(const Bytes& key32, const Bytes& nonce12, const Bytes& plaintext,
                const Bytes& aad) {
    if (key32.size() != 32 || nonce12.size() != 12)
        throw Error("aead_seal: bad key or nonce length");
    std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(
        EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
    if (!ctx ||
        EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(),
                           nonce12.data()) != 1)
        throw_openssl("GCM init");
    int len = 0;
    if (!aad.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), int(aad.size())) != 1)
        throw_openssl("GCM aad");
    Bytes out = nonce12;
    out.resize(12 + plaintext.size() + 16);
    if (EVP_EncryptUpdate(ctx.get(), out.data() + 12, &len, plaintext.data(),
                          int(plaintext.size())) != 1)
        throw_openssl("GCM encrypt");
    int fin = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), out.data() + 12 + len, &fin) != 1)
        throw_openssl("GCM final");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16,
                            out.data() + 12 + plaintext.size()) != 1)
        throw_openssl("GCM tag");
    return out;
}

std::optional<Bytes> aead_open(const Bytes& key32, const Bytes& sealed, const Bytes& aad) {
    if (key32.size() != 32 || sealed.size() < 12 + 16) return std::nullopt;
    const size_t ct_len = sealed.size() - 12 - 16;
    std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(
        EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
    if (!ctx ||
        EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(),
                           sealed.data()) != 1)
        return std::nullopt;
    int len = 0;
    if (!aad.empty() &&
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), int(aad.size())) != 1)
        return std::nullopt;
    Bytes out(ct_len);
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data() + 12,
                          int(ct_len)) != 1)
        return std::nullopt;
    Bytes tag(sealed.end() - 16, sealed.end());
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag.data()) != 1)
        return std::nullopt;
    int fin = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) return std::nullopt;
    return out;
}

}  // namespace capsule::crypto

namespace capsule {

std::string hex_encode(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (uint8_t v : b) {
        out.push_back(digits[v >> 4]);
        out.push_back(digits[v & 0xf]);
    }
    return out;
}

Bytes hex_decode(std::string_view s) {
    if (s.size() % 2 != 0) throw Error("hex string has odd length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error("bad hex digit");
    };
    Bytes out;
    out.reserve(s.size() / 2);
    for (size_t i = 0; i < s.size(); i += 2)
        out.push_back(uint8_t(nibble(s[i]) << 4 | nibble(s[i + 1])));
    return out;
}

}  // namespace capsule
