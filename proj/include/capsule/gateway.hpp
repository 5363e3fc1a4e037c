#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capsule/crypto.hpp"
#include "capsule/hub.hpp"
#include "capsule/secure_channel.hpp"

namespace capsule {

// Simulated payment gateway reachable only through the hub relay. Speaks
// the capsule-side secure channel, so the hub sees ciphertext only.
// Maintains a single funded account with a transaction ledger.
class Gateway {
public:
    struct Tx {
        int64_t amount_cents;
        std::string merchant;
        std::string conf_code;
    };

    Gateway(std::string ssl_name, int64_t initial_balance_cents,
            uint64_t seed = 0x6761746577617921ull);

    // Endpoint handler to register with a Hub.
    hub::Handler handler();

    const std::string& ssl_name() const { return ssl_name_; }
    const Bytes& identity_public() const { return identity_public_; }
    int64_t balance_cents() const { return balance_; }
    const std::vector<Tx>& ledger() const { return ledger_; }

private:
    Bytes handle(const Bytes& msg);
    std::string process_request(const std::string& body);
    std::string fresh_conf_code();

    std::string ssl_name_;
    crypto::SigningKey identity_;
    Bytes identity_public_;
    SecureServer channel_;
    int64_t balance_;
    std::vector<Tx> ledger_;
    std::mt19937_64 rng_;
};

}  // namespace capsule
