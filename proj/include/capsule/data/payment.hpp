#pragma once

#include "capsule/data/layer.hpp"

namespace capsule::data {

// Proxy-idiom capsule holding a card token. Charge builds a gateway
// request from the stored template, opens a secure channel to the pinned
// gateway identity through the untrusted hub, and returns only the
// confirmation code. The card token never leaves the capsule in the clear.
//
// Configuration (initial_data), one key=value per line:
//   card=<token>
//   gateway=<hub endpoint name>
//   ssl_name=<pinned server name>
//   gateway_pub=<hex DER public key>
//   template=amount={Amount}&merchant={MerchantAccount}&card={Card}
class PaymentLayer : public DataLayer {
public:
    explicit PaymentLayer(const Bytes& initial_data);

    std::string kind() const override { return "payment"; }
    Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) override;
    Bytes serialize() const override { return to_bytes(config_text_); }

    // Returns the confirmation code; throws DataLayerError on gateway
    // failure (the "-1" outcome) and TamperError on a pin mismatch.
    std::string charge(int64_t amount_cents, const std::string& merchant,
                       OpContext& ctx);

    const std::string& card_token() const { return card_; }

private:
    std::string config_text_;
    std::string card_;
    std::string gateway_endpoint_;
    std::string ssl_name_;
    Bytes gateway_public_;
    std::string request_template_;
};

}  // namespace capsule::data
