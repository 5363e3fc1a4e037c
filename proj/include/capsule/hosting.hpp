#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capsule/capsule.hpp"
#include "capsule/trust_module.hpp"

namespace capsule {

// A request to move a capsule to machine M' under service S', with the
// supporting assertions P_HR that justify it and the share (percent) of
// each decomposable budget that travels along.
struct HostingRequest {
    std::string target_machine;
    std::string target_service;
    std::vector<policy::Assertion> supporting;
    int transfer_share_pct = 50;
};

// Receiving side of the three-step hosting protocol. Step 2 advances the
// durable counter and attests (code id, nonce, K_C, K_C') so the sender
// can rule out substitution of either ephemeral key.
class TransferTarget {
public:
    TransferTarget(std::string machine, std::string service, TrustModule* tm,
                   Bytes code_id);

    Bytes handle_step1(const Bytes& frame);    // INSTALL1 -> INSTALL2
    Capsule handle_step3(const Bytes& frame);  // INSTALL3 -> live capsule

    const std::string& machine() const { return machine_; }

private:
    std::string machine_;
    std::string service_;
    TrustModule* tm_;
    Bytes code_id_;
    std::optional<crypto::DhKeyPair> dh_;
    Bytes peer_pub_;
};

// Sending side. step1 refuses to emit any message unless the owner's
// policy (plus P_HR) derives CanHost(M'); step3 verifies the target's
// attestation before the capsule ciphertext is produced.
class TransferSource {
public:
    // module_keys: certified machine -> attestation public key bindings.
    TransferSource(Capsule* c, std::map<std::string, Bytes> module_keys,
                   Bytes expected_code_id);

    Bytes step1(const HostingRequest& req);
    Bytes step3(const Bytes& step2_frame);

private:
    Capsule* capsule_;
    std::map<std::string, Bytes> module_keys_;
    Bytes code_id_;
    std::optional<crypto::DhKeyPair> dh_;
    Bytes nonce_;
    HostingRequest pending_;
    bool step1_done_ = false;
};

}  // namespace capsule
