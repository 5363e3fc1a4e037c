#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "capsule/data/layer.hpp"
#include "capsule/hub.hpp"
#include "capsule/policy/engine.hpp"
#include "capsule/request.hpp"
#include "capsule/tap.hpp"
#include "capsule/trust_module.hpp"
#include "capsule/wire.hpp"

namespace capsule {

struct PrincipalId {
    std::string name;
    Bytes public_key;
};

struct InvocationRequest {
    std::string invoker;
    std::string op;
    data::Args args;
    std::vector<policy::Assertion> supporting;
    Bytes nonce;
    Bytes signature;  // over invocation_payload(capsule_id, nonce, op, args)

    Bytes encode() const;
    static InvocationRequest decode(const Bytes& b);
};

InvocationRequest make_request(const crypto::SigningKey& invoker_key,
                               const std::string& invoker, const Bytes& capsule_id,
                               const std::string& op, const data::Args& args,
                               std::vector<policy::Assertion> supporting = {},
                               Bytes nonce = {});

struct InvokeResult {
    bool granted = false;
    std::string denial_reason;
    Bytes response;
};

struct AuditEntry {
    uint64_t counter = 0;
    std::string invoker;
    std::string op;
    std::vector<size_t> proof_indices;
    Bytes response_digest;
};

// Shared-crowd state for threshold aggregation: the crowd key, the release
// threshold, and the distinct contributions merged so far.
struct CrowdMembership {
    Bytes key;  // 256-bit shared secret, provisioned out of band
    int64_t a_min = 1;
    std::vector<std::pair<Bytes, Bytes>> contributions;  // (owner key, payload)

    Bytes crowd_id() const;
    void encode(Encoder& enc) const;
    static CrowdMembership decode(Decoder& dec);
};

// {C}_DHK: the serialized capsule under the hosting protocol's derived key.
// The header travels in the clear but is authenticated as AEAD associated
// data, so any alteration breaks the seal.
struct SealedCapsule {
    Bytes sender_pub;    // K_C
    Bytes receiver_pub;  // K_C'
    uint64_t counter_binding = 0;
    Bytes ciphertext;

    Bytes aad() const;
    Bytes encode() const;
    static SealedCapsule decode(const Bytes& b);
};

// Thrown by the fault-injection hook to model a crash mid-invocation.
class CrashError : public Error {
public:
    explicit CrashError(const std::string& what) : Error(what) {}
};

// One hosted capsule: owner identity, policy database, data layer, and the
// base-layer runtime state (nonce window, audit log, boundary tap).
// Invocations are strictly serialized; each is one atomic
// resolve → dispatch → state-commit step.
class Capsule {
public:
    enum class CrashPoint { None, AfterResolve, AfterDispatch };

    static Capsule create(PrincipalId owner, const crypto::SigningKey& owner_key,
                          const std::string& policy_text, const std::string& kind,
                          const Bytes& initial_data,
                          std::map<std::string, Bytes> known_principals,
                          TrustModule* tm,
                          std::optional<CrowdMembership> crowd = std::nullopt);

    InvokeResult invoke(const InvocationRequest& req);

    Bytes serialize_state() const;
    // Same-host restart from a committed snapshot (identity preserved).
    static Capsule restore(const Bytes& state, TrustModule* tm);

    SealedCapsule seal(const Bytes& dh_secret, const Bytes& sender_pub,
                       const Bytes& receiver_pub, uint64_t counter_binding) const;
    // New-host instantiation: assigns a fresh instance identity and
    // re-countersigns framework-modified assertions under it.
    static Capsule unseal(const SealedCapsule& s, const Bytes& dh_secret,
                          TrustModule* tm);

    const Bytes& id() const { return instance_public_; }
    const PrincipalId& owner() const { return owner_; }
    const std::string& kind() const { return kind_; }
    const policy::PolicyDatabase& policy() const { return policy_db_; }
    policy::PolicyDatabase& policy_db() { return policy_db_; }  // framework use
    data::DataLayer& layer() { return *layer_; }
    const data::DataLayer& layer() const { return *layer_; }
    void set_layer(std::unique_ptr<data::DataLayer> l) { layer_ = std::move(l); }
    const crypto::SigningKey& instance_key() const { return instance_key_; }
    const std::map<std::string, Bytes>& known_principals() const { return known_; }
    std::optional<CrowdMembership>& crowd() { return crowd_; }
    const std::optional<CrowdMembership>& crowd() const { return crowd_; }
    const std::vector<std::pair<std::string, std::string>>& lineage() const {
        return lineage_;
    }
    void append_lineage(const std::string& machine, const std::string& service) {
        lineage_.emplace_back(machine, service);
    }
    const std::vector<AuditEntry>& audit_log() const { return audit_; }

    void attach_hub(hub::Hub* h) { hub_ = h; }
    hub::Hub* net() const { return hub_; }
    BoundaryTap& tap() { return tap_; }
    TrustModule* trust() const { return tm_; }
    void set_crash_point(CrashPoint p) { crash_ = p; }

    // Snapshot written at the last commit point; what a restart sees.
    const Bytes& committed_snapshot() const { return committed_; }

private:
    Capsule() = default;

    policy::KeyStore keystore() const;
    void check_crash(CrashPoint p);
    void commit();

    PrincipalId owner_;
    crypto::SigningKey instance_key_ = crypto::SigningKey::generate();
    Bytes instance_public_;
    std::string kind_;
    std::unique_ptr<data::DataLayer> layer_;
    policy::PolicyDatabase policy_db_;
    std::map<std::string, Bytes> known_;
    std::optional<CrowdMembership> crowd_;
    std::vector<std::pair<std::string, std::string>> lineage_;
    std::vector<AuditEntry> audit_;

    std::deque<Bytes> nonce_window_;
    std::set<Bytes> nonce_seen_;
    static constexpr size_t kNonceWindow = 1024;

    int64_t last_time_accepted_ = 0;
    TrustModule* tm_ = nullptr;
    hub::Hub* hub_ = nullptr;
    BoundaryTap tap_;
    CrashPoint crash_ = CrashPoint::None;
    Bytes committed_;
};

}  // namespace capsule
