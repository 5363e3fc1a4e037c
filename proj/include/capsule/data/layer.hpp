#pragma once

#include <memory>
#include <string>
#include <vector>

#include "capsule/bytes.hpp"
#include "capsule/hub.hpp"
#include "capsule/policy/ast.hpp"
#include "capsule/tap.hpp"
#include "capsule/trust_module.hpp"

namespace capsule::data {

using Args = std::vector<policy::Term>;

// Per-invocation context handed to a data layer by the base layer. Anything
// a layer sends through the hub crosses the capsule boundary and is
// recorded on the tap first.
struct OpContext {
    std::string invoker;
    bool is_owner = false;
    hub::Hub* net = nullptr;
    BoundaryTap* tap = nullptr;
    TrustModule* trust = nullptr;

    // Provenance evidence: the signed invocation payload and its signature.
    Bytes request_payload;
    Bytes request_signature;
    Bytes invoker_public;

    bool hub_send(int fd, const Bytes& msg) {
        if (tap) tap->observe(msg);
        return net->send(fd, msg);
    }
};

// The data-specific half of a capsule. Invocations reach it only after the
// base layer has granted them.
class DataLayer {
public:
    virtual ~DataLayer() = default;

    virtual std::string kind() const = 0;
    virtual Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) = 0;
    virtual Bytes serialize() const = 0;

    // Returns a copy holding only the data matching `criterion`
    // (substring match on record granularity by default).
    virtual std::unique_ptr<DataLayer> filter(const std::string& criterion) const;

    // Payload this layer contributes to a data-crowd aggregate.
    virtual Bytes aggregate_payload() const;
};

// kind ∈ {dummy, stock, payment, ads, provenance}.
std::unique_ptr<DataLayer> make_layer(const std::string& kind, const Bytes& initial_data);
std::unique_ptr<DataLayer> restore_layer(const std::string& kind,
                                         const Bytes& serialized);

}  // namespace capsule::data
