#pragma once

#include <string>

#include "capsule/bytes.hpp"
#include "capsule/policy/ast.hpp"

namespace capsule {

// The byte string an invoker signs: capsule instance id, fresh nonce,
// operation name, arguments. Shared between the base layer (verification)
// and the provenance layer (write-log evidence).
Bytes invocation_payload(const Bytes& capsule_id, const Bytes& nonce,
                         const std::string& op,
                         const std::vector<policy::Term>& args);

struct DecodedInvocation {
    Bytes capsule_id;
    Bytes nonce;
    std::string op;
    std::vector<policy::Term> args;
};

DecodedInvocation decode_invocation_payload(const Bytes& payload);

}  // namespace capsule
