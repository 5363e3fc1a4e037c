#pragma once

#include <optional>
#include <vector>

#include "capsule/capsule.hpp"

namespace capsule::transform {

// Derivative capsule holding only the data matching `criterion`; policies
// and crowd membership carry over, lineage records the derivation.
Capsule filter(const Capsule& c, const std::string& criterion);

// Encrypted contribution for pair-wise aggregation:
//   crowd id (32 bytes) ‖ AEAD under the crowd key of the capsule's
//   contribution set. Only crowd members can open it. pad_to (bytes, 0 =
//   off) pads the plaintext to a fixed size class against traffic analysis.
Bytes make_contribution(const Capsule& c, size_t pad_to = 0);

// Merges a contribution blob into dst's crowd. Contributions from owners
// already merged are ignored; returns false when nothing new was added.
// Throws TamperError on a wrong-crowd or undecryptable blob, leaving dst
// unchanged.
bool aggregate_pair(Capsule& dst, const Bytes& blob);

// The aggregate multiset (sorted), released iff the number of distinct
// contributing owners has reached A_min; nullopt below threshold.
std::optional<std::vector<Bytes>> release_aggregate(const Capsule& c);

}  // namespace capsule::transform
