#include "capsule/transform.hpp"

#include <algorithm>
#include <set>

#include "capsule/errors.hpp"

namespace capsule::transform {

namespace {

Bytes crowd_aead_key(const CrowdMembership& crowd) {
    // The shared secret may be any length; the AEAD key is its digest.
    return crypto::sha256(crowd.key);
}

Bytes encode_contributions(
    const std::vector<std::pair<Bytes, Bytes>>& contributions, size_t pad_to) {
    Encoder enc;
    enc.put_u32(uint32_t(contributions.size()));
    for (const auto& [owner, payload] : contributions) {
        enc.put_bytes(owner);
        enc.put_bytes(payload);
    }
    size_t body = enc.bytes().size();
    Bytes padding;
    if (pad_to > body + 4) padding.assign(pad_to - body - 4, 0);
    enc.put_bytes(padding);
    return enc.take();
}

std::vector<std::pair<Bytes, Bytes>> decode_contributions(const Bytes& plain) {
    Decoder dec(plain);
    uint32_t n = dec.get_u32();
    std::vector<std::pair<Bytes, Bytes>> out;
    for (uint32_t i = 0; i < n; ++i) {
        Bytes owner = dec.get_bytes();
        Bytes payload = dec.get_bytes();
        out.emplace_back(std::move(owner), std::move(payload));
    }
    dec.get_bytes();  // padding
    dec.expect_done();
    return out;
}

}  // namespace

Capsule filter(const Capsule& c, const std::string& criterion) {
    Capsule derived = Capsule::restore(c.serialize_state(), c.trust());
    derived.set_layer(c.layer().filter(criterion));
    derived.append_lineage("derived", "filter:" + criterion);
    // The derivative's crowd contribution reflects its reduced data.
    if (derived.crowd()) {
        for (auto& [owner, payload] : derived.crowd()->contributions)
            if (owner == c.owner().public_key)
                payload = derived.layer().aggregate_payload();
    }
    return derived;
}

Bytes make_contribution(const Capsule& c, size_t pad_to) {
    if (!c.crowd()) throw Error("capsule is not a crowd member");
    const CrowdMembership& crowd = *c.crowd();
    Bytes plain = encode_contributions(crowd.contributions, pad_to);
    Bytes sealed = crypto::aead_seal(crowd_aead_key(crowd), crypto::system_random(12),
                                     plain, crowd.crowd_id());
    Bytes blob = crowd.crowd_id();
    blob.insert(blob.end(), sealed.begin(), sealed.end());
    return blob;
}

bool aggregate_pair(Capsule& dst, const Bytes& blob) {
    if (!dst.crowd()) throw Error("capsule is not a crowd member");
    CrowdMembership& crowd = *dst.crowd();
    if (blob.size() < 32) throw TamperError("malformed contribution blob");
    Bytes id(blob.begin(), blob.begin() + 32);
    if (id != crowd.crowd_id())
        throw TamperError("contribution belongs to a different crowd");
    Bytes sealed(blob.begin() + 32, blob.end());
    auto plain = crypto::aead_open(crowd_aead_key(crowd), sealed, id);
    if (!plain) throw TamperError("contribution failed to decrypt");

    std::set<Bytes> have;
    for (const auto& [owner, payload] : crowd.contributions) have.insert(owner);
    bool merged = false;
    for (auto& [owner, payload] : decode_contributions(*plain)) {
        if (have.count(owner)) continue;  // duplicate aggregation rejected
        have.insert(owner);
        crowd.contributions.emplace_back(std::move(owner), std::move(payload));
        merged = true;
    }
    return merged;
}

std::optional<std::vector<Bytes>> release_aggregate(const Capsule& c) {
    if (!c.crowd()) throw Error("capsule is not a crowd member");
    const CrowdMembership& crowd = *c.crowd();
    std::set<Bytes> owners;
    for (const auto& [owner, payload] : crowd.contributions) owners.insert(owner);
    if (int64_t(owners.size()) < crowd.a_min) return std::nullopt;
    std::vector<Bytes> out;
    for (const auto& [owner, payload] : crowd.contributions) out.push_back(payload);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace capsule::transform
