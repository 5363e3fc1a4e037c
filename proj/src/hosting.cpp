#include "capsule/hosting.hpp"

#include "capsule/errors.hpp"
#include "capsule/wire.hpp"

namespace capsule {

TransferTarget::TransferTarget(std::string machine, std::string service,
                               TrustModule* tm, Bytes code_id)
    : machine_(std::move(machine)),
      service_(std::move(service)),
      tm_(tm),
      code_id_(std::move(code_id)) {}

Bytes TransferTarget::handle_step1(const Bytes& frame) {
    wire::Frame f = wire::unframe(frame);
    if (f.type != wire::MsgType::Install1)
        throw TamperError("expected INSTALL1");
    Decoder dec(f.body);
    peer_pub_ = dec.get_bytes();
    Bytes nonce = dec.get_bytes();
    dec.expect_done();

    dh_.emplace(crypto::DhKeyPair::generate(tm_->random_bytes(32)));
    Bytes own_pub = dh_->public_key();

    // The counter moves before the attestation snapshot so the snapshot in
    // Step 2 is exactly the binding a fresh Step-3 seal must carry.
    tm_->counter_advance();
    Attestation att = tm_->attest(code_id_, nonce, peer_pub_, own_pub);

    Encoder enc;
    enc.put_bytes(own_pub);
    enc.put_bytes(att.encode());
    return wire::frame(wire::MsgType::Install2, enc.take());
}

Capsule TransferTarget::handle_step3(const Bytes& frame) {
    wire::Frame f = wire::unframe(frame);
    if (f.type != wire::MsgType::Install3)
        throw TamperError("expected INSTALL3");
    if (!dh_) throw Error("step 3 before step 1");

    SealedCapsule sealed = SealedCapsule::decode(f.body);
    if (sealed.receiver_pub != dh_->public_key())
        throw TamperError("sealed capsule addressed to a different key");
    Bytes secret = dh_->shared_secret(sealed.sender_pub);
    return Capsule::unseal(sealed, secret, tm_);
}

TransferSource::TransferSource(Capsule* c, std::map<std::string, Bytes> module_keys,
                               Bytes expected_code_id)
    : capsule_(c),
      module_keys_(std::move(module_keys)),
      code_id_(std::move(expected_code_id)) {}

Bytes TransferSource::step1(const HostingRequest& req) {
    // Policy gate: nothing crosses the boundary on a denial.
    policy::KeyStore ks;
    ks.principals = capsule_->known_principals();
    ks.capsule_key = capsule_->id();
    policy::ResolveEnv env;
    env.keys = &ks;
    policy::Predicate query{"CanHost",
                            {policy::Term::principal(req.target_machine)}};
    policy::Decision d = policy::resolve(capsule_->policy(), req.supporting,
                                         capsule_->owner().name, query, env);
    if (!d.granted) throw Error("hosting denied: " + d.reason);

    TrustModule* tm = capsule_->trust();
    dh_.emplace(crypto::DhKeyPair::generate(tm ? tm->random_bytes(32)
                                               : crypto::system_random(32)));
    nonce_ = tm ? tm->random_bytes(16) : crypto::system_random(16);
    pending_ = req;
    step1_done_ = true;

    Encoder enc;
    enc.put_bytes(dh_->public_key());
    enc.put_bytes(nonce_);
    Bytes frame = wire::frame(wire::MsgType::Install1, enc.take());
    capsule_->tap().observe(frame);
    return frame;
}

Bytes TransferSource::step3(const Bytes& step2_frame) {
    if (!step1_done_) throw Error("step 3 before step 1");
    wire::Frame f = wire::unframe(step2_frame);
    if (f.type != wire::MsgType::Install2)
        throw TamperError("expected INSTALL2");
    Decoder dec(f.body);
    Bytes target_pub = dec.get_bytes();
    Attestation att = Attestation::decode(dec.get_bytes());
    dec.expect_done();

    auto key_it = module_keys_.find(pending_.target_machine);
    if (key_it == module_keys_.end())
        throw SignatureError("no certified attestation key for machine " +
                             pending_.target_machine);
    if (!verify_attestation(att, key_it->second, code_id_, nonce_))
        throw TamperError("target attestation rejected");
    if (att.input_digest != crypto::sha256(dh_->public_key()) ||
        att.output_digest != crypto::sha256(target_pub))
        throw TamperError("attested key exchange does not match the wire "
                          "(man-in-the-middle substitution)");

    // Build the travelling instance: split every decomposable budget, merge
    // P_HR, extend the lineage.
    Capsule transferred = Capsule::restore(capsule_->serialize_state(), nullptr);
    auto& src_db = capsule_->policy_db();
    auto& dst_db = transferred.policy_db();
    for (size_t i = 0; i < src_db.assertions.size(); ++i) {
        const auto& a = src_db.assertions[i];
        if (!a.state || a.state->updates.empty()) continue;
        const int64_t* cur = a.state->find(a.state->updates.front().var);
        if (!cur) continue;
        int64_t transfer = *cur * pending_.transfer_share_pct / 100;
        auto [retained, moved] = policy::split_constraint(a, transfer);
        policy::countersign_assertion(retained, a, capsule_->instance_key());
        policy::countersign_assertion(moved, a, capsule_->instance_key());
        src_db.replace(i, std::move(retained));
        dst_db.replace(i, std::move(moved));
    }
    for (const auto& s : pending_.supporting) dst_db.add(s);
    transferred.append_lineage(pending_.target_machine, pending_.target_service);

    Bytes secret = dh_->shared_secret(target_pub);
    SealedCapsule sealed = transferred.seal(secret, dh_->public_key(), target_pub,
                                            att.counter_snapshot);
    Bytes frame = wire::frame(wire::MsgType::Install3, sealed.encode());
    capsule_->tap().observe(frame);
    return frame;
}

}  // namespace capsule
