#include "capsule/capsule.hpp"

#include "capsule/errors.hpp"
#include "capsule/policy/parser.hpp"

namespace capsule {

Bytes invocation_payload(const Bytes& capsule_id, const Bytes& nonce,
                         const std::string& op,
                         const std::vector<policy::Term>& args) {
    Encoder enc;
    enc.put_bytes(capsule_id);
    enc.put_bytes(nonce);
    enc.put_string(op);
    enc.put_u32(uint32_t(args.size()));
    for (const auto& a : args) policy::encode_term(enc, a);
    return enc.take();
}

DecodedInvocation decode_invocation_payload(const Bytes& payload) {
    Decoder dec(payload);
    DecodedInvocation out;
    out.capsule_id = dec.get_bytes();
    out.nonce = dec.get_bytes();
    out.op = dec.get_string();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) out.args.push_back(policy::decode_term(dec));
    dec.expect_done();
    return out;
}

Bytes InvocationRequest::encode() const {
    Encoder enc;
    enc.put_string(invoker);
    enc.put_string(op);
    enc.put_u32(uint32_t(args.size()));
    for (const auto& a : args) policy::encode_term(enc, a);
    enc.put_u32(uint32_t(supporting.size()));
    for (const auto& s : supporting) enc.put_bytes(s.encode());
    enc.put_bytes(nonce);
    enc.put_bytes(signature);
    return enc.take();
}

InvocationRequest InvocationRequest::decode(const Bytes& b) {
    Decoder dec(b);
    InvocationRequest req;
    req.invoker = dec.get_string();
    req.op = dec.get_string();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) req.args.push_back(policy::decode_term(dec));
    uint32_t ns = dec.get_u32();
    for (uint32_t i = 0; i < ns; ++i) {
        Bytes raw = dec.get_bytes();
        Decoder adec(raw);
        req.supporting.push_back(policy::Assertion::decode(adec));
        adec.expect_done();
    }
    req.nonce = dec.get_bytes();
    req.signature = dec.get_bytes();
    dec.expect_done();
    return req;
}

InvocationRequest make_request(const crypto::SigningKey& invoker_key,
                               const std::string& invoker, const Bytes& capsule_id,
                               const std::string& op, const data::Args& args,
                               std::vector<policy::Assertion> supporting,
                               Bytes nonce) {
    InvocationRequest req;
    req.invoker = invoker;
    req.op = op;
    req.args = args;
    req.supporting = std::move(supporting);
    req.nonce = nonce.empty() ? crypto::system_random(16) : std::move(nonce);
    req.signature =
        invoker_key.sign(invocation_payload(capsule_id, req.nonce, op, args));
    return req;
}

Bytes CrowdMembership::crowd_id() const { return crypto::sha256(key); }

void CrowdMembership::encode(Encoder& enc) const {
    enc.put_bytes(key);
    enc.put_i64(a_min);
    enc.put_u32(uint32_t(contributions.size()));
    for (const auto& [owner, payload] : contributions) {
        enc.put_bytes(owner);
        enc.put_bytes(payload);
    }
}

CrowdMembership CrowdMembership::decode(Decoder& dec) {
    CrowdMembership c;
    c.key = dec.get_bytes();
    c.a_min = dec.get_i64();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) {
        Bytes owner = dec.get_bytes();
        Bytes payload = dec.get_bytes();
        c.contributions.emplace_back(std::move(owner), std::move(payload));
    }
    return c;
}

Bytes SealedCapsule::aad() const {
    Encoder enc;
    enc.put_bytes(sender_pub);
    enc.put_bytes(receiver_pub);
    enc.put_u64(counter_binding);
    return enc.take();
}

Bytes SealedCapsule::encode() const {
    Encoder enc;
    enc.put_bytes(sender_pub);
    enc.put_bytes(receiver_pub);
    enc.put_u64(counter_binding);
    enc.put_bytes(ciphertext);
    return enc.take();
}

SealedCapsule SealedCapsule::decode(const Bytes& b) {
    Decoder dec(b);
    SealedCapsule s;
    s.sender_pub = dec.get_bytes();
    s.receiver_pub = dec.get_bytes();
    s.counter_binding = dec.get_u64();
    s.ciphertext = dec.get_bytes();
    dec.expect_done();
    return s;
}

Capsule Capsule::create(PrincipalId owner, const crypto::SigningKey& owner_key,
                        const std::string& policy_text, const std::string& kind,
                        const Bytes& initial_data,
                        std::map<std::string, Bytes> known_principals,
                        TrustModule* tm, std::optional<CrowdMembership> crowd) {
    Capsule c;
    c.owner_ = std::move(owner);
    c.instance_public_ = c.instance_key_.public_der();
    c.kind_ = kind;
    c.layer_ = data::make_layer(kind, initial_data);
    c.policy_db_ = policy::parse_policy(policy_text);
    for (auto& a : c.policy_db_.assertions) {
        if (a.issuer != c.owner_.name)
            throw Error("capsule policy must be issued by the owner; found issuer " +
                        a.issuer);
        policy::sign_assertion(a, owner_key);
    }
    c.known_ = std::move(known_principals);
    c.known_[c.owner_.name] = c.owner_.public_key;
    c.tm_ = tm;
    c.lineage_.emplace_back(tm ? tm->boundary_id() : "local", c.owner_.name);
    if (crowd) {
        c.crowd_ = std::move(crowd);
        if (c.crowd_->contributions.empty())
            c.crowd_->contributions.emplace_back(c.owner_.public_key,
                                                 c.layer_->aggregate_payload());
    }
    c.commit();
    return c;
}

policy::KeyStore Capsule::keystore() const {
    policy::KeyStore ks;
    ks.principals = known_;
    ks.capsule_key = instance_public_;
    return ks;
}

void Capsule::check_crash(CrashPoint p) {
    if (crash_ == p) {
        crash_ = CrashPoint::None;
        throw CrashError("injected crash");
    }
}

void Capsule::commit() { committed_ = serialize_state(); }

InvokeResult Capsule::invoke(const InvocationRequest& req) {
    // 1. Authenticate the invoker before anything else.
    auto key_it = known_.find(req.invoker);
    if (key_it == known_.end())
        throw SignatureError("unknown invoker " + req.invoker);
    Bytes payload = invocation_payload(instance_public_, req.nonce, req.op, req.args);
    if (!crypto::verify_signature(key_it->second, payload, req.signature))
        throw SignatureError("invocation request signature invalid");

    // 2. Nonce freshness (sliding window).
    if (req.nonce.empty() || nonce_seen_.count(req.nonce))
        throw ReplayError("invocation nonce is not fresh");
    nonce_seen_.insert(req.nonce);
    nonce_window_.push_back(req.nonce);
    if (nonce_window_.size() > kNonceWindow) {
        nonce_seen_.erase(nonce_window_.front());
        nonce_window_.pop_front();
    }

    // 3. Trusted time, when a hub is attached. A failed verification just
    // leaves CurrentTime unbound, denying time-conditioned policies.
    policy::ResolveEnv env;
    policy::KeyStore ks = keystore();
    env.keys = &ks;
    if (hub_) {
        Bytes tn = tm_ ? tm_->random_bytes(16) : crypto::system_random(16);
        hub::SignedTime st = hub_->time(tn);
        if (hub::verify_signed_time(st, hub_->time_authority_public(), tn,
                                    last_time_accepted_)) {
            env.current_time = st.secs;
            last_time_accepted_ = std::max(last_time_accepted_, st.secs);
        }
    }

    // 4. Policy check: "owner says CanInvoke(op, invoker, amount)" where
    // amount is the first numeric argument (0 when there is none).
    int64_t amount = 0;
    for (const auto& a : req.args)
        if (a.kind == policy::Term::Kind::ConstNumber) {
            amount = a.num;
            break;
        }
    policy::Predicate query{"CanInvoke",
                            {policy::Term::principal(req.op),
                             policy::Term::principal(req.invoker),
                             policy::Term::number(amount)}};

    policy::Decision decision;
    try {
        decision = policy::resolve(policy_db_, req.supporting, owner_.name, query, env);
    } catch (const SignatureError& e) {
        return InvokeResult{false, e.what(), {}};
    } catch (const Error& e) {
        return InvokeResult{false, std::string("policy evaluation failed: ") + e.what(),
                            {}};
    }
    if (!decision.granted) return InvokeResult{false, decision.reason, {}};

    // Matched stateful rules must stay non-negative after their updates;
    // otherwise deny before any side effect.
    for (const auto& m : decision.matched_state)
        for (const auto& u : m.state.updates)
            if (policy::eval_update_expr(u.expr, m.binding, m.state) < 0)
                return InvokeResult{
                    false, "state update would drive '" + u.var + "' below zero", {}};

    check_crash(CrashPoint::AfterResolve);

    // 5. Dispatch to the data layer.
    data::OpContext ctx;
    ctx.invoker = req.invoker;
    ctx.is_owner = req.invoker == owner_.name;
    ctx.net = hub_;
    ctx.tap = &tap_;
    ctx.trust = tm_;
    ctx.request_payload = payload;
    ctx.request_signature = req.signature;
    ctx.invoker_public = key_it->second;
    Bytes response = layer_->invoke(req.op, req.args, ctx);

    check_crash(CrashPoint::AfterDispatch);

    // 6. Commit: state updates, counter, audit, snapshot — then respond.
    for (const auto& m : decision.matched_state)
        policy::apply_state_updates(policy_db_, m, instance_key_);

    uint64_t counter = tm_ ? tm_->counter_advance() : 0;
    AuditEntry entry;
    entry.counter = counter;
    entry.invoker = req.invoker;
    entry.op = req.op;
    entry.proof_indices = decision.proof_indices;
    entry.response_digest = crypto::sha256(response);
    audit_.push_back(std::move(entry));
    commit();

    tap_.observe(wire::frame(wire::MsgType::InvokeResp, response));
    return InvokeResult{true, "", std::move(response)};
}

Bytes Capsule::serialize_state() const {
    Encoder enc;
    enc.put_string(owner_.name);
    enc.put_bytes(owner_.public_key);
    enc.put_bytes(instance_key_.private_der());
    enc.put_string(kind_);
    enc.put_bytes(layer_->serialize());
    enc.put_bytes(policy_db_.encode());
    enc.put_u32(uint32_t(known_.size()));
    for (const auto& [name, pub] : known_) {
        enc.put_string(name);
        enc.put_bytes(pub);
    }
    enc.put_u8(crowd_ ? 1 : 0);
    if (crowd_) crowd_->encode(enc);
    enc.put_u32(uint32_t(lineage_.size()));
    for (const auto& [m, s] : lineage_) {
        enc.put_string(m);
        enc.put_string(s);
    }
    enc.put_u32(uint32_t(audit_.size()));
    for (const auto& a : audit_) {
        enc.put_u64(a.counter);
        enc.put_string(a.invoker);
        enc.put_string(a.op);
        enc.put_u32(uint32_t(a.proof_indices.size()));
        for (size_t idx : a.proof_indices) enc.put_u64(idx);
        enc.put_bytes(a.response_digest);
    }
    enc.put_u32(uint32_t(nonce_window_.size()));
    for (const auto& n : nonce_window_) enc.put_bytes(n);
    enc.put_i64(last_time_accepted_);
    return enc.take();
}

Capsule Capsule::restore(const Bytes& state, TrustModule* tm) {
    Decoder dec(state);
    Capsule c;
    c.owner_.name = dec.get_string();
    c.owner_.public_key = dec.get_bytes();
    c.instance_key_ = crypto::SigningKey::from_private_der(dec.get_bytes());
    c.instance_public_ = c.instance_key_.public_der();
    c.kind_ = dec.get_string();
    c.layer_ = data::restore_layer(c.kind_, dec.get_bytes());
    c.policy_db_ = policy::PolicyDatabase::decode(dec.get_bytes());
    uint32_t nk = dec.get_u32();
    for (uint32_t i = 0; i < nk; ++i) {
        std::string name = dec.get_string();
        c.known_[name] = dec.get_bytes();
    }
    if (dec.get_u8()) c.crowd_ = CrowdMembership::decode(dec);
    uint32_t nl = dec.get_u32();
    for (uint32_t i = 0; i < nl; ++i) {
        std::string m = dec.get_string();
        std::string s = dec.get_string();
        c.lineage_.emplace_back(std::move(m), std::move(s));
    }
    uint32_t na = dec.get_u32();
    for (uint32_t i = 0; i < na; ++i) {
        AuditEntry a;
        a.counter = dec.get_u64();
        a.invoker = dec.get_string();
        a.op = dec.get_string();
        uint32_t np = dec.get_u32();
        for (uint32_t j = 0; j < np; ++j) a.proof_indices.push_back(size_t(dec.get_u64()));
        a.response_digest = dec.get_bytes();
        c.audit_.push_back(std::move(a));
    }
    uint32_t nn = dec.get_u32();
    for (uint32_t i = 0; i < nn; ++i) {
        Bytes nonce = dec.get_bytes();
        c.nonce_seen_.insert(nonce);
        c.nonce_window_.push_back(std::move(nonce));
    }
    c.last_time_accepted_ = dec.get_i64();
    dec.expect_done();
    c.tm_ = tm;
    c.commit();
    return c;
}

SealedCapsule Capsule::seal(const Bytes& dh_secret, const Bytes& sender_pub,
                            const Bytes& receiver_pub,
                            uint64_t counter_binding) const {
    SealedCapsule s;
    s.sender_pub = sender_pub;
    s.receiver_pub = receiver_pub;
    s.counter_binding = counter_binding;
    Bytes key = crypto::derive_key(dh_secret, "capsule-transfer");
    Bytes nonce = crypto::system_random(12);
    s.ciphertext = crypto::aead_seal(key, nonce, serialize_state(), s.aad());
    return s;
}

Capsule Capsule::unseal(const SealedCapsule& s, const Bytes& dh_secret,
                        TrustModule* tm) {
    Bytes key = crypto::derive_key(dh_secret, "capsule-transfer");
    auto plain = crypto::aead_open(key, s.ciphertext, s.aad());
    if (!plain) throw TamperError("sealed capsule failed authentication");
    if (tm) {
        if (s.counter_binding < tm->counter_read())
            throw ReplayError("sealed capsule counter binding is stale");
        tm->counter_advance();
    }
    Capsule c = restore(*plain, tm);

    // Fresh instance identity at the new host; framework-countersigned
    // assertions are re-signed under it (their lineage digests persist).
    c.instance_key_ = crypto::SigningKey::generate();
    c.instance_public_ = c.instance_key_.public_der();
    for (auto& a : c.policy_db_.assertions)
        if (a.capsule_signed) a.signature = c.instance_key_.sign(a.canonical());
    c.commit();
    return c;
}

}  // namespace capsule
