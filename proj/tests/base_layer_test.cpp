#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capsule/capsule.hpp"
#include "capsule/errors.hpp"
#include "capsule/wire.hpp"
#include "support/testkeys.hpp"

using namespace capsule;
using testsupport::pooled_key;

namespace {

const crypto::SigningKey& alice_key() { return pooled_key(0); }
const crypto::SigningKey& amazon_key() { return pooled_key(1); }
const crypto::SigningKey& carol_key() { return pooled_key(2); }

std::map<std::string, Bytes> known_two() {
    return {{"Amazon", amazon_key().public_der()}, {"Carol", carol_key().public_der()}};
}

Capsule make_dummy(TrustModule* tm, const std::string& policy_text) {
    return Capsule::create({"Alice", alice_key().public_der()}, alice_key(),
                           policy_text, "dummy", to_bytes("payload\n"), known_two(),
                           tm);
}

}  // namespace

TEST_CASE("create enforces owner-issued policy and a known layer kind") {
    TrustModule tm("base-a");
    CHECK_THROWS_AS(make_dummy(&tm, "Bob says CanInvoke(Get, Amazon, n?a)"), Error);
    CHECK_THROWS_AS(
        Capsule::create({"Alice", alice_key().public_der()}, alice_key(), "",
                        "no-such-kind", {}, {}, &tm),
        Error);

    Capsule c = make_dummy(&tm, "Alice says CanInvoke(Get, Amazon, n?a)");
    CHECK(c.owner().name == "Alice");
    CHECK(c.kind() == "dummy");
    CHECK_FALSE(c.id().empty());
    // every policy assertion was countersigned by the owner at creation
    for (const auto& a : c.policy().assertions)
        CHECK(crypto::verify_signature(alice_key().public_der(), a.canonical(),
                                       a.signature));
    REQUIRE(c.lineage().size() == 1);
    CHECK(c.lineage()[0].second == "Alice");
}

TEST_CASE("invocation is authenticated, authorized, and audited") {
    TrustModule tm("base-b");
    Capsule c = make_dummy(&tm,
                           "Alice says CanInvoke(Get, Amazon, n?a)\n"
                           "Alice says CanInvoke(Echo, Amazon, n?a)\n");

    auto req = make_request(amazon_key(), "Amazon", c.id(), "Echo",
                            {policy::Term::string_const("hi")});
    InvokeResult r = c.invoke(req);
    REQUIRE(r.granted);
    CHECK(to_string(r.response) == "hi");

    // audit trail: hardware counter, invoker, op, response digest
    REQUIRE(c.audit_log().size() == 1);
    CHECK(c.audit_log()[0].counter == 1);
    CHECK(c.audit_log()[0].invoker == "Amazon");
    CHECK(c.audit_log()[0].op == "Echo");
    CHECK(c.audit_log()[0].response_digest == crypto::sha256(r.response));

    // the response crossed the boundary as a framed message on the tap
    REQUIRE_FALSE(c.tap().frames().empty());
    wire::Frame f = wire::unframe(c.tap().frames().back());
    CHECK(f.type == wire::MsgType::InvokeResp);
    CHECK(to_string(f.body) == "hi");

    SUBCASE("a known but unauthorized principal is denied, not erred") {
        auto bad = make_request(carol_key(), "Carol", c.id(), "Echo",
                                {policy::Term::string_const("x")});
        InvokeResult d = c.invoke(bad);
        CHECK_FALSE(d.granted);
        CHECK_FALSE(d.denial_reason.empty());
        CHECK(c.audit_log().size() == 1);  // denials leave no granted-audit entry
    }

    SUBCASE("an unauthorized operation is denied") {
        auto bad = make_request(amazon_key(), "Amazon", c.id(), "Process",
                                {policy::Term::number(8)});
        CHECK_FALSE(c.invoke(bad).granted);
    }

    SUBCASE("unknown principals and bad signatures are rejected outright") {
        auto unknown = make_request(pooled_key(5), "Mallory", c.id(), "Get", {});
        CHECK_THROWS_AS(c.invoke(unknown), SignatureError);

        auto forged = make_request(carol_key(), "Amazon", c.id(), "Get", {});
        CHECK_THROWS_AS(c.invoke(forged), SignatureError);

        auto bent = make_request(amazon_key(), "Amazon", c.id(), "Get", {});
        bent.signature[8] ^= 1;
        CHECK_THROWS_AS(c.invoke(bent), SignatureError);

        // args changed after signing no longer match the signed payload
        auto swapped = make_request(amazon_key(), "Amazon", c.id(), "Echo",
                                    {policy::Term::string_const("hi")});
        swapped.args[0] = policy::Term::string_const("tampered");
        CHECK_THROWS_AS(c.invoke(swapped), SignatureError);
    }

    SUBCASE("a replayed nonce is rejected, also across a restart") {
        auto again = make_request(amazon_key(), "Amazon", c.id(), "Get", {}, {},
                                  req.nonce);
        CHECK_THROWS_AS(c.invoke(again), ReplayError);

        Capsule revived = Capsule::restore(c.serialize_state(), &tm);
        CHECK(revived.id() == c.id());  // same-host restart keeps the identity
        CHECK_THROWS_AS(revived.invoke(again), ReplayError);
    }
}

TEST_CASE("stateful budget policy spends down and refuses overdrafts") {
    TrustModule tm("base-c");
    Capsule c = make_dummy(&tm,
                           "Alice says CanInvoke(Process, Amazon, n?a) "
                           "where n?a < 100 "
                           "state (Limit=100, update(Limit, Limit - n?a))");
    auto limit = [&] { return *c.policy().assertions[0].state->find("Limit"); };

    auto spend = [&](int64_t amount) {
        return c.invoke(make_request(amazon_key(), "Amazon", c.id(), "Process",
                                     {policy::Term::number(amount)}));
    };

    CHECK(spend(60).granted);
    CHECK(limit() == 40);
    CHECK(c.policy().version == 1);  // exactly one state-update replacement

    // the guard constraint (n?a < 100) still passes for 60, but the update
    // would drive Limit to -20: the dry run denies before any side effect
    uint64_t version_before = c.policy().version;
    InvokeResult over = spend(60);
    CHECK_FALSE(over.granted);
    CHECK(over.denial_reason.find("below zero") != std::string::npos);
    CHECK(limit() == 40);
    CHECK(c.policy().version == version_before);

    CHECK(spend(40).granted);
    CHECK(limit() == 0);
    CHECK_FALSE(spend(1).granted);

    // the spent-down assertion was countersigned by the capsule instance
    const auto& a = c.policy().assertions[0];
    CHECK(a.capsule_signed);
    CHECK(crypto::verify_signature(c.id(), a.canonical(), a.signature));
    CHECK_FALSE(a.lineage.empty());
}

TEST_CASE("crash injection: an invocation is atomic up to its commit point") {
    TrustModule tm("base-d");
    const std::string policy_text =
        "Alice says CanInvoke(Process, Amazon, n?a) "
        "where n?a < 100 "
        "state (Limit=100, update(Limit, Limit - n?a))";

    for (auto point :
         {Capsule::CrashPoint::AfterResolve, Capsule::CrashPoint::AfterDispatch}) {
        Capsule c = make_dummy(&tm, policy_text);
        Bytes before = c.committed_snapshot();
        c.set_crash_point(point);
        auto req = make_request(amazon_key(), "Amazon", c.id(), "Process",
                                {policy::Term::number(30)});
        CHECK_THROWS_AS(c.invoke(req), CrashError);

        // the durable snapshot never saw the half-finished invocation
        CHECK(c.committed_snapshot() == before);
        Capsule revived = Capsule::restore(c.committed_snapshot(), &tm);
        CHECK(*revived.policy().assertions[0].state->find("Limit") == 100);
        CHECK(revived.audit_log().empty());

        // and the budget is still intact after recovery
        auto retry = make_request(amazon_key(), "Amazon", revived.id(), "Process",
                                  {policy::Term::number(30)});
        CHECK(revived.invoke(retry).granted);
        CHECK(*revived.policy().assertions[0].state->find("Limit") == 70);
    }
}

TEST_CASE("time-conditioned policy binds CurrentTime from the hub's signed time") {
    TrustModule tm("base-e");
    hub::Hub h;
    int64_t now = h.clock();
    std::string policy_text =
        "Alice says CanInvoke(Get, Amazon, n?a) where between(CurrentTime, " +
        std::to_string(now - 10) + ", " + std::to_string(now + 3600) + ")";

    Capsule c = make_dummy(&tm, policy_text);
    auto get = [&] {
        return c.invoke(make_request(amazon_key(), "Amazon", c.id(), "Get", {}));
    };

    SUBCASE("without a hub there is no trusted time and the rule cannot fire") {
        InvokeResult r = get();
        CHECK_FALSE(r.granted);
        CHECK(r.denial_reason.find("CurrentTime") != std::string::npos);
    }

    SUBCASE("inside the window the invocation is granted") {
        c.attach_hub(&h);
        CHECK(get().granted);
    }

    SUBCASE("outside the window it is denied") {
        c.attach_hub(&h);
        h.advance_clock(7200);
        CHECK_FALSE(get().granted);
    }
}

TEST_CASE("serialize/restore round-trips the full capsule state") {
    TrustModule tm("base-f");
    Capsule c = make_dummy(&tm,
                           "Alice says CanInvoke(Echo, Amazon, n?a)\n"
                           "Alice says CanInvoke(Process, Amazon, n?a) "
                           "where n?a < 10 "
                           "state (Limit=9, update(Limit, Limit - n?a))");
    c.invoke(make_request(amazon_key(), "Amazon", c.id(), "Echo",
                          {policy::Term::string_const("one")}));
    c.invoke(make_request(amazon_key(), "Amazon", c.id(), "Process",
                          {policy::Term::number(4)}));

    Capsule r = Capsule::restore(c.serialize_state(), &tm);
    CHECK(r.id() == c.id());
    CHECK(r.owner().name == "Alice");
    CHECK(r.kind() == "dummy");
    CHECK(r.policy().encode() == c.policy().encode());
    CHECK(r.audit_log().size() == 2);
    CHECK(r.known_principals() == c.known_principals());
    CHECK(r.lineage() == c.lineage());
    CHECK(*r.policy().assertions[1].state->find("Limit") == 5);

    // restored instance keeps serving under the same identity
    auto next = make_request(amazon_key(), "Amazon", r.id(), "Process",
                             {policy::Term::number(3)});
    CHECK(r.invoke(next).granted);
}

TEST_CASE("seal/unseal moves the capsule under a fresh identity") {
    TrustModule src_tm("base-src");
    TrustModule dst_tm("base-dst");
    Capsule c = make_dummy(&src_tm,
                           "Alice says CanInvoke(Process, Amazon, n?a) "
                           "where n?a < 100 "
                           "state (Limit=100, update(Limit, Limit - n?a))");
    c.invoke(make_request(amazon_key(), "Amazon", c.id(), "Process",
                          {policy::Term::number(25)}));

    auto sender = crypto::DhKeyPair::generate(crypto::sha256(to_bytes("s")));
    auto receiver = crypto::DhKeyPair::generate(crypto::sha256(to_bytes("r")));
    Bytes secret = sender.shared_secret(receiver.public_key());
    uint64_t binding = dst_tm.counter_read();
    SealedCapsule sealed = c.seal(secret, sender.public_key(),
                                  receiver.public_key(), binding);

    SUBCASE("round-trip preserves content but re-keys the instance") {
        Capsule moved = Capsule::unseal(sealed, secret, &dst_tm);
        CHECK(moved.owner().name == "Alice");
        CHECK(moved.id() != c.id());
        CHECK(*moved.policy().assertions[0].state->find("Limit") == 75);
        // the countersigned assertion verifies under the new identity and
        // still points at the original statement through its lineage digest
        const auto& a = moved.policy().assertions[0];
        REQUIRE(a.capsule_signed);
        CHECK(crypto::verify_signature(moved.id(), a.canonical(), a.signature));
        CHECK(a.lineage == c.policy().assertions[0].lineage);

        auto req = make_request(amazon_key(), "Amazon", moved.id(), "Process",
                                {policy::Term::number(10)});
        CHECK(moved.invoke(req).granted);
    }

    SUBCASE("any single-bit flip of the sealed blob is rejected") {
        for (size_t i = 0; i < sealed.ciphertext.size(); i += 97) {
            SealedCapsule bent = sealed;
            bent.ciphertext[i] ^= 0x02;
            CHECK_THROWS_AS(Capsule::unseal(bent, secret, &dst_tm), TamperError);
        }
        // the clear header is AEAD-bound: tampering it breaks the seal too
        SealedCapsule rebound = sealed;
        rebound.counter_binding += 7;
        CHECK_THROWS_AS(Capsule::unseal(rebound, secret, &dst_tm), TamperError);
    }

    SUBCASE("a stale counter binding cannot be replayed at the destination") {
        Capsule first = Capsule::unseal(sealed, secret, &dst_tm);
        (void)first;  // unseal advanced the destination counter
        CHECK_THROWS_AS(Capsule::unseal(sealed, secret, &dst_tm), ReplayError);
    }

    SUBCASE("the wrong transfer secret cannot open the seal") {
        auto other = crypto::DhKeyPair::generate(crypto::sha256(to_bytes("o")));
        Bytes wrong = other.shared_secret(receiver.public_key());
        CHECK_THROWS_AS(Capsule::unseal(sealed, wrong, &dst_tm), TamperError);
    }
}
