#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>
#include <set>

#include "capsule/errors.hpp"
#include "capsule/gateway.hpp"
#include "capsule/hub.hpp"
#include "capsule/secure_channel.hpp"
#include "support/testkeys.hpp"

using namespace capsule;
using testsupport::pooled_key;

TEST_CASE("fault specs parse and validate") {
    auto cfg = hub::FaultConfig::parse("drop:0.1|corrupt:0.05|delay:20");
    CHECK(cfg.drop_p == doctest::Approx(0.1));
    CHECK(cfg.corrupt_p == doctest::Approx(0.05));
    CHECK(cfg.delay_ms == 20);
    CHECK(cfg.any());

    CHECK_FALSE(hub::FaultConfig::parse("").any());
    CHECK_THROWS_AS(hub::FaultConfig::parse("drop:1.5"), Error);
    CHECK_THROWS_AS(hub::FaultConfig::parse("explode:1"), Error);
    CHECK_THROWS_AS(hub::FaultConfig::parse("drop"), Error);
}

TEST_CASE("hub relays messages and accounts for bytes") {
    hub::Hub h;
    h.register_endpoint("echo", [](const Bytes& m) {
        Bytes out = m;
        out.push_back('!');
        return out;
    });

    CHECK(h.connect("nonexistent") == -1);
    int fd = h.connect("echo");
    REQUIRE(fd >= 0);

    CHECK_FALSE(h.recv(fd).has_value());  // nothing pending -> timeout
    CHECK(h.send(fd, to_bytes("hello")));
    auto resp = h.recv(fd);
    REQUIRE(resp.has_value());
    CHECK(to_string(*resp) == "hello!");
    CHECK(h.bytes_out() == 5);
    CHECK(h.bytes_in() == 6);
    CHECK(h.bytes_total() == 11);

    h.reset_counters();
    CHECK(h.bytes_total() == 0);

    h.close(fd);
    CHECK_THROWS_AS(h.send(fd, to_bytes("x")), Error);
    CHECK_THROWS_AS(h.recv(fd), Error);
    CHECK_THROWS_AS(h.send(999, to_bytes("x")), Error);
}

TEST_CASE("hub drop faults look like timeouts") {
    hub::Hub h(1234);
    h.register_endpoint("echo", [](const Bytes& m) { return m; });
    h.set_faults(hub::FaultConfig::parse("drop:1.0"));
    int fd = h.connect("echo");
    CHECK(h.send(fd, to_bytes("lost")));
    CHECK_FALSE(h.recv(fd).has_value());
}

TEST_CASE("signed time verifies, and stale replays are rejected") {
    hub::Hub h;
    Bytes nonce = crypto::system_random(16);
    hub::SignedTime st = h.time(nonce);
    CHECK(st.secs == h.clock());
    CHECK(hub::verify_signed_time(st, h.time_authority_public(), nonce, 0));

    // encode/decode round-trip
    hub::SignedTime rt = hub::SignedTime::decode(st.encode());
    CHECK(hub::verify_signed_time(rt, h.time_authority_public(), nonce, 0));

    // wrong nonce echo (pre-recorded response) is rejected
    CHECK_FALSE(hub::verify_signed_time(st, h.time_authority_public(),
                                        crypto::system_random(16), 0));

    // unsigned or tampered time is rejected
    hub::SignedTime unsigned_time = st;
    unsigned_time.signature.clear();
    CHECK_FALSE(
        hub::verify_signed_time(unsigned_time, h.time_authority_public(), nonce, 0));
    hub::SignedTime skewed = st;
    skewed.secs += 1000;  // signature no longer covers the value
    CHECK_FALSE(hub::verify_signed_time(skewed, h.time_authority_public(), nonce, 0));

    // a key that is not the authority's is rejected
    CHECK_FALSE(hub::verify_signed_time(st, pooled_key(0).public_der(), nonce, 0));

    // replaying an old timestamp after the verifier has advanced past the
    // skew window fails; within the window it is tolerated
    int64_t old_secs = st.secs;
    CHECK(hub::verify_signed_time(st, h.time_authority_public(), nonce,
                                  old_secs + 299));
    CHECK(hub::verify_signed_time(st, h.time_authority_public(), nonce,
                                  old_secs + 300));
    CHECK_FALSE(hub::verify_signed_time(st, h.time_authority_public(), nonce,
                                        old_secs + 301));

    h.advance_clock(500);
    hub::SignedTime later = h.time(nonce);
    CHECK(later.secs == old_secs + 500);
    h.set_clock(42);
    CHECK(h.clock() == 42);
}

TEST_CASE("secure channel: handshake, records, and pinning") {
    auto identity = pooled_key(1);
    SecureServer server("pay.example", &identity);
    SecureClient client("pay.example", identity.public_der(),
                        crypto::sha256(to_bytes("client-seed")));

    Bytes hello = client.hello();
    CHECK(server.is_hello(hello));
    CHECK_FALSE(server.is_hello(to_bytes("not a handshake")));
    Bytes reply = server.handle_hello(hello, crypto::sha256(to_bytes("server-seed")));
    client.finish(reply);
    CHECK(client.established());

    Bytes rec = client.seal(to_bytes("request-1"));
    CHECK(to_string(server.open(rec)) == "request-1");
    Bytes back = server.seal(to_bytes("response-1"));
    CHECK(to_string(client.open(back)) == "response-1");

    // sequence binding: replaying the first client record fails (the server
    // now expects sequence 1)
    CHECK_THROWS_AS(server.open(rec), TamperError);

    // a corrupted record is rejected, never silently accepted
    Bytes rec2 = client.seal(to_bytes("request-2"));
    Bytes corrupted = rec2;
    corrupted[corrupted.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(server.open(corrupted), TamperError);

    SUBCASE("client pinned to a different identity aborts the handshake") {
        SecureClient wrong_pin("pay.example", pooled_key(2).public_der(),
                               crypto::sha256(to_bytes("seed-2")));
        Bytes h2 = wrong_pin.hello();
        Bytes r2 = server.handle_hello(h2, crypto::sha256(to_bytes("seed-3")));
        CHECK_THROWS_AS(wrong_pin.finish(r2), TamperError);
        CHECK_FALSE(wrong_pin.established());
    }

    SUBCASE("server refuses a handshake for a different name") {
        SecureClient other("other.example", identity.public_der(),
                           crypto::sha256(to_bytes("seed-4")));
        CHECK_THROWS_AS(server.handle_hello(other.hello(),
                                            crypto::sha256(to_bytes("seed-5"))),
                        TamperError);
    }
}

namespace {

// Drives a full secure-channel charge against a gateway through the hub.
std::string charge_via_hub(hub::Hub& h, const Gateway& gw, int64_t amount,
                           const std::string& merchant, const std::string& card,
                           uint64_t seed_tag) {
    int fd = h.connect("gw");
    REQUIRE(fd >= 0);
    SecureClient chan(gw.ssl_name(), gw.identity_public(),
                      crypto::sha256(to_bytes("charge-seed-" +
                                              std::to_string(seed_tag))));
    h.send(fd, chan.hello());
    auto reply = h.recv(fd);
    REQUIRE(reply.has_value());
    chan.finish(*reply);

    std::string body = "amount=" + std::to_string(amount) + "&merchant=" + merchant +
                       "&card=" + card;
    h.send(fd, chan.seal(to_bytes("POST /charge HTTP/1.1\r\n\r\n" + body)));
    auto resp = h.recv(fd);
    REQUIRE(resp.has_value());
    h.close(fd);
    return to_string(chan.open(*resp));
}

}  // namespace

TEST_CASE("gateway maintains a funded account with a ledger") {
    hub::Hub h;
    Gateway gw("pay.example", 1000);
    h.register_endpoint("gw", gw.handler());

    std::string ok = charge_via_hub(h, gw, 50, "MerchantA", "card-123", 1);
    CHECK(ok.find("200 OK") != std::string::npos);
    std::smatch m;
    REQUIRE(std::regex_search(ok, m, std::regex("conf_code=([0-9a-f]{16})")));
    CHECK(gw.balance_cents() == 950);
    REQUIRE(gw.ledger().size() == 1);
    CHECK(gw.ledger()[0].amount_cents == 50);
    CHECK(gw.ledger()[0].merchant == "MerchantA");
    CHECK(gw.ledger()[0].conf_code == m[1]);

    SUBCASE("zero, negative, and malformed amounts are rejected") {
        CHECK(charge_via_hub(h, gw, 0, "M", "c", 2).find("error=bad_amount") !=
              std::string::npos);
        CHECK(charge_via_hub(h, gw, -5, "M", "c", 3).find("error=bad_amount") !=
              std::string::npos);
        CHECK(gw.balance_cents() == 950);
        CHECK(gw.ledger().size() == 1);
    }

    SUBCASE("insufficient funds is a clean decline") {
        std::string declined = charge_via_hub(h, gw, 5000, "M", "c", 4);
        CHECK(declined.find("error=insufficient_funds") != std::string::npos);
        CHECK(gw.balance_cents() == 950);
    }

    SUBCASE("the account can be exhausted exactly to zero, never below") {
        CHECK(charge_via_hub(h, gw, 950, "M", "c", 5).find("conf_code=") !=
              std::string::npos);
        CHECK(gw.balance_cents() == 0);
        CHECK(charge_via_hub(h, gw, 1, "M", "c", 6).find("error=insufficient_funds") !=
              std::string::npos);
        CHECK(gw.balance_cents() == 0);
    }

    SUBCASE("confirmation codes are unique across many charges") {
        std::set<std::string> codes;
        for (int i = 0; i < 40; ++i) {
            std::string resp = charge_via_hub(h, gw, 1, "M", "c", 100 + uint64_t(i));
            std::smatch cm;
            REQUIRE(std::regex_search(resp, cm, std::regex("conf_code=([0-9a-f]{16})")));
            codes.insert(cm[1]);
        }
        CHECK(codes.size() == 40);
    }
}

TEST_CASE("gateway rejects malformed or incomplete requests") {
    hub::Hub h;
    Gateway gw("pay.example", 1000);
    h.register_endpoint("gw", gw.handler());

    auto raw = [&](const std::string& request, uint64_t tag) {
        int fd = h.connect("gw");
        SecureClient chan(gw.ssl_name(), gw.identity_public(),
                          crypto::sha256(to_bytes("raw-" + std::to_string(tag))));
        h.send(fd, chan.hello());
        chan.finish(*h.recv(fd));
        h.send(fd, chan.seal(to_bytes(request)));
        auto resp = h.recv(fd);
        REQUIRE(resp.has_value());
        h.close(fd);
        return to_string(chan.open(*resp));
    };

    CHECK(raw("GET /charge HTTP/1.1\r\n\r\namount=5&merchant=M&card=c", 1)
              .find("error=malformed_request") != std::string::npos);
    CHECK(raw("POST /charge HTTP/1.1\r\n\r\namount=5&merchant=M", 2)
              .find("error=missing_field") != std::string::npos);
    CHECK(raw("POST /charge HTTP/1.1\r\n\r\namount=abc&merchant=M&card=c", 3)
              .find("error=bad_amount") != std::string::npos);
    CHECK(gw.balance_cents() == 1000);

    // a corrupted record reaching the gateway is answered out-of-channel and
    // the client's channel layer refuses to accept that answer
    int fd = h.connect("gw");
    SecureClient chan(gw.ssl_name(), gw.identity_public(),
                      crypto::sha256(to_bytes("corrupt-case")));
    h.send(fd, chan.hello());
    chan.finish(*h.recv(fd));
    Bytes rec = chan.seal(to_bytes("POST /charge HTTP/1.1\r\n\r\namount=5&merchant=M&card=c"));
    rec[rec.size() - 1] ^= 0x80;
    h.send(fd, rec);
    auto resp = h.recv(fd);
    REQUIRE(resp.has_value());
    CHECK_THROWS_AS(chan.open(*resp), TamperError);
    CHECK(gw.balance_cents() == 1000);
}
