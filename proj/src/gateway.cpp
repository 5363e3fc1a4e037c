#include "capsule/gateway.hpp"

#include <map>
#include <sstream>

#include "capsule/errors.hpp"

namespace capsule {

namespace {

// Parses `k1=v1&k2=v2` into a map; later duplicates win.
std::map<std::string, std::string> parse_form(const std::string& body) {
    std::map<std::string, std::string> out;
    std::stringstream ss(body);
    std::string pair;
    while (std::getline(ss, pair, '&')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) continue;
        out[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    return out;
}

std::string http_response(int code, const std::string& body) {
    std::string status = code == 200 ? "200 OK" : "400 Bad Request";
    return "HTTP/1.1 " + status + "\r\n\r\n" + body;
}

}  // namespace

Gateway::Gateway(std::string ssl_name, int64_t initial_balance_cents, uint64_t seed)
    : ssl_name_(std::move(ssl_name)),
      identity_(crypto::SigningKey::generate()),
      channel_(ssl_name_, &identity_),
      balance_(initial_balance_cents),
      rng_(seed) {
    identity_public_ = identity_.public_der();
}

hub::Handler Gateway::handler() {
    return [this](const Bytes& msg) { return handle(msg); };
}

Bytes Gateway::handle(const Bytes& msg) {
    if (channel_.is_hello(msg)) {
        Bytes seed(32);
        for (size_t i = 0; i < 4; ++i) {
            uint64_t w = rng_();
            for (int j = 0; j < 8; ++j) seed[i * 8 + j] = uint8_t(w >> (8 * j));
        }
        return channel_.handle_hello(msg, seed);
    }
    std::string request;
    try {
        request = to_string(channel_.open(msg));
    } catch (const Error&) {
        // Corrupted or unauthenticated record: the caller's channel layer
        // will reject this reply the same way. Never process it.
        return to_bytes("HTTP/1.1 400 Bad Request\r\n\r\nerror=bad_record");
    }
    return channel_.seal(to_bytes(process_request(request)));
}

std::string Gateway::process_request(const std::string& request) {
    auto body_at = request.find("\r\n\r\n");
    if (request.rfind("POST ", 0) != 0 || body_at == std::string::npos)
        return http_response(400, "error=malformed_request");
    auto form = parse_form(request.substr(body_at + 4));

    if (!form.count("amount") || !form.count("merchant") || !form.count("card"))
        return http_response(400, "error=missing_field");

    int64_t amount = 0;
    try {
        size_t used = 0;
        amount = std::stoll(form["amount"], &used);
        if (used != form["amount"].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        return http_response(400, "error=bad_amount");
    }
    if (amount <= 0) return http_response(400, "error=bad_amount");
    if (amount > balance_) return http_response(200, "error=insufficient_funds");

    balance_ -= amount;
    std::string conf = fresh_conf_code();
    ledger_.push_back(Tx{amount, form["merchant"], conf});
    return http_response(200, "conf_code=" + conf);
}

std::string Gateway::fresh_conf_code() {
    static const char* digits = "0123456789abcdef";
    std::string code;
    do {
        code.clear();
        uint64_t w = rng_();
        for (int i = 0; i < 16; ++i) code += digits[(w >> (4 * i)) & 0xf];
    } while ([&] {
        for (const auto& tx : ledger_)
            if (tx.conf_code == code) return true;
        return false;
    }());
    return code;
}

}  // namespace capsule
