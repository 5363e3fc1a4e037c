#include "capsule/data/payment.hpp"

#include <regex>
#include <sstream>

#include "capsule/errors.hpp"
#include "capsule/secure_channel.hpp"

namespace capsule::data {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

}  // namespace

PaymentLayer::PaymentLayer(const Bytes& initial_data)
    : config_text_(to_string(initial_data)) {
    std::stringstream in(config_text_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataLayerError("payment config: bad line '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "card")
            card_ = val;
        else if (key == "gateway")
            gateway_endpoint_ = val;
        else if (key == "ssl_name")
            ssl_name_ = val;
        else if (key == "gateway_pub")
            gateway_public_ = hex_decode(val);
        else if (key == "template")
            request_template_ = val;
        else
            throw DataLayerError("payment config: unknown key '" + key + "'");
    }
    if (card_.empty() || gateway_endpoint_.empty() || ssl_name_.empty() ||
        gateway_public_.empty() || request_template_.empty())
        throw DataLayerError("payment config: missing required field");
}

std::string PaymentLayer::charge(int64_t amount_cents, const std::string& merchant,
                                 OpContext& ctx) {
    if (amount_cents <= 0) throw DataLayerError("charge amount must be positive");
    if (!ctx.net || !ctx.trust)
        throw DataLayerError("charge requires network and trust module");

    int fd = ctx.net->connect(gateway_endpoint_);
    if (fd < 0) throw DataLayerError("gateway endpoint unreachable");

    // Authenticate the far end before anything derived from the card
    // leaves the capsule: the pin check happens on the handshake reply.
    SecureClient chan(ssl_name_, gateway_public_, ctx.trust->random_bytes(32));
    ctx.hub_send(fd, chan.hello());
    auto reply = ctx.net->recv(fd);
    if (!reply) {
        ctx.net->close(fd);
        throw DataLayerError("gateway handshake timed out");
    }
    try {
        chan.finish(*reply);
    } catch (const TamperError&) {
        ctx.net->close(fd);
        throw;
    }

    std::string body = request_template_;
    replace_all(body, "{Amount}", std::to_string(amount_cents));
    replace_all(body, "{MerchantAccount}", merchant);
    replace_all(body, "{Card}", card_);
    std::string request = "POST /charge HTTP/1.1\r\n\r\n" + body;

    ctx.hub_send(fd, chan.seal(to_bytes(request)));
    auto sealed_resp = ctx.net->recv(fd);
    ctx.net->close(fd);
    if (!sealed_resp) throw DataLayerError("gateway response timed out");

    std::string response = to_string(chan.open(*sealed_resp));
    std::smatch m;
    if (!std::regex_search(response, m, std::regex("conf_code=([0-9a-f]{16})")))
        throw DataLayerError("charge failed: " + response.substr(0, 128));
    return m[1];
}

Bytes PaymentLayer::invoke(const std::string& op, const Args& args, OpContext& ctx) {
    if (op == "Charge") {
        if (args.empty() || args[0].kind != policy::Term::Kind::ConstNumber)
            throw DataLayerError("Charge expects (amount)");
        return to_bytes(charge(args[0].num, ctx.invoker, ctx));
    }
    throw InvocationError("unknown operation " + op);
}

}  // namespace capsule::data
