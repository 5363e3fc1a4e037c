#include "capsule/data/provenance.hpp"

#include "capsule/crypto.hpp"
#include "capsule/errors.hpp"
#include "capsule/request.hpp"

namespace capsule::data {

namespace {

void check_entry(const ProvenanceLayer::LogEntry& e) {
    if (!crypto::verify_signature(e.invoker_public, e.payload, e.signature))
        throw SignatureError("provenance log entry " + std::to_string(e.seq) +
                             " failed verification");
}

std::pair<std::string, Args> decode_edit(const Bytes& payload) {
    auto inv = decode_invocation_payload(payload);
    return {inv.op, inv.args};
}

}  // namespace

void ProvenanceLayer::apply_edit(const std::string& op, const Args& args) {
    if (op == "Insert") {
        if (args.size() != 2 || args[0].kind != policy::Term::Kind::ConstNumber ||
            args[1].kind != policy::Term::Kind::ConstString)
            throw DataLayerError("Insert expects (position, text)");
        int64_t pos = args[0].num;
        if (pos < 0 || size_t(pos) > buffer_.size())
            throw DataLayerError("Insert position out of bounds");
        buffer_.insert(size_t(pos), args[1].str);
    } else if (op == "Delete") {
        if (args.size() != 2 || args[0].kind != policy::Term::Kind::ConstNumber ||
            args[1].kind != policy::Term::Kind::ConstNumber)
            throw DataLayerError("Delete expects (position, count)");
        int64_t pos = args[0].num, n = args[1].num;
        if (pos < 0 || n < 0 || size_t(pos) + size_t(n) > buffer_.size())
            throw DataLayerError("Delete range out of bounds");
        buffer_.erase(size_t(pos), size_t(n));
    } else {
        throw InvocationError("unknown edit operation " + op);
    }
}

Bytes ProvenanceLayer::invoke(const std::string& op, const Args& args,
                              OpContext& ctx) {
    if (op == "Get") return to_bytes(buffer_);
    if (op == "ReadLog") {
        if (!ctx.is_owner) throw DataLayerError("ReadLog is owner-only");
        verify_log();
        std::string out;
        for (const auto& e : log_) {
            auto [eop, eargs] = decode_edit(e.payload);
            out += std::to_string(e.seq) + " " + e.invoker + " " + eop + "\n";
        }
        return to_bytes(out);
    }

    // Edits are logged before mutation so an out-of-bounds request leaves
    // neither buffer nor log changed.
    apply_edit(op, args);
    LogEntry e;
    e.invoker = ctx.invoker;
    e.seq = next_seq_++;
    e.payload = ctx.request_payload;
    e.signature = ctx.request_signature;
    e.invoker_public = ctx.invoker_public;
    log_.push_back(std::move(e));
    return to_bytes(std::string("ok"));
}

void ProvenanceLayer::verify_log() const {
    for (const auto& e : log_) check_entry(e);
}

std::string ProvenanceLayer::replay(const std::string& initial,
                                    const std::vector<LogEntry>& entries) {
    ProvenanceLayer scratch(to_bytes(initial));
    for (const auto& e : entries) {
        check_entry(e);
        auto [op, args] = decode_edit(e.payload);
        scratch.apply_edit(op, args);
    }
    return scratch.buffer_;
}

Bytes ProvenanceLayer::serialize() const {
    Encoder enc;
    enc.put_string(buffer_);
    enc.put_u64(next_seq_);
    enc.put_u32(uint32_t(log_.size()));
    for (const auto& e : log_) {
        enc.put_string(e.invoker);
        enc.put_u64(e.seq);
        enc.put_bytes(e.payload);
        enc.put_bytes(e.signature);
        enc.put_bytes(e.invoker_public);
    }
    return enc.take();
}

std::unique_ptr<ProvenanceLayer> ProvenanceLayer::restore(const Bytes& serialized) {
    Decoder dec(serialized);
    auto layer = std::make_unique<ProvenanceLayer>(to_bytes(dec.get_string()));
    layer->next_seq_ = dec.get_u64();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) {
        LogEntry e;
        e.invoker = dec.get_string();
        e.seq = dec.get_u64();
        e.payload = dec.get_bytes();
        e.signature = dec.get_bytes();
        e.invoker_public = dec.get_bytes();
        layer->log_.push_back(std::move(e));
    }
    dec.expect_done();
    return layer;
}

}  // namespace capsule::data
