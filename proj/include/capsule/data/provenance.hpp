#pragma once

#include "capsule/data/layer.hpp"

namespace capsule::data {

// Provenance-idiom capsule: a shared text buffer whose every modification
// is logged with the signed invocation request that caused it, so edits
// are attributable and the document state is reproducible by replay.
class ProvenanceLayer : public DataLayer {
public:
    struct LogEntry {
        std::string invoker;
        uint64_t seq = 0;
        Bytes payload;    // signed invocation payload (op + args inside)
        Bytes signature;  // invoker's signature over payload
        Bytes invoker_public;
    };

    explicit ProvenanceLayer(const Bytes& initial_data)
        : buffer_(to_string(initial_data)) {}

    std::string kind() const override { return "provenance"; }
    Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) override;
    Bytes serialize() const override;
    static std::unique_ptr<ProvenanceLayer> restore(const Bytes& serialized);

    const std::string& text() const { return buffer_; }
    const std::vector<LogEntry>& log() const { return log_; }
    std::vector<LogEntry>& mutable_log() { return log_; }  // for tamper tests

    // Verifies every entry's signature; throws SignatureError on failure.
    void verify_log() const;

    // Rebuilds the document from an initial text by re-applying the edit
    // operations recorded in `entries` (after verifying each signature).
    static std::string replay(const std::string& initial,
                              const std::vector<LogEntry>& entries);

private:
    void apply_edit(const std::string& op, const Args& args);

    std::string buffer_;
    std::vector<LogEntry> log_;
    uint64_t next_seq_ = 0;
};

}  // namespace capsule::data
