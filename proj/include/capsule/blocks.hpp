#pragma once

#include "capsule/crypto.hpp"
#include "capsule/errors.hpp"
#include "capsule/hub.hpp"

namespace capsule {

// Capsule-side view of the hub's block store. Blocks are AEAD-sealed with
// the capsule's storage key and bound to (capsule id, index, counter
// epoch) as associated data, so a hub that swaps blocks or serves a
// pre-transfer block is detected on read.
class BlockClient {
public:
    BlockClient(Bytes key32, Bytes capsule_id, uint64_t epoch)
        : key_(std::move(key32)), capsule_id_(std::move(capsule_id)), epoch_(epoch) {}

    void set_epoch(uint64_t e) { epoch_ = e; }
    uint64_t epoch() const { return epoch_; }

    void write(hub::Hub& h, const std::string& ns, uint32_t index,
               const Bytes& plaintext) const {
        Bytes sealed = crypto::aead_seal(key_, crypto::system_random(12), plaintext,
                                         aad(index));
        if (sealed.size() > hub::Hub::kBlockSize)
            throw Error("block plaintext too large for a 4 KiB block");
        h.block_write(ns, index, sealed);
    }

    Bytes read(hub::Hub& h, const std::string& ns, uint32_t index) const {
        auto sealed = h.block_read(ns, index);
        if (!sealed) throw Error("block not present");
        auto plain = crypto::aead_open(key_, *sealed, aad(index));
        if (!plain)
            throw TamperError("block failed its (capsule, index, epoch) binding");
        return *plain;
    }

private:
    Bytes aad(uint32_t index) const {
        Encoder enc;
        enc.put_bytes(capsule_id_);
        enc.put_u32(index);
        enc.put_u64(epoch_);
        return enc.take();
    }

    Bytes key_;
    Bytes capsule_id_;
    uint64_t epoch_;
};

}  // namespace capsule
