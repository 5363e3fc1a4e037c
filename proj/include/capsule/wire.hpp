#pragma once

#include "capsule/bytes.hpp"
#include "capsule/errors.hpp"

namespace capsule::wire {

// Boundary messages: 4-byte big-endian length (covering type + body),
// 1-byte message type, canonical body encoding.
enum class MsgType : uint8_t {
    Install1 = 1,
    Install2 = 2,
    Install3 = 3,
    Invoke = 4,
    InvokeResp = 5,
    Xform = 6,
};

inline Bytes frame(MsgType type, const Bytes& body) {
    Encoder enc;
    enc.put_u32(uint32_t(body.size() + 1));
    enc.put_u8(uint8_t(type));
    Bytes out = enc.take();
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

struct Frame {
    MsgType type;
    Bytes body;
};

inline Frame unframe(const Bytes& raw) {
    if (raw.size() < 5) throw TamperError("short frame");
    Decoder dec(raw);
    uint32_t len = dec.get_u32();
    if (len != raw.size() - 4 || len < 1) throw TamperError("frame length mismatch");
    uint8_t t = dec.get_u8();
    if (t < 1 || t > 6) throw TamperError("unknown frame type");
    return Frame{MsgType(t), Bytes(raw.begin() + 5, raw.end())};
}

}  // namespace capsule::wire
