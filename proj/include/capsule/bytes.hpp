#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace capsule {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

std::string hex_encode(const Bytes& b);
Bytes hex_decode(std::string_view s);

// Canonical length-prefixed field encoding, big-endian. Used for
// assertion signing, wire message bodies, and capsule serialization.
class Encoder {
public:
    void put_u8(uint8_t v) { buf_.push_back(v); }

    void put_u32(uint32_t v) {
        for (int i = 3; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    }

    void put_u64(uint64_t v) {
        for (int i = 7; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
    }

    void put_i64(int64_t v) { put_u64(uint64_t(v)); }

    void put_bytes(const Bytes& b) {
        put_u32(uint32_t(b.size()));
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    void put_string(std::string_view s) {
        put_u32(uint32_t(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

class Decoder {
public:
    explicit Decoder(const Bytes& b) : buf_(b) {}

    uint8_t get_u8() {
        need(1);
        return buf_[pos_++];
    }

    uint32_t get_u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_++];
        return v;
    }

    uint64_t get_u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | buf_[pos_++];
        return v;
    }

    int64_t get_i64() { return int64_t(get_u64()); }

    Bytes get_bytes() {
        uint32_t n = get_u32();
        need(n);
        Bytes out(buf_.begin() + pos_, buf_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }

    std::string get_string() {
        Bytes b = get_bytes();
        return std::string(b.begin(), b.end());
    }

    bool done() const { return pos_ == buf_.size(); }
    size_t remaining() const { return buf_.size() - pos_; }

    void expect_done() const {
        if (!done()) throw DecodeError("trailing bytes in encoded value");
    }

private:
    void need(size_t n) const {
        if (buf_.size() - pos_ < n) throw DecodeError("truncated encoded value");
    }

    const Bytes& buf_;
    size_t pos_ = 0;
};

}  // namespace capsule
