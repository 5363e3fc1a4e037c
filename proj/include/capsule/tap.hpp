#pragma once

#include <algorithm>
#include <vector>

#include "capsule/bytes.hpp"

namespace capsule {

// Audit point on the capsule's isolation boundary. Every outbound frame is
// recorded here, so tests can assert that protected bytes (card tokens,
// strategies, raw histories) never leave the boundary in the clear.
class BoundaryTap {
public:
    void observe(const Bytes& frame) {
        frames_.push_back(frame);
        total_bytes_ += frame.size();
    }

    // True if `needle` occurs as a contiguous byte substring of any
    // recorded frame.
    bool contains(const Bytes& needle) const {
        if (needle.empty()) return false;
        for (const auto& f : frames_) {
            auto it = std::search(f.begin(), f.end(), needle.begin(), needle.end());
            if (it != f.end()) return true;
        }
        return false;
    }

    bool contains(std::string_view needle) const {
        return contains(Bytes(needle.begin(), needle.end()));
    }

    const std::vector<Bytes>& frames() const { return frames_; }
    uint64_t total_bytes() const { return total_bytes_; }
    void clear() {
        frames_.clear();
        total_bytes_ = 0;
    }

private:
    std::vector<Bytes> frames_;
    uint64_t total_bytes_ = 0;
};

}  // namespace capsule
