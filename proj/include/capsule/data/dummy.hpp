#pragma once

#include "capsule/data/layer.hpp"

namespace capsule::data {

// Minimal layer for benchmarks and framework tests. Holds opaque
// line-oriented data; does no processing beyond echoing payloads.
class DummyLayer : public DataLayer {
public:
    explicit DummyLayer(Bytes data) : data_(std::move(data)) {}

    std::string kind() const override { return "dummy"; }
    Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) override;
    Bytes serialize() const override { return data_; }
    std::unique_ptr<DataLayer> filter(const std::string& criterion) const override;
    Bytes aggregate_payload() const override { return data_; }

    const Bytes& data() const { return data_; }

private:
    Bytes data_;
};

}  // namespace capsule::data
