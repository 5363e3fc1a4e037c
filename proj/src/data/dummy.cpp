#include "capsule/data/dummy.hpp"

#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::data {

Bytes DummyLayer::invoke(const std::string& op, const Args& args, OpContext&) {
    if (op == "Get") return data_;
    if (op == "Echo") {
        if (args.empty() || args[0].kind != policy::Term::Kind::ConstString)
            throw DataLayerError("Echo expects one string argument");
        return to_bytes(args[0].str);
    }
    if (op == "Process") {
        // Fixed-size response for invocation-cost benchmarks.
        if (args.empty() || args[0].kind != policy::Term::Kind::ConstNumber ||
            args[0].num < 0)
            throw DataLayerError("Process expects a non-negative size");
        return Bytes(size_t(args[0].num), 0xab);
    }
    throw InvocationError("unknown operation " + op);
}

std::unique_ptr<DataLayer> DummyLayer::filter(const std::string& criterion) const {
    std::stringstream in(to_string(data_));
    std::string line, kept;
    while (std::getline(in, line))
        if (line.find(criterion) != std::string::npos) kept += line + "\n";
    return std::make_unique<DummyLayer>(to_bytes(kept));
}

}  // namespace capsule::data
