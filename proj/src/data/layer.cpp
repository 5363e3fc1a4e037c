#include "capsule/data/layer.hpp"

#include "capsule/data/ads.hpp"
#include "capsule/data/dummy.hpp"
#include "capsule/data/payment.hpp"
#include "capsule/data/provenance.hpp"
#include "capsule/data/stock.hpp"
#include "capsule/errors.hpp"

namespace capsule::data {

std::unique_ptr<DataLayer> DataLayer::filter(const std::string&) const {
    throw DataLayerError("data layer '" + kind() + "' does not support filtering");
}

Bytes DataLayer::aggregate_payload() const {
    throw DataLayerError("data layer '" + kind() + "' does not support aggregation");
}

std::unique_ptr<DataLayer> make_layer(const std::string& kind,
                                      const Bytes& initial_data) {
    if (kind == "dummy") return std::make_unique<DummyLayer>(initial_data);
    if (kind == "stock") return std::make_unique<StockLayer>(initial_data);
    if (kind == "payment") return std::make_unique<PaymentLayer>(initial_data);
    if (kind == "ads") return std::make_unique<AdsLayer>(initial_data);
    if (kind == "provenance") return std::make_unique<ProvenanceLayer>(initial_data);
    throw Error("unknown data layer kind '" + kind + "'");
}

std::unique_ptr<DataLayer> restore_layer(const std::string& kind,
                                         const Bytes& serialized) {
    if (kind == "stock") return StockLayer::restore(serialized);
    if (kind == "provenance") return ProvenanceLayer::restore(serialized);
    // The remaining layers serialize to their own construction format.
    return make_layer(kind, serialized);
}

}  // namespace capsule::data
