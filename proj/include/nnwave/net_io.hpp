#ifndef NNWAVE_NET_IO_HPP
#define NNWAVE_NET_IO_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nnwave/features.hpp"
#include "nnwave/net.hpp"

namespace nnwave {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
};

// Versioned, self-describing model file: everything needed to reproduce the
// forward pass bit-for-bit (full-precision parameters) plus provenance.
// Model 2 wave models embed their paired surge surrogate.
struct ModelDocument {
    static constexpr int kFormatVersion = 1;

    net::NetworkSpec spec;
    net::Weights<double> weights;
    FeatureSchema schema;
    Scaler scaler;
    std::uint64_t rng_seed = 0;
    std::vector<EpochRecord> training_history;
    std::shared_ptr<ModelDocument> surge_model;  // M2 only

    std::string model_id() const;  // content-independent identifier
};

std::string save_model(const ModelDocument& doc);
ModelDocument load_model(const std::string& json_text);

void save_model_file(const ModelDocument& doc, const std::string& path);
ModelDocument load_model_file(const std::string& path);

}  // namespace nnwave

#endif
