#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ppgl {

// Running statistics of one batch-normalization layer.
struct BnLayerState {
  int channel_count = 0;
  std::vector<double> running_mean;
  std::vector<double> running_var;  // variance, not std
  double momentum_alpha = 0.1;

  bool operator==(const BnLayerState&) const = default;
};

// Channel-major activations of one test sample. Statistics are estimated
// over spatial positions, so spatial_size must be at least 2.
struct FeatureMap {
  int channel_count = 0;
  int spatial_size = 0;
  std::vector<double> values;  // values[c * spatial_size + s]
};

void validate(const BnLayerState& state);
void validate(const FeatureMap& features);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population
};

// Per-channel mean and population variance over spatial positions.
ChannelStats current_stats(const FeatureMap& features);

// Momentum blend of running statistics toward the current sample's:
// new = (1 - alpha) * old + alpha * current, for mean and variance alike.
BnLayerState adabn_update(const BnLayerState& state, const FeatureMap& features);

// Left-to-right fold of adabn_update across samples (progressive accumulation).
BnLayerState adapt_sequence(const BnLayerState& state, const std::vector<FeatureMap>& samples);

nlohmann::json to_json(const BnLayerState& state);
BnLayerState bn_state_from_json(const nlohmann::json& j);
void save_bn_state(const BnLayerState& state, const std::string& path);
BnLayerState load_bn_state(const std::string& path);

FeatureMap feature_map_from_json(const nlohmann::json& j);

}  // namespace ppgl
