#include "ppgl/adabn.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppgl/numeric.hpp"

namespace ppgl {

using nlohmann::json;

void validate(const BnLayerState& state) {
  if (state.channel_count <= 0)
    throw std::invalid_argument("bn state: channel_count must be positive");
  if (state.running_mean.size() != static_cast<std::size_t>(state.channel_count) ||
      state.running_var.size() != static_cast<std::size_t>(state.channel_count))
    throw std::invalid_argument("bn state: statistic lengths must equal channel_count");
  for (double v : state.running_var)
    if (v < 0.0) throw std::invalid_argument("bn state: running_var must be >= 0 element-wise");
  if (!(state.momentum_alpha >= 0.0 && state.momentum_alpha <= 1.0))
    throw std::invalid_argument("bn state: momentum_alpha must be in [0,1]");
}

void validate(const FeatureMap& features) {
  if (features.channel_count <= 0)
    throw std::invalid_argument("feature map: channel_count must be positive");
  if (features.spatial_size < 2)
    throw std::invalid_argument("feature map: spatial_size must be >= 2");
  if (features.values.size() !=
      static_cast<std::size_t>(features.channel_count) * features.spatial_size)
    throw std::invalid_argument("feature map: value length must equal channel_count * spatial_size");
}

ChannelStats current_stats(const FeatureMap& features) {
  validate(features);
  ChannelStats stats;
  stats.mean.resize(features.channel_count);
  stats.variance.resize(features.channel_count);
  const int n = features.spatial_size;
  for (int c = 0; c < features.channel_count; ++c) {
    const double* chan = features.values.data() + static_cast<std::size_t>(c) * n;
    KahanSum sum;
    for (int s = 0; s < n; ++s) sum.add(chan[s]);
    const double mean = sum.value() / n;
    KahanSum sq;
    for (int s = 0; s < n; ++s) {
      const double d = chan[s] - mean;
      sq.add(d * d);
    }
    stats.mean[c] = mean;
    stats.variance[c] = sq.value() / n;
  }
  return stats;
}

BnLayerState adabn_update(const BnLayerState& state, const FeatureMap& features) {
  validate(state);
  if (features.channel_count != state.channel_count)
    throw std::invalid_argument("adabn_update: channel counts do not match");
  const ChannelStats cur = current_stats(features);
  BnLayerState next = state;
  const double alpha = state.momentum_alpha;
  for (int c = 0; c < state.channel_count; ++c) {
    next.running_mean[c] = (1.0 - alpha) * state.running_mean[c] + alpha * cur.mean[c];
    next.running_var[c] = (1.0 - alpha) * state.running_var[c] + alpha * cur.variance[c];
  }
  return next;
}

BnLayerState adapt_sequence(const BnLayerState& state, const std::vector<FeatureMap>& samples) {
  BnLayerState current = state;
  for (const FeatureMap& sample : samples) current = adabn_update(current, sample);
  return current;
}

json to_json(const BnLayerState& state) {
  return json{{"channel_count", state.channel_count},
              {"running_mean", state.running_mean},
              {"running_var", state.running_var},
              {"momentum_alpha", state.momentum_alpha}};
}

BnLayerState bn_state_from_json(const json& j) {
  BnLayerState state;
  state.channel_count = j.at("channel_count").get<int>();
  state.running_mean = j.at("running_mean").get<std::vector<double>>();
  state.running_var = j.at("running_var").get<std::vector<double>>();
  state.momentum_alpha = j.at("momentum_alpha").get<double>();
  validate(state);
  return state;
}

void save_bn_state(const BnLayerState& state, const std::string& path) {
  validate(state);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_bn_state: cannot open " + path);
  out << to_json(state).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_bn_state: write failed");
}

BnLayerState load_bn_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_bn_state: cannot open " + path);
  json j;
  in >> j;
  return bn_state_from_json(j);
}

FeatureMap feature_map_from_json(const json& j) {
  FeatureMap f;
  f.channel_count = j.at("channel_count").get<int>();
  f.spatial_size = j.at("spatial_size").get<int>();
  f.values = j.at("values").get<std::vector<double>>();
  validate(f);
  return f;
}

}  // namespace ppgl
