#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/orchestrator.hpp"

namespace ppgl {

struct IterationRecord {
  int iteration = 0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  double malformed_rate = 0.0;
  double redundancy_rate = 0.0;
  double grad_norm = 0.0;
};

nlohmann::json to_json(const IterationRecord& record);

struct TrainResult {
  PolicyParams params;
  std::vector<IterationRecord> curve;
};

// Batched vanilla policy-gradient training. Case selection, action sampling
// and therefore the whole learning curve are determined by config.seed.
TrainResult train(const Orchestrator& orchestrator, const std::vector<CaseRecord>& corpus,
                  const TrainConfig& config);

void save_learning_curve(const std::vector<IterationRecord>& curve, const std::string& path);

}  // namespace ppgl
