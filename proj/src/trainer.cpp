#include "ppgl/trainer.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppgl/rng.hpp"

namespace ppgl {

using nlohmann::json;

json to_json(const IterationRecord& r) {
  return json{{"iteration", r.iteration},
              {"mean_return", r.mean_return},
              {"mean_length", r.mean_length},
              {"malformed_rate", r.malformed_rate},
              {"redundancy_rate", r.redundancy_rate},
              {"grad_norm", r.grad_norm}};
}

TrainResult train(const Orchestrator& orchestrator, const std::vector<CaseRecord>& corpus,
                  const TrainConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("train: corpus must be nonempty");
  if (config.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");

  TrainResult result;
  result.params = PolicyParams::zeros(Orchestrator::kFeatureDim, kActionCount);
  result.curve.reserve(config.iterations);
  const double gamma = orchestrator.config().reward.gamma;

  for (int iter = 0; iter < config.iterations; ++iter) {
    const std::uint64_t iter_seed = derive_seed(config.seed, 0x7E4A1000ULL + iter);
    std::vector<Trajectory> batch;
    batch.reserve(config.batch_size);
    for (int e = 0; e < config.batch_size; ++e) {
      const std::uint64_t episode_seed = derive_seed(iter_seed, static_cast<std::uint64_t>(e));
      const std::size_t case_index =
          derive_seed(episode_seed, 0xCA5EULL) % corpus.size();
      RolloutResult rollout =
          orchestrator.rollout(result.params, corpus[case_index], RunMode::Sample, episode_seed);
      batch.push_back(std::move(rollout.trajectory));
    }
    const StepDiagnostics diag = policy_gradient_step(result.params, batch, config, gamma);
    result.curve.push_back(IterationRecord{iter, diag.mean_return, diag.mean_length,
                                           diag.malformed_rate, diag.redundancy_rate,
                                           diag.grad_norm});
  }
  return result;
}

void save_learning_curve(const std::vector<IterationRecord>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_learning_curve: cannot open " + path);
  for (const IterationRecord& r : curve) out << to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("save_learning_curve: write failed");
}

}  // namespace ppgl
