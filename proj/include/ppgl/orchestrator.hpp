#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ppgl/knowledge_graph.hpp"
#include "ppgl/policy.hpp"
#include "ppgl/report.hpp"
#include "ppgl/swarm_env.hpp"

namespace ppgl {

enum class RunMode { Greedy, Sample };

struct OrchestratorConfig {
  NoiseConfig noise;
  RewardConfig reward;
  GappRubric rubric;
  double alert_threshold = 0.5;
  int max_steps = 20;
};

struct RolloutResult {
  DiagnosticReport report;
  EpisodeTrace trace;
  Trajectory trajectory;
  double r_diag = 0.0;
};

struct EvalMetrics {
  int episodes = 0;
  double gapp_total_mae = 0.0;
  double pattern_f1 = 0.0;
  double necrosis_f1 = 0.0;
  double invasion_f1 = 0.0;
  std::optional<double> cellularity_mae;
  std::optional<double> cellularity_r;
  std::optional<double> ki67_mae;
  std::optional<double> ki67_r;
  double mutation_f1 = 0.0;
  double mean_reward = 0.0;  // discounted return
  double mean_length = 0.0;
  double mean_tool_calls = 0.0;  // non-emit actions per episode
  double malformed_rate = 0.0;
  double redundancy_rate = 0.0;
};

nlohmann::json to_json(const EvalMetrics& metrics);

// Runs policies against the swarm environment, assembles reports with the
// evidence trail, and scores them via finalize.
class Orchestrator {
 public:
  // Feature layout: answered-task one-hot (10), normalized step index (1),
  // per-task observation summary slots (14), bias (1).
  static constexpr int kFeatureDim = 26;

  Orchestrator(OrchestratorConfig config, KnowledgeGraph graph);

  Eigen::VectorXd featurize(const EnvState& state) const;

  // One full episode. Greedy picks the argmax action (ties to the lowest
  // index); Sample draws from the policy distribution with the given seed.
  // The terminal step's diag reward part is patched with finalize's r_diag.
  RolloutResult rollout(const PolicyParams& params, const CaseRecord& case_record, RunMode mode,
                        std::uint64_t seed) const;

  std::pair<DiagnosticReport, EpisodeTrace> run_case(const PolicyParams& params,
                                                     const CaseRecord& case_record, RunMode mode,
                                                     std::uint64_t seed) const;

  // Fixed action sequence instead of a policy (the scripted oracle).
  RolloutResult run_scripted(const CaseRecord& case_record, const std::vector<Action>& actions) const;

  // The 8 scoreable tasks (the six GAPP components plus the two syndrome
  // genes), one call each, in fixed order.
  static std::vector<Action> oracle_action_sequence();

  EvalMetrics evaluate(const PolicyParams& params, const std::vector<CaseRecord>& corpus,
                       RunMode mode, std::uint64_t seed) const;

  const SwarmEnv& env() const { return env_; }
  const KnowledgeGraph& graph() const { return graph_; }
  const OrchestratorConfig& config() const { return config_; }

 private:
  RolloutResult finish_rollout(EnvState state, EpisodeTrace trace, Trajectory trajectory) const;

  OrchestratorConfig config_;
  KnowledgeGraph graph_;
  SwarmEnv env_;
};

// Independent metric helpers (shared with tests and the acceptance suite).
// Macro-F1 skips classes with no support on either side.
double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                const std::vector<int>& classes);
double mean_absolute_error(const std::vector<double>& predicted, const std::vector<double>& truth);

}  // namespace ppgl
