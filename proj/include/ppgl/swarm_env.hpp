#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppgl/case_model.hpp"
#include "ppgl/gapp.hpp"
#include "ppgl/report.hpp"
#include "ppgl/swarm_types.hpp"

namespace ppgl {

// Synthetic cohort generator knobs. Genotype priors default to the reported
// germline prevalences; coupling biases VHL cases toward norepinephrine-type
// labs and RET cases toward epinephrine-type labs.
struct GeneratorConfig {
  double sdhb_prior = 0.10;
  double vhl_prior = 0.073;
  double ret_prior = 0.063;
  double genotype_phenotype_coupling = 0.8;  // 1.0 forces the syndromic phenotype
  std::array<double, 3> pattern_prior{0.5, 0.3, 0.2};  // zellballen, nests, pseudorosette
  double necrosis_prob = 0.30;
  double invasion_prob = 0.35;
  double cellularity_min = 50.0, cellularity_max = 350.0;
  double ki67_min = 0.0, ki67_max = 8.0;
  std::array<double, 3> phenotype_prior{0.35, 0.40, 0.25};  // epi, norepi, non-functioning
};

// Observation noise. Zero noise means classifications are exact, regressions
// exact, and mutation confidences collapse to 0/1 indicators.
struct NoiseConfig {
  double p_classification_error = 0.1;
  double cellularity_sigma = 15.0;
  double ki67_sigma = 0.5;
  double conf_present_alpha = 8.0, conf_present_beta = 2.0;
  double conf_absent_alpha = 2.0, conf_absent_beta = 8.0;
  bool deterministic_confidences = false;

  static NoiseConfig zero();
};

// Reward shaping weights plus the terminal diagnostic weighting. Component
// weights and the alert weight must sum to 1.
struct RewardConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.2;
  double gamma = 0.95;
  std::array<double, 6> component_weights{0.125, 0.125, 0.125, 0.125, 0.125, 0.125};
  double alert_weight = 0.25;
};

void validate(const GeneratorConfig& config);
void validate(const NoiseConfig& config);
void validate(const RewardConfig& config);

GeneratorConfig generator_config_from_json(const nlohmann::json& j);
NoiseConfig noise_config_from_json(const nlohmann::json& j);
RewardConfig reward_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorConfig& config);
nlohmann::json to_json(const NoiseConfig& config);
nlohmann::json to_json(const RewardConfig& config);

// Deterministic in (seed, config); all case randomness derives from seed.
CaseRecord generate_case(std::uint64_t seed, const GeneratorConfig& config);
std::vector<CaseRecord> generate_corpus(std::uint64_t master_seed, int count,
                                        const GeneratorConfig& config);

// One rollout's mutable state; owned by a single episode.
struct EnvState {
  CaseRecord case_record;
  std::set<SubTask> answered;  // tasks with a successful observation
  std::vector<TrailEntry> history;
  std::array<int, kSubTaskCount> query_counts{};  // successful queries per task
  int step_index = 0;
  bool done = false;
  bool forced_terminal = false;  // done was forced by the step budget
};

struct StepResult {
  EnvState state;
  RewardParts reward;
  Observation observation;
};

// The MDP environment: noisy micro-task answers with a decomposed step
// reward. The terminal diagnostic reward is granted by finalize once the
// orchestrator passes the assembled report back.
class SwarmEnv {
 public:
  SwarmEnv(NoiseConfig noise, RewardConfig reward, GappRubric rubric, int max_steps = 20);

  EnvState initial_state(const CaseRecord& case_record) const;

  // Throws std::logic_error when called on a done state.
  StepResult step(const EnvState& state, const Action& action) const;

  // Weighted diagnostic correctness in [0,1]: six per-component point
  // matches plus alert-set correctness. Unassessed sections contribute 0.
  double finalize(const EnvState& state, const DiagnosticReport& report) const;

  const RewardConfig& reward_config() const { return reward_; }
  const NoiseConfig& noise_config() const { return noise_; }
  const GappRubric& rubric() const { return rubric_; }
  int max_steps() const { return max_steps_; }

  // True syndrome set implied by a genotype (SDHB raises no syndrome alert).
  static std::set<Syndrome> true_syndromes(const GenotypeProfile& genotype);

 private:
  Observation observe(const CaseRecord& case_record, SubTask task, int occurrence) const;

  NoiseConfig noise_;
  RewardConfig reward_;
  GappRubric rubric_;
  int max_steps_;
};

struct TraceStep {
  TrailEntry entry;
  RewardParts reward;
};

// Auditable record of one episode.
struct EpisodeTrace {
  std::string case_id;
  std::uint64_t case_seed = 0;
  std::vector<TraceStep> steps;
  double r_diag = 0.0;
  bool forced_terminal = false;

  double undiscounted_return() const;
  int tool_calls() const;       // non-emit actions
  int malformed_calls() const;  // steps with a format penalty
  int redundant_calls() const;  // steps with a redundancy penalty
};

nlohmann::json to_json(const EpisodeTrace& trace);

}  // namespace ppgl
