#include "ppgl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppgl/numeric.hpp"
#include "ppgl/rng.hpp"

namespace ppgl {

using nlohmann::json;

Orchestrator::Orchestrator(OrchestratorConfig config, KnowledgeGraph graph)
    : config_(std::move(config)),
      graph_(std::move(graph)),
      env_(config_.noise, config_.reward, config_.rubric, config_.max_steps) {
  if (!(config_.alert_threshold > 0.0 && config_.alert_threshold < 1.0))
    throw std::invalid_argument("orchestrator: alert_threshold must be in (0,1)");
}

Eigen::VectorXd Orchestrator::featurize(const EnvState& state) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  for (const SubTask task : state.answered) f(static_cast<int>(task)) = 1.0;
  f(10) = static_cast<double>(state.step_index) / static_cast<double>(config_.max_steps);

  // Latest successful observation per task, summarized into fixed slots.
  for (const TrailEntry& entry : state.history) {
    const Observation& obs = entry.observation;
    if (obs.is_error() || obs.is_report_request()) continue;
    switch (obs.task) {
      case SubTask::HistPattern:
        f.segment(11, 3).setZero();
        f(11 + static_cast<int>(std::get<HistologicPattern>(obs.payload))) = 1.0;
        break;
      case SubTask::Necrosis:
        f(14) = std::get<bool>(obs.payload) ? 1.0 : 0.0;
        break;
      case SubTask::Invasion:
        f(15) = std::get<bool>(obs.payload) ? 1.0 : 0.0;
        break;
      case SubTask::Cellularity:
        f(16) = std::min(std::get<double>(obs.payload) / 400.0, 1.0);
        break;
      case SubTask::Ki67:
        f(17) = std::min(std::get<double>(obs.payload) / 10.0, 1.0);
        break;
      case SubTask::MutConfSDHB:
        f(18) = std::get<double>(obs.payload);
        break;
      case SubTask::MutConfVHL:
        f(19) = std::get<double>(obs.payload);
        break;
      case SubTask::MutConfRET:
        f(20) = std::get<double>(obs.payload);
        break;
      case SubTask::CatecholaminePhenotype:
        f.segment(21, 3).setZero();
        f(21 + static_cast<int>(std::get<CatecholamineType>(obs.payload))) = 1.0;
        break;
      case SubTask::LabSummary:
        f(24) = 1.0;
        break;
    }
  }
  f(25) = 1.0;  // bias
  return f;
}

RolloutResult Orchestrator::finish_rollout(EnvState state, EpisodeTrace trace,
                                           Trajectory trajectory) const {
  DiagnosticReport report = assemble_report(state.case_record.case_id, state.history,
                                            config_.rubric, graph_, config_.alert_threshold);
  check_report_invariants(report, config_.rubric);
  const double r_diag = env_.finalize(state, report);

  trace.r_diag = r_diag;
  trace.forced_terminal = state.forced_terminal;
  if (!trace.steps.empty()) {
    trace.steps.back().reward.diag += r_diag;
    if (!trajectory.steps.empty()) trajectory.steps.back().reward += r_diag;
  }

  RolloutResult result;
  result.report = std::move(report);
  result.trace = std::move(trace);
  result.trajectory = std::move(trajectory);
  result.r_diag = r_diag;
  return result;
}

RolloutResult Orchestrator::rollout(const PolicyParams& params, const CaseRecord& case_record,
                                    RunMode mode, std::uint64_t seed) const {
  validate(params);
  if (params.feature_dim != kFeatureDim || params.action_count != kActionCount)
    throw std::invalid_argument("rollout: policy shape does not match the environment");

  Rng action_rng(derive_seed(seed, 0xAC7101ULL));
  EnvState state = env_.initial_state(case_record);
  EpisodeTrace trace;
  trace.case_id = case_record.case_id;
  trace.case_seed = case_record.seed;
  Trajectory trajectory;

  while (!state.done) {
    const Eigen::VectorXd features = featurize(state);
    const Eigen::VectorXd probs = policy_distribution(params, features);

    int action_idx = 0;
    if (mode == RunMode::Greedy) {
      for (int a = 1; a < kActionCount; ++a)
        if (probs(a) > probs(action_idx)) action_idx = a;
    } else {
      std::vector<double> weights(probs.data(), probs.data() + probs.size());
      action_idx = static_cast<int>(action_rng.categorical(weights));
    }

    const Action action = action_from_index(action_idx);
    StepResult result = env_.step(state, action);

    TrajectoryStep step;
    step.features = features;
    step.action = action_idx;
    step.reward = result.reward.total();
    step.log_prob = std::log(probs(action_idx));
    step.value_estimate = params.value_weights.dot(features);
    trajectory.steps.push_back(std::move(step));

    const bool malformed = !action.emit_report && task_swarm(action.task) != action.swarm;
    const bool redundant = !action.emit_report && !malformed && state.answered.count(action.task) > 0;
    trace.steps.push_back(TraceStep{result.state.history.back(), result.reward});
    if (malformed) ++trajectory.malformed_calls;
    if (redundant) ++trajectory.redundant_calls;
    if (!action.emit_report) ++trajectory.tool_calls;

    state = std::move(result.state);
  }
  return finish_rollout(std::move(state), std::move(trace), std::move(trajectory));
}

std::pair<DiagnosticReport, EpisodeTrace> Orchestrator::run_case(const PolicyParams& params,
                                                                 const CaseRecord& case_record,
                                                                 RunMode mode,
                                                                 std::uint64_t seed) const {
  RolloutResult result = rollout(params, case_record, mode, seed);
  return {std::move(result.report), std::move(result.trace)};
}

RolloutResult Orchestrator::run_scripted(const CaseRecord& case_record,
                                         const std::vector<Action>& actions) const {
  EnvState state = env_.initial_state(case_record);
  EpisodeTrace trace;
  trace.case_id = case_record.case_id;
  trace.case_seed = case_record.seed;
  Trajectory trajectory;

  for (const Action& action : actions) {
    if (state.done) break;
    StepResult result = env_.step(state, action);
    TrajectoryStep step;
    step.features = featurize(state);
    step.action = action_index(action);
    step.reward = result.reward.total();
    trajectory.steps.push_back(std::move(step));
    const bool malformed = !action.emit_report && task_swarm(action.task) != action.swarm;
    const bool redundant = !action.emit_report && !malformed && state.answered.count(action.task) > 0;
    trace.steps.push_back(TraceStep{result.state.history.back(), result.reward});
    if (malformed) ++trajectory.malformed_calls;
    if (redundant) ++trajectory.redundant_calls;
    if (!action.emit_report) ++trajectory.tool_calls;
    state = std::move(result.state);
  }
  if (!state.done)
    throw std::invalid_argument("run_scripted: action sequence did not terminate the episode");
  return finish_rollout(std::move(state), std::move(trace), std::move(trajectory));
}

std::vector<Action> Orchestrator::oracle_action_sequence() {
  std::vector<Action> actions;
  for (const SubTask task : {SubTask::HistPattern, SubTask::Cellularity, SubTask::Necrosis,
                             SubTask::Invasion, SubTask::Ki67, SubTask::CatecholaminePhenotype,
                             SubTask::MutConfVHL, SubTask::MutConfRET})
    actions.push_back(Action::call(task_swarm(task), task));
  actions.push_back(Action::emit());
  return actions;
}

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                const std::vector<int>& classes) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw std::invalid_argument("macro_f1: aligned nonempty lists required");
  KahanSum f1_sum;
  int counted = 0;
  for (const int cls : classes) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool p = predicted[i] == cls;
      const bool t = truth[i] == cls;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
    if (tp + fp + fn == 0) continue;  // class absent everywhere
    f1_sum.add(2.0 * tp / static_cast<double>(2 * tp + fp + fn));
    ++counted;
  }
  return counted > 0 ? f1_sum.value() / counted : 0.0;
}

double mean_absolute_error(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw std::invalid_argument("mean_absolute_error: aligned nonempty lists required");
  KahanSum sum;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum.add(std::abs(predicted[i] - truth[i]));
  return sum.value() / static_cast<double>(predicted.size());
}

EvalMetrics Orchestrator::evaluate(const PolicyParams& params, const std::vector<CaseRecord>& corpus,
                                   RunMode mode, std::uint64_t seed) const {
  if (corpus.empty()) throw std::invalid_argument("evaluate: corpus must be nonempty");

  EvalMetrics m;
  m.episodes = static_cast<int>(corpus.size());

  std::vector<GappScore> predicted_scores, truth_scores;
  std::vector<int> pattern_pred, pattern_truth;
  std::vector<int> necrosis_pred, necrosis_truth;
  std::vector<int> invasion_pred, invasion_truth;
  std::vector<double> cell_pred, cell_truth, ki_pred, ki_truth;
  std::vector<int> mut_pred[3], mut_truth[3];

  KahanSum reward_sum, length_sum, tool_call_sum;
  long long malformed = 0, redundant = 0, total_steps = 0;

  constexpr int kNotAssessed = -1;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CaseRecord& rec = corpus[i];
    const RolloutResult result = rollout(params, rec, mode, derive_seed(seed, i));

    predicted_scores.push_back(result.report.gapp_score);
    truth_scores.push_back(score_components(rec.truth, config_.rubric));

    const ReportedFindings& f = result.report.component_findings;
    pattern_pred.push_back(f.histologic_pattern ? static_cast<int>(*f.histologic_pattern) : kNotAssessed);
    pattern_truth.push_back(static_cast<int>(rec.truth.histologic_pattern));
    necrosis_pred.push_back(f.comedo_necrosis ? (*f.comedo_necrosis ? 1 : 0) : kNotAssessed);
    necrosis_truth.push_back(rec.truth.comedo_necrosis ? 1 : 0);
    invasion_pred.push_back(f.vascular_capsular_invasion ? (*f.vascular_capsular_invasion ? 1 : 0)
                                                         : kNotAssessed);
    invasion_truth.push_back(rec.truth.vascular_capsular_invasion ? 1 : 0);
    if (f.cellularity_cells_per_unit) {
      cell_pred.push_back(*f.cellularity_cells_per_unit);
      cell_truth.push_back(rec.truth.cellularity_cells_per_unit);
    }
    if (f.ki67_percent) {
      ki_pred.push_back(*f.ki67_percent);
      ki_truth.push_back(rec.truth.ki67_percent);
    }

    const bool truth_flags[3] = {rec.genotype.sdhb, rec.genotype.vhl, rec.genotype.ret};
    const char* genes[3] = {"SDHB", "VHL", "RET"};
    for (int g = 0; g < 3; ++g) {
      const auto it = result.report.mutation_confidences.find(genes[g]);
      const bool positive = it != result.report.mutation_confidences.end() &&
                            it->second >= config_.alert_threshold;
      mut_pred[g].push_back(positive ? 1 : 0);
      mut_truth[g].push_back(truth_flags[g] ? 1 : 0);
    }

    std::vector<double> rewards;
    rewards.reserve(result.trajectory.steps.size());
    for (const TrajectoryStep& s : result.trajectory.steps) rewards.push_back(s.reward);
    reward_sum.add(discounted_returns(rewards, config_.reward.gamma).front());
    length_sum.add(static_cast<double>(result.trace.steps.size()));
    tool_call_sum.add(static_cast<double>(result.trace.tool_calls()));
    malformed += result.trace.malformed_calls();
    redundant += result.trace.redundant_calls();
    total_steps += static_cast<long long>(result.trace.steps.size());
  }

  m.gapp_total_mae = gapp_total_mae(predicted_scores, truth_scores);
  m.pattern_f1 = macro_f1(pattern_pred, pattern_truth, {0, 1, 2});
  m.necrosis_f1 = macro_f1(necrosis_pred, necrosis_truth, {0, 1});
  m.invasion_f1 = macro_f1(invasion_pred, invasion_truth, {0, 1});
  if (!cell_pred.empty()) {
    m.cellularity_mae = mean_absolute_error(cell_pred, cell_truth);
    m.cellularity_r = pearson_r(cell_pred, cell_truth);
  }
  if (!ki_pred.empty()) {
    m.ki67_mae = mean_absolute_error(ki_pred, ki_truth);
    m.ki67_r = pearson_r(ki_pred, ki_truth);
  }
  KahanSum mut_f1;
  for (int g = 0; g < 3; ++g) mut_f1.add(macro_f1(mut_pred[g], mut_truth[g], {0, 1}));
  m.mutation_f1 = mut_f1.value() / 3.0;
  m.mean_reward = reward_sum.value() / static_cast<double>(corpus.size());
  m.mean_length = length_sum.value() / static_cast<double>(corpus.size());
  m.mean_tool_calls = tool_call_sum.value() / static_cast<double>(corpus.size());
  m.malformed_rate = total_steps > 0 ? static_cast<double>(malformed) / total_steps : 0.0;
  m.redundancy_rate = total_steps > 0 ? static_cast<double>(redundant) / total_steps : 0.0;
  return m;
}

json to_json(const EvalMetrics& m) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  return json{{"episodes", m.episodes},
              {"gapp_total_mae", m.gapp_total_mae},
              {"pattern_f1", m.pattern_f1},
              {"necrosis_f1", m.necrosis_f1},
              {"invasion_f1", m.invasion_f1},
              {"cellularity_mae", opt(m.cellularity_mae)},
              {"cellularity_r", opt(m.cellularity_r)},
              {"ki67_mae", opt(m.ki67_mae)},
              {"ki67_r", opt(m.ki67_r)},
              {"mutation_f1", m.mutation_f1},
              {"mean_reward", m.mean_reward},
              {"mean_length", m.mean_length},
              {"mean_tool_calls", m.mean_tool_calls},
              {"malformed_rate", m.malformed_rate},
              {"redundancy_rate", m.redundancy_rate}};
}

}  // namespace ppgl
