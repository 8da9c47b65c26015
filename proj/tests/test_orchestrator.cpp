#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "ppgl/orchestrator.hpp"
#include "ppgl/rng.hpp"
#include "ppgl/trainer.hpp"

using namespace ppgl;

namespace {

Orchestrator make_orchestrator(NoiseConfig noise = NoiseConfig{}) {
  OrchestratorConfig config;
  config.noise = noise;
  config.rubric = default_rubric();
  return Orchestrator(std::move(config), default_graph());
}

// Hand-crafted linear policy: greedily query every unanswered valid task,
// then emit. Malformed actions are suppressed through the bias weight.
PolicyParams expert_policy() {
  PolicyParams p = PolicyParams::zeros(Orchestrator::kFeatureDim, kActionCount);
  const int bias = Orchestrator::kFeatureDim - 1;
  for (int a = 0; a < kActionCount - 1; ++a) p.weights(a, bias) = -100.0;
  for (int t = 0; t < kSubTaskCount; ++t) {
    const SubTask task = static_cast<SubTask>(t);
    const int a = action_index(Action::call(task_swarm(task), task));
    p.weights(a, bias) = 20.0;
    p.weights(a, t) = -100.0;  // answered-task feature suppresses repeats
  }
  p.weights(kActionCount - 1, bias) = 0.0;  // emit wins once calls drop to -80
  return p;
}

PolicyParams emit_only_policy() {
  PolicyParams p = PolicyParams::zeros(Orchestrator::kFeatureDim, kActionCount);
  p.weights(kActionCount - 1, Orchestrator::kFeatureDim - 1) = 50.0;
  return p;
}

}  // namespace

TEST_CASE("zero-noise scripted oracle reproduces the truth with r_diag 1") {
  const auto orch = make_orchestrator(NoiseConfig::zero());
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const CaseRecord rec = generate_case(derive_seed(1, seed), GeneratorConfig{});
    const auto result = orch.run_scripted(rec, Orchestrator::oracle_action_sequence());
    CHECK(result.r_diag == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.trace.undiscounted_return() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.trace.malformed_calls() == 0);
    CHECK(result.trace.redundant_calls() == 0);
    const ReportedFindings& f = result.report.component_findings;
    REQUIRE(f.histologic_pattern.has_value());
    CHECK(*f.histologic_pattern == rec.truth.histologic_pattern);
    CHECK(*f.cellularity_cells_per_unit == rec.truth.cellularity_cells_per_unit);
    CHECK(*f.comedo_necrosis == rec.truth.comedo_necrosis);
    CHECK(*f.vascular_capsular_invasion == rec.truth.vascular_capsular_invasion);
    CHECK(*f.ki67_percent == rec.truth.ki67_percent);
    CHECK(*f.catecholamine_type == rec.truth.catecholamine_type);
    // Alert set matches the genotype exactly.
    std::set<Syndrome> predicted;
    for (const auto& alert : result.report.alerts) predicted.insert(alert.syndrome);
    CHECK(predicted == SwarmEnv::true_syndromes(rec.genotype));
  }
}

TEST_CASE("greedy runs are byte-identical") {
  const auto orch = make_orchestrator();
  const CaseRecord rec = generate_case(33, GeneratorConfig{});
  const auto [report_a, trace_a] = orch.run_case(expert_policy(), rec, RunMode::Greedy, 5);
  const auto [report_b, trace_b] = orch.run_case(expert_policy(), rec, RunMode::Greedy, 99);
  CHECK(to_json(report_a).dump() == to_json(report_b).dump());
  CHECK(to_json(trace_a).dump() == to_json(trace_b).dump());
}

TEST_CASE("sampled runs are deterministic in the seed") {
  const auto orch = make_orchestrator();
  const CaseRecord rec = generate_case(34, GeneratorConfig{});
  const PolicyParams uniform = PolicyParams::zeros(Orchestrator::kFeatureDim, kActionCount);
  const auto a = orch.rollout(uniform, rec, RunMode::Sample, 7);
  const auto b = orch.rollout(uniform, rec, RunMode::Sample, 7);
  const auto c = orch.rollout(uniform, rec, RunMode::Sample, 8);
  CHECK(to_json(a.trace).dump() == to_json(b.trace).dump());
  CHECK(to_json(a.trace).dump() != to_json(c.trace).dump());
}

TEST_CASE("immediate emission reports everything as not assessed") {
  const auto orch = make_orchestrator();
  const CaseRecord rec = generate_case(35, GeneratorConfig{});
  const auto result = orch.rollout(emit_only_policy(), rec, RunMode::Greedy, 0);
  CHECK(result.r_diag == 0.0);
  CHECK(result.trace.steps.size() == 1);
  const ReportedFindings& f = result.report.component_findings;
  CHECK(!f.histologic_pattern);
  CHECK(!f.cellularity_cells_per_unit);
  CHECK(!f.comedo_necrosis);
  CHECK(!f.vascular_capsular_invasion);
  CHECK(!f.ki67_percent);
  CHECK(!f.catecholamine_type);
  CHECK(result.report.mutation_confidences.empty());
  CHECK(result.report.narrative.find("not assessed") != std::string::npos);
}

TEST_CASE("stored log probabilities agree with the distribution") {
  const auto orch = make_orchestrator();
  const CaseRecord rec = generate_case(36, GeneratorConfig{});
  PolicyParams p = expert_policy();
  const auto result = orch.rollout(p, rec, RunMode::Sample, 21);
  // Replay features through the policy and compare.
  for (const TrajectoryStep& step : result.trajectory.steps) {
    const auto probs = policy_distribution(p, step.features);
    CHECK(std::abs(std::exp(step.log_prob) - probs(step.action)) < 1e-12);
  }
}

TEST_CASE("latest observation wins when a task is queried twice") {
  const auto orch = make_orchestrator();  // nonzero noise: repeats differ
  const CaseRecord rec = generate_case(37, GeneratorConfig{});
  std::vector<Action> actions{Action::call(Swarm::WSI, SubTask::Ki67),
                              Action::call(Swarm::WSI, SubTask::Ki67), Action::emit()};
  const auto result = orch.run_scripted(rec, actions);
  const double second =
      std::get<double>(result.trace.steps[1].entry.observation.payload);
  REQUIRE(result.report.component_findings.ki67_percent.has_value());
  CHECK(*result.report.component_findings.ki67_percent == second);
  CHECK(result.trace.redundant_calls() == 1);
}

TEST_CASE("report invariant checker rejects tampering") {
  const auto orch = make_orchestrator(NoiseConfig::zero());
  const CaseRecord rec = generate_case(38, GeneratorConfig{});
  auto result = orch.run_scripted(rec, Orchestrator::oracle_action_sequence());
  check_report_invariants(result.report, orch.config().rubric);  // intact passes
  auto tampered = result.report;
  tampered.component_findings.ki67_percent = *tampered.component_findings.ki67_percent + 10.0;
  tampered.gapp_score = score_reported(tampered.component_findings, orch.config().rubric);
  CHECK_THROWS_AS(check_report_invariants(tampered, orch.config().rubric), std::logic_error);
  auto bad_score = result.report;
  bad_score.gapp_score.total += 1;
  CHECK_THROWS_AS(check_report_invariants(bad_score, orch.config().rubric), std::logic_error);
}

TEST_CASE("forced termination still produces a scored report") {
  OrchestratorConfig config;
  config.noise = NoiseConfig::zero();
  config.rubric = default_rubric();
  config.max_steps = 3;
  const Orchestrator orch(std::move(config), default_graph());
  const CaseRecord rec = generate_case(39, GeneratorConfig{});
  // Never emits; the budget forces done after three useful calls.
  PolicyParams p = PolicyParams::zeros(Orchestrator::kFeatureDim, kActionCount);
  const int bias = Orchestrator::kFeatureDim - 1;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::HistPattern)), bias) = 10.0;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::HistPattern)), 0) = -20.0;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::Necrosis)), bias) = 9.0;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::Necrosis)), 1) = -20.0;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::Invasion)), bias) = 8.0;
  p.weights(action_index(Action::call(Swarm::WSI, SubTask::Invasion)), 2) = -20.0;
  const auto result = orch.rollout(p, rec, RunMode::Greedy, 0);
  CHECK(result.trace.forced_terminal);
  CHECK(result.trace.steps.size() == 3);
  // Three zero-noise components assessed and correct: 3 * 0.125.
  CHECK(result.r_diag == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("evaluate is exact when predictions equal the truth") {
  const auto orch = make_orchestrator(NoiseConfig::zero());
  std::vector<CaseRecord> corpus;
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    corpus.push_back(generate_case(derive_seed(5, seed), GeneratorConfig{}));
  const auto metrics = orch.evaluate(expert_policy(), corpus, RunMode::Greedy, 0);
  CHECK(metrics.gapp_total_mae == 0.0);
  CHECK(metrics.pattern_f1 == doctest::Approx(1.0));
  CHECK(metrics.necrosis_f1 == doctest::Approx(1.0));
  CHECK(metrics.invasion_f1 == doctest::Approx(1.0));
  REQUIRE(metrics.cellularity_mae.has_value());
  CHECK(*metrics.cellularity_mae == 0.0);
  REQUIRE(metrics.cellularity_r.has_value());
  CHECK(*metrics.cellularity_r == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(metrics.ki67_r.has_value());
  CHECK(*metrics.ki67_r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics.mutation_f1 == doctest::Approx(1.0));
  CHECK(metrics.malformed_rate == 0.0);
  CHECK(metrics.redundancy_rate == 0.0);
}

TEST_CASE("constant prediction and truth yield a null Pearson r") {
  const auto orch = make_orchestrator(NoiseConfig::zero());
  const CaseRecord base = generate_case(77, GeneratorConfig{});
  std::vector<CaseRecord> corpus;
  for (int i = 0; i < 5; ++i) {
    CaseRecord copy = base;
    copy.case_id = base.case_id + "-" + std::to_string(i);
    corpus.push_back(copy);
  }
  const auto metrics = orch.evaluate(expert_policy(), corpus, RunMode::Greedy, 0);
  CHECK(!metrics.cellularity_r.has_value());  // zero variance on both sides
  CHECK(metrics.gapp_total_mae == 0.0);
  const nlohmann::json j = to_json(metrics);
  CHECK(j.at("cellularity_r").is_null());
}

TEST_CASE("macro F1 matches a naive oracle on random labels") {
  Rng rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 30;
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.uniform_index(3));
      truth[i] = static_cast<int>(rng.uniform_index(3));
    }
    double naive = 0.0;
    int used = 0;
    for (int cls = 0; cls < 3; ++cls) {
      int tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < n; ++i) {
        if (pred[i] == cls && truth[i] == cls) ++tp;
        if (pred[i] == cls && truth[i] != cls) ++fp;
        if (pred[i] != cls && truth[i] == cls) ++fn;
      }
      if (tp + fp + fn == 0) continue;
      naive += (2.0 * tp) / (2.0 * tp + fp + fn);
      ++used;
    }
    naive /= used;
    CHECK(std::abs(macro_f1(pred, truth, {0, 1, 2}) - naive) < 1e-12);
  }
}

TEST_CASE("mean absolute error matches a naive oracle") {
  Rng rng(89);
  std::vector<double> a(40), b(40);
  double naive = 0.0;
  for (int i = 0; i < 40; ++i) {
    a[i] = rng.normal(0, 5);
    b[i] = rng.normal(0, 5);
    naive += std::abs(a[i] - b[i]);
  }
  naive /= 40.0;
  CHECK(std::abs(mean_absolute_error(a, b) - naive) < 1e-12);
}

TEST_CASE("evaluate rejects an empty corpus") {
  const auto orch = make_orchestrator();
  CHECK_THROWS_AS(orch.evaluate(expert_policy(), {}, RunMode::Greedy, 0), std::invalid_argument);
}

TEST_CASE("zero training iterations return the initial params unchanged") {
  const auto orch = make_orchestrator();
  const auto corpus = generate_corpus(3, 8, GeneratorConfig{});
  TrainConfig config;
  config.iterations = 0;
  const TrainResult result = train(orch, corpus, config);
  CHECK(result.curve.empty());
  CHECK(result.params.weights.cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.params.value_weights.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is bit-deterministic in the seed") {
  const auto orch = make_orchestrator();
  const auto corpus = generate_corpus(3, 16, GeneratorConfig{});
  TrainConfig config;
  config.iterations = 10;
  config.seed = 77;
  const TrainResult a = train(orch, corpus, config);
  const TrainResult b = train(orch, corpus, config);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i)
    CHECK(to_json(a.curve[i]).dump() == to_json(b.curve[i]).dump());
  CHECK((a.params.weights - b.params.weights).cwiseAbs().maxCoeff() == 0.0);

  config.seed = 78;
  const TrainResult c = train(orch, corpus, config);
  CHECK((a.params.weights - c.params.weights).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training on an empty corpus is rejected") {
  const auto orch = make_orchestrator();
  CHECK_THROWS_AS(train(orch, {}, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("narrative has the fixed section order and evidence refs") {
  const auto orch = make_orchestrator(NoiseConfig::zero());
  const CaseRecord rec = generate_case(40, GeneratorConfig{});
  const auto result = orch.run_scripted(rec, Orchestrator::oracle_action_sequence());
  const std::string& n = result.report.narrative;
  const auto findings = n.find("== Findings ==");
  const auto gapp = n.find("== GAPP ==");
  const auto risk = n.find("== Genotype Risk ==");
  const auto alerts = n.find("== Alerts ==");
  const auto evidence = n.find("== Evidence ==");
  REQUIRE(findings != std::string::npos);
  CHECK(findings < gapp);
  CHECK(gapp < risk);
  CHECK(risk < alerts);
  CHECK(alerts < evidence);
  CHECK(n.find("[evidence #") != std::string::npos);
}
