#include "ppgl/swarm_env.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppgl/rng.hpp"

namespace ppgl {

using nlohmann::json;

NoiseConfig NoiseConfig::zero() {
  NoiseConfig c;
  c.p_classification_error = 0.0;
  c.cellularity_sigma = 0.0;
  c.ki67_sigma = 0.0;
  c.deterministic_confidences = true;
  return c;
}

void validate(const GeneratorConfig& c) {
  const double genotype_sum = c.sdhb_prior + c.vhl_prior + c.ret_prior;
  if (c.sdhb_prior < 0 || c.vhl_prior < 0 || c.ret_prior < 0 || genotype_sum > 1.0)
    throw std::invalid_argument("generator config: genotype priors must be >= 0 and sum to <= 1");
  if (!(c.genotype_phenotype_coupling >= 0.0 && c.genotype_phenotype_coupling <= 1.0))
    throw std::invalid_argument("generator config: coupling must be in [0,1]");
  double pattern_sum = 0.0, phenotype_sum = 0.0;
  for (double p : c.pattern_prior) {
    if (p < 0) throw std::invalid_argument("generator config: pattern prior entries must be >= 0");
    pattern_sum += p;
  }
  for (double p : c.phenotype_prior) {
    if (p < 0) throw std::invalid_argument("generator config: phenotype prior entries must be >= 0");
    phenotype_sum += p;
  }
  if (std::abs(pattern_sum - 1.0) > 1e-9 || std::abs(phenotype_sum - 1.0) > 1e-9)
    throw std::invalid_argument("generator config: priors must sum to 1");
  if (!(c.necrosis_prob >= 0 && c.necrosis_prob <= 1 && c.invasion_prob >= 0 && c.invasion_prob <= 1))
    throw std::invalid_argument("generator config: probabilities must be in [0,1]");
  if (!(c.cellularity_min >= 0 && c.cellularity_min < c.cellularity_max))
    throw std::invalid_argument("generator config: cellularity range invalid");
  if (!(c.ki67_min >= 0 && c.ki67_min < c.ki67_max && c.ki67_max <= 100))
    throw std::invalid_argument("generator config: ki67 range invalid");
}

void validate(const NoiseConfig& c) {
  if (!(c.p_classification_error >= 0 && c.p_classification_error <= 1))
    throw std::invalid_argument("noise config: p_classification_error must be in [0,1]");
  if (c.cellularity_sigma < 0 || c.ki67_sigma < 0)
    throw std::invalid_argument("noise config: sigmas must be >= 0");
  if (c.conf_present_alpha <= 0 || c.conf_present_beta <= 0 || c.conf_absent_alpha <= 0 ||
      c.conf_absent_beta <= 0)
    throw std::invalid_argument("noise config: beta parameters must be positive");
}

void validate(const RewardConfig& c) {
  if (c.lambda1 < 0 || c.lambda2 < 0)
    throw std::invalid_argument("reward config: lambda1 and lambda2 must be >= 0");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0))
    throw std::invalid_argument("reward config: gamma must be in [0,1]");
  double sum = c.alert_weight;
  if (c.alert_weight < 0) throw std::invalid_argument("reward config: alert_weight must be >= 0");
  for (double w : c.component_weights) {
    if (w < 0) throw std::invalid_argument("reward config: component weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("reward config: diagnostic weights must sum to 1");
}

namespace {

template <typename T, std::size_t N>
std::array<T, N> array_from_json(const json& j, const char* field, const std::array<T, N>& fallback) {
  if (!j.contains(field)) return fallback;
  const auto v = j.at(field).get<std::vector<T>>();
  if (v.size() != N)
    throw std::invalid_argument(std::string("config: ") + field + " must have " +
                                std::to_string(N) + " entries");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  c.sdhb_prior = j.value("sdhb_prior", c.sdhb_prior);
  c.vhl_prior = j.value("vhl_prior", c.vhl_prior);
  c.ret_prior = j.value("ret_prior", c.ret_prior);
  c.genotype_phenotype_coupling = j.value("genotype_phenotype_coupling", c.genotype_phenotype_coupling);
  c.pattern_prior = array_from_json(j, "pattern_prior", c.pattern_prior);
  c.necrosis_prob = j.value("necrosis_prob", c.necrosis_prob);
  c.invasion_prob = j.value("invasion_prob", c.invasion_prob);
  c.cellularity_min = j.value("cellularity_min", c.cellularity_min);
  c.cellularity_max = j.value("cellularity_max", c.cellularity_max);
  c.ki67_min = j.value("ki67_min", c.ki67_min);
  c.ki67_max = j.value("ki67_max", c.ki67_max);
  c.phenotype_prior = array_from_json(j, "phenotype_prior", c.phenotype_prior);
  validate(c);
  return c;
}

NoiseConfig noise_config_from_json(const json& j) {
  NoiseConfig c;
  c.p_classification_error = j.value("p_classification_error", c.p_classification_error);
  c.cellularity_sigma = j.value("cellularity_sigma", c.cellularity_sigma);
  c.ki67_sigma = j.value("ki67_sigma", c.ki67_sigma);
  c.conf_present_alpha = j.value("conf_present_alpha", c.conf_present_alpha);
  c.conf_present_beta = j.value("conf_present_beta", c.conf_present_beta);
  c.conf_absent_alpha = j.value("conf_absent_alpha", c.conf_absent_alpha);
  c.conf_absent_beta = j.value("conf_absent_beta", c.conf_absent_beta);
  c.deterministic_confidences = j.value("deterministic_confidences", c.deterministic_confidences);
  validate(c);
  return c;
}

RewardConfig reward_config_from_json(const json& j) {
  RewardConfig c;
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.lambda2 = j.value("lambda2", c.lambda2);
  c.gamma = j.value("gamma", c.gamma);
  c.component_weights = array_from_json(j, "component_weights", c.component_weights);
  c.alert_weight = j.value("alert_weight", c.alert_weight);
  validate(c);
  return c;
}

json to_json(const GeneratorConfig& c) {
  return json{{"sdhb_prior", c.sdhb_prior},
              {"vhl_prior", c.vhl_prior},
              {"ret_prior", c.ret_prior},
              {"genotype_phenotype_coupling", c.genotype_phenotype_coupling},
              {"pattern_prior", c.pattern_prior},
              {"necrosis_prob", c.necrosis_prob},
              {"invasion_prob", c.invasion_prob},
              {"cellularity_min", c.cellularity_min},
              {"cellularity_max", c.cellularity_max},
              {"ki67_min", c.ki67_min},
              {"ki67_max", c.ki67_max},
              {"phenotype_prior", c.phenotype_prior}};
}

json to_json(const NoiseConfig& c) {
  return json{{"p_classification_error", c.p_classification_error},
              {"cellularity_sigma", c.cellularity_sigma},
              {"ki67_sigma", c.ki67_sigma},
              {"conf_present_alpha", c.conf_present_alpha},
              {"conf_present_beta", c.conf_present_beta},
              {"conf_absent_alpha", c.conf_absent_alpha},
              {"conf_absent_beta", c.conf_absent_beta},
              {"deterministic_confidences", c.deterministic_confidences}};
}

json to_json(const RewardConfig& c) {
  return json{{"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"gamma", c.gamma},
              {"component_weights", c.component_weights},
              {"alert_weight", c.alert_weight}};
}

namespace {

// Per-purpose stream salts within a case seed.
enum CaseStream : std::uint64_t {
  kGenotypeStream = 1,
  kPhenotypeStream = 2,
  kLabStream = 3,
  kPatternStream = 4,
  kCellularityStream = 5,
  kNecrosisStream = 6,
  kInvasionStream = 7,
  kKi67Stream = 8,
  kStainStream = 9,
};

constexpr std::uint64_t kObservationSaltBase = 0x100;

std::string case_id_for_seed(std::uint64_t seed) {
  std::ostringstream id;
  id << "case-" << std::hex << std::setw(16) << std::setfill('0') << seed;
  return id.str();
}

}  // namespace

CaseRecord generate_case(std::uint64_t seed, const GeneratorConfig& config) {
  validate(config);
  CaseRecord rec;
  rec.seed = seed;
  rec.case_id = case_id_for_seed(seed);

  {
    Rng rng(derive_seed(seed, kGenotypeStream));
    const double none = 1.0 - config.sdhb_prior - config.vhl_prior - config.ret_prior;
    const std::array<double, 4> probs{none, config.sdhb_prior, config.vhl_prior, config.ret_prior};
    switch (rng.categorical(probs)) {
      case 1: rec.genotype.sdhb = true; break;
      case 2: rec.genotype.vhl = true; break;
      case 3: rec.genotype.ret = true; break;
      default: break;
    }
  }

  CatecholamineType phenotype;
  {
    Rng rng(derive_seed(seed, kPhenotypeStream));
    const std::size_t base = rng.categorical(config.phenotype_prior);
    const bool couple = rng.bernoulli(config.genotype_phenotype_coupling);
    phenotype = static_cast<CatecholamineType>(base);
    if (rec.genotype.vhl && couple) phenotype = CatecholamineType::NorepinephrineType;
    if (rec.genotype.ret && couple) phenotype = CatecholamineType::EpinephrineType;
  }

  {
    Rng rng(derive_seed(seed, kLabStream));
    switch (phenotype) {
      case CatecholamineType::EpinephrineType:
        rec.labs.metanephrine = rng.uniform(1.2, 4.0);
        rec.labs.normetanephrine = rng.uniform(0.0, 2.0);
        rec.labs.methoxytyramine_3 = rng.uniform(0.0, 1.0);
        break;
      case CatecholamineType::NorepinephrineType:
        rec.labs.metanephrine = rng.uniform(0.0, 1.0);
        rec.labs.normetanephrine = rng.uniform(1.2, 4.0);
        rec.labs.methoxytyramine_3 = rng.uniform(0.0, 1.0);
        break;
      case CatecholamineType::NonFunctioning:
        rec.labs.metanephrine = rng.uniform(0.0, 1.0);
        rec.labs.normetanephrine = rng.uniform(0.0, 1.0);
        rec.labs.methoxytyramine_3 = rng.uniform(0.0, 1.5);  // isolated 3MT elevation possible
        break;
    }
  }
  rec.truth.catecholamine_type = catecholamine_phenotype(rec.labs);

  {
    Rng rng(derive_seed(seed, kPatternStream));
    rec.truth.histologic_pattern = static_cast<HistologicPattern>(rng.categorical(config.pattern_prior));
  }
  {
    Rng rng(derive_seed(seed, kCellularityStream));
    rec.truth.cellularity_cells_per_unit = rng.uniform(config.cellularity_min, config.cellularity_max);
  }
  {
    Rng rng(derive_seed(seed, kNecrosisStream));
    rec.truth.comedo_necrosis = rng.bernoulli(config.necrosis_prob);
  }
  {
    Rng rng(derive_seed(seed, kInvasionStream));
    rec.truth.vascular_capsular_invasion = rng.bernoulli(config.invasion_prob);
  }
  {
    Rng rng(derive_seed(seed, kKi67Stream));
    rec.truth.ki67_percent = rng.uniform(config.ki67_min, config.ki67_max);
  }
  {
    Rng rng(derive_seed(seed, kStainStream));
    rec.stain_shift.mean_l = rng.uniform(45.0, 70.0);
    rec.stain_shift.mean_a = rng.uniform(5.0, 30.0);
    rec.stain_shift.mean_b = rng.uniform(-15.0, 15.0);
    rec.stain_shift.std_l = rng.uniform(4.0, 12.0);
    rec.stain_shift.std_a = rng.uniform(2.0, 8.0);
    rec.stain_shift.std_b = rng.uniform(2.0, 8.0);
  }
  validate(rec);
  return rec;
}

std::vector<CaseRecord> generate_corpus(std::uint64_t master_seed, int count,
                                        const GeneratorConfig& config) {
  if (count < 0) throw std::invalid_argument("generate_corpus: count must be >= 0");
  std::vector<CaseRecord> cases;
  cases.reserve(count);
  for (int i = 0; i < count; ++i)
    cases.push_back(generate_case(derive_seed(master_seed, static_cast<std::uint64_t>(i)), config));
  return cases;
}

SwarmEnv::SwarmEnv(NoiseConfig noise, RewardConfig reward, GappRubric rubric, int max_steps)
    : noise_(noise), reward_(reward), rubric_(std::move(rubric)), max_steps_(max_steps) {
  validate(noise_);
  validate(reward_);
  validate(rubric_);
  if (max_steps_ < 1) throw std::invalid_argument("SwarmEnv: max_steps must be >= 1");
}

EnvState SwarmEnv::initial_state(const CaseRecord& case_record) const {
  validate(case_record);
  EnvState state;
  state.case_record = case_record;
  return state;
}

Observation SwarmEnv::observe(const CaseRecord& rec, SubTask task, int occurrence) const {
  const std::uint64_t noise_seed =
      derive_seed(rec.seed, kObservationSaltBase + static_cast<std::uint64_t>(task) * 1000 +
                                static_cast<std::uint64_t>(occurrence));
  Rng rng(noise_seed);
  Observation obs;
  obs.task = task;
  obs.noise_seed_used = noise_seed;

  // Classification flips pick a uniformly random wrong value.
  const auto flip3 = [&](int truth_index) {
    if (!rng.bernoulli(noise_.p_classification_error)) return truth_index;
    const int offset = 1 + static_cast<int>(rng.uniform_index(2));
    return (truth_index + offset) % 3;
  };

  switch (task) {
    case SubTask::HistPattern:
      obs.payload = static_cast<HistologicPattern>(flip3(static_cast<int>(rec.truth.histologic_pattern)));
      break;
    case SubTask::Necrosis:
      obs.payload = rng.bernoulli(noise_.p_classification_error) ? !rec.truth.comedo_necrosis
                                                                 : rec.truth.comedo_necrosis;
      break;
    case SubTask::Invasion:
      obs.payload = rng.bernoulli(noise_.p_classification_error)
                        ? !rec.truth.vascular_capsular_invasion
                        : rec.truth.vascular_capsular_invasion;
      break;
    case SubTask::Cellularity:
      obs.payload = std::max(0.0, rec.truth.cellularity_cells_per_unit +
                                      (noise_.cellularity_sigma > 0.0
                                           ? rng.normal(0.0, noise_.cellularity_sigma)
                                           : 0.0));
      break;
    case SubTask::Ki67:
      obs.payload = std::clamp(rec.truth.ki67_percent + (noise_.ki67_sigma > 0.0
                                                             ? rng.normal(0.0, noise_.ki67_sigma)
                                                             : 0.0),
                               0.0, 100.0);
      break;
    case SubTask::MutConfSDHB:
    case SubTask::MutConfVHL:
    case SubTask::MutConfRET: {
      const bool present = task == SubTask::MutConfSDHB   ? rec.genotype.sdhb
                           : task == SubTask::MutConfVHL ? rec.genotype.vhl
                                                         : rec.genotype.ret;
      if (noise_.deterministic_confidences) {
        obs.payload = present ? 1.0 : 0.0;
      } else {
        obs.payload = present ? rng.beta(noise_.conf_present_alpha, noise_.conf_present_beta)
                              : rng.beta(noise_.conf_absent_alpha, noise_.conf_absent_beta);
      }
      break;
    }
    case SubTask::CatecholaminePhenotype:
      obs.payload =
          static_cast<CatecholamineType>(flip3(static_cast<int>(rec.truth.catecholamine_type)));
      break;
    case SubTask::LabSummary: {
      std::ostringstream text;
      text << std::fixed << std::setprecision(4) << "MN=" << rec.labs.metanephrine
           << " NMN=" << rec.labs.normetanephrine << " 3MT=" << rec.labs.methoxytyramine_3
           << " (xULN)";
      obs.payload = text.str();
      break;
    }
  }
  return obs;
}

StepResult SwarmEnv::step(const EnvState& state, const Action& action) const {
  if (state.done) throw std::logic_error("SwarmEnv::step: episode is already done");

  StepResult result;
  result.state = state;
  EnvState& next = result.state;
  Observation obs;

  if (action.emit_report) {
    obs.task = SubTask::LabSummary;  // placeholder task; payload identifies the marker
    obs.payload = ReportRequested{};
    next.done = true;
  } else if (task_swarm(action.task) != action.swarm) {
    // Capability mismatch: malformed tool call.
    obs.task = action.task;
    obs.payload = ErrorPayload{"swarm " + to_string(action.swarm) + " cannot answer task " +
                               to_string(action.task)};
    result.reward.format_penalty = -reward_.lambda1;
  } else {
    const bool repeated = state.answered.count(action.task) > 0;
    if (repeated) result.reward.redundancy_penalty = -reward_.lambda2;
    const int occurrence = state.query_counts[static_cast<int>(action.task)];
    obs = observe(state.case_record, action.task, occurrence);
    next.query_counts[static_cast<int>(action.task)] += 1;
    next.answered.insert(action.task);
  }

  next.history.push_back(TrailEntry{state.step_index, action, obs});
  next.step_index = state.step_index + 1;
  if (!next.done && next.step_index >= max_steps_) {
    next.done = true;
    next.forced_terminal = true;
  }
  result.observation = obs;
  return result;
}

std::set<Syndrome> SwarmEnv::true_syndromes(const GenotypeProfile& genotype) {
  std::set<Syndrome> set;
  if (genotype.vhl) set.insert(Syndrome::VHLSyndrome);
  if (genotype.ret) set.insert(Syndrome::MEN2);
  return set;
}

double SwarmEnv::finalize(const EnvState& state, const DiagnosticReport& report) const {
  if (!state.done) throw std::logic_error("SwarmEnv::finalize: episode is not done");

  const GappScore truth = score_components(state.case_record.truth, rubric_);
  const GappScore& predicted = report.gapp_score;
  const ReportedFindings& f = report.component_findings;

  double r_diag = 0.0;
  const auto& w = reward_.component_weights;
  if (f.histologic_pattern && predicted.pattern_points == truth.pattern_points) r_diag += w[0];
  if (f.cellularity_cells_per_unit && predicted.cellularity_points == truth.cellularity_points)
    r_diag += w[1];
  if (f.comedo_necrosis && predicted.necrosis_points == truth.necrosis_points) r_diag += w[2];
  if (f.vascular_capsular_invasion && predicted.invasion_points == truth.invasion_points)
    r_diag += w[3];
  if (f.ki67_percent && predicted.ki67_points == truth.ki67_points) r_diag += w[4];
  if (f.catecholamine_type && predicted.catecholamine_points == truth.catecholamine_points)
    r_diag += w[5];

  // Alert credit requires both syndrome genes to have been assessed; an
  // uninformed empty alert set earns nothing.
  const bool alerts_assessed = report.mutation_confidences.count("VHL") > 0 &&
                               report.mutation_confidences.count("RET") > 0;
  if (alerts_assessed) {
    std::set<Syndrome> predicted_set;
    for (const RiskAlert& alert : report.alerts) predicted_set.insert(alert.syndrome);
    if (predicted_set == true_syndromes(state.case_record.genotype)) r_diag += reward_.alert_weight;
  }
  return r_diag;
}

double EpisodeTrace::undiscounted_return() const {
  double total = 0.0;
  for (const TraceStep& s : steps) total += s.reward.total();
  return total;
}

int EpisodeTrace::tool_calls() const {
  return static_cast<int>(
      std::count_if(steps.begin(), steps.end(), [](const TraceStep& s) { return !s.entry.action.emit_report; }));
}

// Counted from the triggering condition, not the penalty value, so the
// counts stay meaningful under lambda ablations.
int EpisodeTrace::malformed_calls() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const TraceStep& s) {
    return !s.entry.action.emit_report && task_swarm(s.entry.action.task) != s.entry.action.swarm;
  }));
}

int EpisodeTrace::redundant_calls() const {
  std::set<SubTask> seen;
  int redundant = 0;
  for (const TraceStep& s : steps) {
    const Action& a = s.entry.action;
    if (a.emit_report || task_swarm(a.task) != a.swarm) continue;
    if (!seen.insert(a.task).second) ++redundant;
  }
  return redundant;
}

json to_json(const EpisodeTrace& trace) {
  json steps = json::array();
  for (const TraceStep& s : trace.steps) {
    json step = to_json(s.entry);
    step["reward"] = json{{"diag", s.reward.diag},
                          {"format_penalty", s.reward.format_penalty},
                          {"redundancy_penalty", s.reward.redundancy_penalty},
                          {"total", s.reward.total()}};
    steps.push_back(std::move(step));
  }
  return json{{"case_id", trace.case_id},
              {"case_seed", trace.case_seed},
              {"steps", steps},
              {"r_diag", trace.r_diag},
              {"forced_terminal", trace.forced_terminal}};
}

}  // namespace ppgl
