#include "ppgl/policy.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ppgl {

using nlohmann::json;

PolicyParams PolicyParams::zeros(int feature_dim, int action_count) {
  PolicyParams p;
  p.feature_dim = feature_dim;
  p.action_count = action_count;
  p.weights = Eigen::MatrixXd::Zero(action_count, feature_dim);
  p.value_weights = Eigen::VectorXd::Zero(feature_dim);
  return p;
}

void validate(const PolicyParams& params) {
  if (params.feature_dim <= 0 || params.action_count <= 0)
    throw std::invalid_argument("policy: dimensions must be positive");
  if (params.weights.rows() != params.action_count || params.weights.cols() != params.feature_dim)
    throw std::invalid_argument("policy: weight shape mismatch");
  if (params.value_weights.size() != params.feature_dim)
    throw std::invalid_argument("policy: value weight shape mismatch");
  if (!params.weights.allFinite() || !params.value_weights.allFinite())
    throw std::invalid_argument("policy: parameters must be finite");
}

Eigen::VectorXd policy_distribution(const PolicyParams& params, const Eigen::VectorXd& features) {
  if (features.size() != params.feature_dim)
    throw std::invalid_argument("policy_distribution: feature length mismatch");
  if (!features.allFinite()) throw std::invalid_argument("policy_distribution: non-finite features");
  Eigen::VectorXd logits = params.weights * features;
  const double max_logit = logits.maxCoeff();
  Eigen::VectorXd exps = (logits.array() - max_logit).exp();
  return exps / exps.sum();
}

double log_prob(const PolicyParams& params, const Eigen::VectorXd& features, int action) {
  if (action < 0 || action >= params.action_count)
    throw std::invalid_argument("log_prob: action out of range");
  const Eigen::VectorXd probs = policy_distribution(params, features);
  return std::log(probs(action));
}

Eigen::MatrixXd log_prob_gradient(const PolicyParams& params, const Eigen::VectorXd& features,
                                  int action) {
  if (action < 0 || action >= params.action_count)
    throw std::invalid_argument("log_prob_gradient: action out of range");
  Eigen::VectorXd indicator_minus_probs = -policy_distribution(params, features);
  indicator_minus_probs(action) += 1.0;
  return indicator_minus_probs * features.transpose();
}

std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double bootstrap_value, double gamma, double lambda) {
  if (rewards.empty()) throw std::invalid_argument("gae: trajectory must be nonempty");
  if (rewards.size() != values.size()) throw std::invalid_argument("gae: length mismatch");
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("gae: gamma and lambda must be in [0,1]");

  const std::size_t n = rewards.size();
  std::vector<double> advantages(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = (i + 1 < n) ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    advantages[i] = running;
  }
  return advantages;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> returns(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    returns[i] = running;
  }
  return returns;
}

StepDiagnostics policy_gradient_step(PolicyParams& params, const std::vector<Trajectory>& batch,
                                     const TrainConfig& config, double gamma) {
  validate(params);
  if (batch.empty()) throw std::invalid_argument("policy_gradient_step: batch must be nonempty");
  for (const Trajectory& traj : batch)
    if (traj.steps.empty()) throw std::invalid_argument("policy_gradient_step: empty trajectory");

  // Refit the value baseline on this batch's empirical discounted returns,
  // then compute advantages against the fresh fit. Fitting first keeps the
  // baseline aligned with the sampling policy from the very first iteration.
  std::vector<std::vector<double>> all_returns;
  all_returns.reserve(batch.size());
  Eigen::MatrixXd value_design = Eigen::MatrixXd::Zero(params.feature_dim, params.feature_dim);
  Eigen::VectorXd value_target = Eigen::VectorXd::Zero(params.feature_dim);
  for (const Trajectory& traj : batch) {
    std::vector<double> rewards;
    rewards.reserve(traj.steps.size());
    for (const TrajectoryStep& s : traj.steps) rewards.push_back(s.reward);
    all_returns.push_back(discounted_returns(rewards, gamma));
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      value_design.noalias() += traj.steps[t].features * traj.steps[t].features.transpose();
      value_target.noalias() += traj.steps[t].features * all_returns.back()[t];
    }
  }
  value_design.diagonal().array() += 1e-6;  // ridge
  params.value_weights = value_design.ldlt().solve(value_target);
  if (!params.value_weights.allFinite())
    throw std::runtime_error("policy_gradient_step: non-finite value weights");

  // GAE advantages, standardized across the whole batch.
  std::vector<std::vector<double>> all_advantages;
  all_advantages.reserve(batch.size());
  double adv_sum = 0.0;
  std::size_t adv_count = 0;
  for (const Trajectory& traj : batch) {
    std::vector<double> rewards, values;
    rewards.reserve(traj.steps.size());
    values.reserve(traj.steps.size());
    for (const TrajectoryStep& s : traj.steps) {
      rewards.push_back(s.reward);
      values.push_back(params.value_weights.dot(s.features));
    }
    all_advantages.push_back(gae(rewards, values, 0.0, gamma, config.gae_lambda));
    for (double a : all_advantages.back()) {
      adv_sum += a;
      ++adv_count;
    }
  }
  const double adv_mean = adv_sum / static_cast<double>(adv_count);
  double adv_sq = 0.0;
  for (const auto& advs : all_advantages)
    for (double a : advs) adv_sq += (a - adv_mean) * (a - adv_mean);
  const double adv_std = std::sqrt(adv_sq / static_cast<double>(adv_count));
  const double adv_scale = 1.0 / (adv_std + 1e-8);

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(params.action_count, params.feature_dim);
  double return_sum = 0.0;
  double length_sum = 0.0;
  double malformed = 0.0, redundant = 0.0, actions = 0.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& traj = batch[i];
    return_sum += all_returns[i].front();
    length_sum += static_cast<double>(traj.steps.size());
    malformed += traj.malformed_calls;
    redundant += traj.redundant_calls;
    actions += static_cast<double>(traj.steps.size());
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const TrajectoryStep& s = traj.steps[t];
      const double advantage = (all_advantages[i][t] - adv_mean) * adv_scale;
      grad += log_prob_gradient(params, s.features, s.action) * advantage;
    }
  }
  grad /= static_cast<double>(batch.size());

  if (!grad.allFinite()) throw std::runtime_error("policy_gradient_step: non-finite gradient");

  params.weights += config.learning_rate * grad;

  StepDiagnostics diag;
  diag.grad_norm = grad.norm();
  diag.mean_return = return_sum / static_cast<double>(batch.size());
  diag.mean_length = length_sum / static_cast<double>(batch.size());
  diag.malformed_rate = actions > 0 ? malformed / actions : 0.0;
  diag.redundancy_rate = actions > 0 ? redundant / actions : 0.0;
  return diag;
}

json to_json(const PolicyParams& params) {
  std::vector<double> flat(params.weights.size());
  Eigen::Map<Eigen::MatrixXd>(flat.data(), params.weights.rows(), params.weights.cols()) =
      params.weights;
  std::vector<double> value(params.value_weights.data(),
                            params.value_weights.data() + params.value_weights.size());
  return json{{"feature_dim", params.feature_dim},
              {"action_count", params.action_count},
              {"weights", flat},  // column-major action_count x feature_dim
              {"value_weights", value}};
}

PolicyParams policy_from_json(const json& j) {
  PolicyParams p;
  p.feature_dim = j.at("feature_dim").get<int>();
  p.action_count = j.at("action_count").get<int>();
  const auto flat = j.at("weights").get<std::vector<double>>();
  if (flat.size() != static_cast<std::size_t>(p.feature_dim) * p.action_count)
    throw std::invalid_argument("policy: weight array length mismatch");
  p.weights = Eigen::Map<const Eigen::MatrixXd>(flat.data(), p.action_count, p.feature_dim);
  const auto value = j.at("value_weights").get<std::vector<double>>();
  if (value.size() != static_cast<std::size_t>(p.feature_dim))
    throw std::invalid_argument("policy: value weight array length mismatch");
  p.value_weights = Eigen::Map<const Eigen::VectorXd>(value.data(), p.feature_dim);
  validate(p);
  return p;
}

void save_policy(const PolicyParams& params, const std::string& path) {
  validate(params);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << to_json(params).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_policy: write failed");
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  json j;
  in >> j;
  return policy_from_json(j);
}

}  // namespace ppgl
