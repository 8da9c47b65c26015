#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace ppgl {

// Linear-softmax policy with a linear value baseline over the same features.
struct PolicyParams {
  int feature_dim = 0;
  int action_count = 0;
  Eigen::MatrixXd weights;        // action_count x feature_dim
  Eigen::VectorXd value_weights;  // feature_dim

  static PolicyParams zeros(int feature_dim, int action_count);
};

void validate(const PolicyParams& params);

// Numerically stable softmax of weights * features; probabilities are
// positive and sum to 1 within 1e-12.
Eigen::VectorXd policy_distribution(const PolicyParams& params, const Eigen::VectorXd& features);

double log_prob(const PolicyParams& params, const Eigen::VectorXd& features, int action);

// d log pi(action | features) / d weights = (e_action - pi) * features^T.
Eigen::MatrixXd log_prob_gradient(const PolicyParams& params, const Eigen::VectorXd& features,
                                  int action);

// Generalized advantage estimation by the standard backward recursion:
// delta_t = r_t + gamma * V_{t+1} - V_t, A_t = delta_t + gamma*lambda*A_{t+1},
// with V_T supplied by bootstrap_value (0 for terminal episodes).
std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double bootstrap_value, double gamma, double lambda);

// Discounted return-to-go for each step (used as the value regression target).
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

struct TrajectoryStep {
  Eigen::VectorXd features;
  int action = 0;
  double reward = 0.0;
  double log_prob = 0.0;
  double value_estimate = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  // Episode metadata for training diagnostics.
  int malformed_calls = 0;
  int redundant_calls = 0;
  int tool_calls = 0;
};

struct TrainConfig {
  int iterations = 300;
  int batch_size = 16;  // trajectories per gradient step
  double learning_rate = 0.5;
  double gae_lambda = 0.97;
  std::uint64_t seed = 0;
};

struct StepDiagnostics {
  double grad_norm = 0.0;
  double mean_return = 0.0;  // discounted
  double mean_length = 0.0;
  double malformed_rate = 0.0;   // malformed calls per action
  double redundancy_rate = 0.0;  // redundant calls per action
};

// One policy-gradient ascent step with batch-standardized GAE advantages;
// the value
// baseline is refit by ridge least squares against discounted returns.
// Throws std::runtime_error on a non-finite gradient.
StepDiagnostics policy_gradient_step(PolicyParams& params, const std::vector<Trajectory>& batch,
                                     const TrainConfig& config, double gamma);

nlohmann::json to_json(const PolicyParams& params);
PolicyParams policy_from_json(const nlohmann::json& j);
void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

}  // namespace ppgl
