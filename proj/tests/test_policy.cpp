#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "ppgl/policy.hpp"
#include "ppgl/rng.hpp"

using namespace ppgl;

namespace {

PolicyParams random_params(std::uint64_t seed, int features = 6, int actions = 5) {
  Rng rng(seed);
  PolicyParams p = PolicyParams::zeros(features, actions);
  for (int a = 0; a < actions; ++a)
    for (int f = 0; f < features; ++f) p.weights(a, f) = rng.normal(0.0, 1.0);
  for (int f = 0; f < features; ++f) p.value_weights(f) = rng.normal(0.0, 0.5);
  return p;
}

Eigen::VectorXd random_features(std::uint64_t seed, int n = 6) {
  Rng rng(seed);
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f(i) = rng.normal(0.0, 1.0);
  return f;
}

// Extended-precision softmax reference.
std::vector<long double> reference_softmax(const PolicyParams& p, const Eigen::VectorXd& features) {
  std::vector<long double> logits(p.action_count, 0.0L);
  for (int a = 0; a < p.action_count; ++a)
    for (int f = 0; f < p.feature_dim; ++f)
      logits[a] += static_cast<long double>(p.weights(a, f)) * static_cast<long double>(features(f));
  long double max_logit = logits[0];
  for (long double l : logits) max_logit = std::max(max_logit, l);
  long double sum = 0.0L;
  std::vector<long double> exps(p.action_count);
  for (int a = 0; a < p.action_count; ++a) {
    exps[a] = expl(logits[a] - max_logit);
    sum += exps[a];
  }
  for (auto& e : exps) e /= sum;
  return exps;
}

}  // namespace

TEST_CASE("zero weights give the uniform distribution") {
  const auto p = PolicyParams::zeros(4, 7);
  const auto probs = policy_distribution(p, random_features(1, 4));
  for (int a = 0; a < 7; ++a) CHECK(probs(a) == doctest::Approx(1.0 / 7).epsilon(1e-14));
}

TEST_CASE("extreme logits do not overflow") {
  auto p = PolicyParams::zeros(1, 3);
  p.weights(1, 0) = 1000.0;
  Eigen::VectorXd f(1);
  f(0) = 1.0;
  const auto probs = policy_distribution(p, f);
  CHECK(std::isfinite(probs.sum()));
  CHECK(probs(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("distribution matches an extended-precision reference to 1e-12") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = random_params(seed);
    const auto f = random_features(seed + 1000);
    const auto probs = policy_distribution(p, f);
    const auto ref = reference_softmax(p, f);
    double sum = 0.0;
    for (int a = 0; a < p.action_count; ++a) {
      CHECK(std::abs(probs(a) - static_cast<double>(ref[a])) < 1e-12);
      sum += probs(a);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (int a = 0; a < p.action_count; ++a) CHECK(probs(a) > 0.0);
  }
}

TEST_CASE("non-finite features are rejected") {
  Eigen::VectorXd f = random_features(3, 4);
  f(2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(policy_distribution(PolicyParams::zeros(4, 3), f), std::invalid_argument);
}

TEST_CASE("single-step GAE ignores gamma") {
  for (const double gamma : {0.0, 0.5, 0.95, 1.0}) {
    const auto adv = gae({2.0}, {0.5}, 0.0, gamma, 0.97);
    REQUIRE(adv.size() == 1);
    CHECK(adv[0] == doctest::Approx(1.5).epsilon(1e-15));
  }
}

TEST_CASE("lambda 0 reduces GAE to one-step TD residuals") {
  Rng rng(4);
  std::vector<double> rewards(8), values(8);
  for (int i = 0; i < 8; ++i) {
    rewards[i] = rng.normal(0, 1);
    values[i] = rng.normal(0, 1);
  }
  const double gamma = 0.9;
  const auto adv = gae(rewards, values, 0.25, gamma, 0.0);
  for (std::size_t t = 0; t < 8; ++t) {
    const double next_v = t + 1 < 8 ? values[t + 1] : 0.25;
    CHECK(adv[t] == doctest::Approx(rewards[t] + gamma * next_v - values[t]).epsilon(1e-12));
  }
}

TEST_CASE("backward recursion matches the direct double sum") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_index(10));
    std::vector<double> rewards(T), values(T);
    for (int i = 0; i < T; ++i) {
      rewards[i] = rng.normal(0, 1);
      values[i] = rng.normal(0, 1);
    }
    const double bootstrap = rng.normal(0, 1);
    const double gamma = trial < 50 ? 0.95 : rng.uniform();
    const double lambda = trial < 50 ? 0.97 : rng.uniform();
    const auto adv = gae(rewards, values, bootstrap, gamma, lambda);
    for (int t = 0; t < T; ++t) {
      long double expected = 0.0L;
      for (int l = 0; t + l < T; ++l) {
        const double next_v = t + l + 1 < T ? values[t + l + 1] : bootstrap;
        const long double delta = rewards[t + l] + gamma * next_v - values[t + l];
        expected += powl(static_cast<long double>(gamma) * lambda, l) * delta;
      }
      CHECK(std::abs(adv[t] - static_cast<double>(expected)) < 1e-10);
    }
  }
}

TEST_CASE("lambda 1 with zero values telescopes to discounted returns") {
  Rng rng(6);
  std::vector<double> rewards(10);
  for (double& r : rewards) r = rng.normal(0, 1);
  const std::vector<double> values(10, 0.0);
  const double gamma = 0.95;
  const auto adv = gae(rewards, values, 0.0, gamma, 1.0);
  const auto returns = discounted_returns(rewards, gamma);
  for (int t = 0; t < 10; ++t) CHECK(adv[t] == doctest::Approx(returns[t]).epsilon(1e-12));
}

TEST_CASE("gae input validation") {
  CHECK_THROWS_AS(gae({}, {}, 0, 0.9, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(gae({1.0}, {1.0, 2.0}, 0, 0.9, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(gae({1.0}, {1.0}, 0, 1.5, 0.9), std::invalid_argument);
}

TEST_CASE("analytic log-prob gradient matches central finite differences") {
  const double h = 1e-5;
  double max_rel_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = random_params(seed);
    const auto f = random_features(seed + 500);
    Rng rng(seed + 900);
    const int action = static_cast<int>(rng.uniform_index(p.action_count));
    const Eigen::MatrixXd analytic = log_prob_gradient(p, f, action);
    Eigen::MatrixXd fd(p.action_count, p.feature_dim);
    for (int a = 0; a < p.action_count; ++a) {
      for (int k = 0; k < p.feature_dim; ++k) {
        const double saved = p.weights(a, k);
        p.weights(a, k) = saved + h;
        const double up = log_prob(p, f, action);
        p.weights(a, k) = saved - h;
        const double down = log_prob(p, f, action);
        p.weights(a, k) = saved;
        fd(a, k) = (up - down) / (2.0 * h);
      }
    }
    const double scale = std::max(analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
    const double rel = (analytic - fd).cwiseAbs().maxCoeff() / scale;
    max_rel_err = std::max(max_rel_err, rel);
  }
  CHECK(max_rel_err < 1e-6);
}

TEST_CASE("zero advantages leave the policy unchanged") {
  auto p = random_params(11);
  const auto before = p.weights;
  Trajectory traj;
  for (int t = 0; t < 4; ++t) {
    TrajectoryStep s;
    s.features = random_features(200 + t, p.feature_dim);
    s.action = t % p.action_count;
    s.reward = 0.0;
    s.value_estimate = 0.0;
    s.log_prob = log_prob(p, s.features, s.action);
    traj.steps.push_back(std::move(s));
  }
  TrainConfig config;
  policy_gradient_step(p, {traj}, config, 0.95);
  CHECK((p.weights - before).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("a positive-advantage action becomes more likely") {
  auto p = random_params(12);
  const auto f0 = random_features(300, p.feature_dim);
  const auto f1 = random_features(301, p.feature_dim);
  const int boosted = 2;
  Trajectory traj;
  TrajectoryStep s0;
  s0.features = f0;
  s0.action = boosted;
  s0.reward = 1.0;  // advantage concentrates on the first step
  s0.value_estimate = 0.0;
  s0.log_prob = log_prob(p, f0, boosted);
  TrajectoryStep s1;
  s1.features = f1;
  s1.action = 0;
  s1.reward = 0.0;
  s1.value_estimate = 0.0;
  s1.log_prob = log_prob(p, f1, 0);
  traj.steps = {s0, s1};

  const double before = policy_distribution(p, f0)(boosted);
  TrainConfig config;
  config.learning_rate = 0.1;
  policy_gradient_step(p, {traj}, config, 0.95);
  CHECK(policy_distribution(p, f0)(boosted) > before);
}

TEST_CASE("advantage standardization preserves the argmax") {
  Rng rng(13);
  std::vector<double> adv(12);
  for (double& a : adv) a = rng.normal(0, 2);
  double mean = 0;
  for (double a : adv) mean += a;
  mean /= adv.size();
  double sq = 0;
  for (double a : adv) sq += (a - mean) * (a - mean);
  const double std = std::sqrt(sq / adv.size());
  std::size_t argmax_before = 0, argmax_after = 0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    if (adv[i] > adv[argmax_before]) argmax_before = i;
    const double z = (adv[i] - mean) / (std + 1e-8);
    if (z > (adv[argmax_after] - mean) / (std + 1e-8)) argmax_after = i;
  }
  CHECK(argmax_before == argmax_after);
}

TEST_CASE("empty batches are rejected") {
  auto p = random_params(14);
  TrainConfig config;
  CHECK_THROWS_AS(policy_gradient_step(p, {}, config, 0.95), std::invalid_argument);
}

TEST_CASE("checkpoint save/load round trip") {
  const auto p = random_params(15);
  const std::string path = "/tmp/ppgl_test_policy.json";
  save_policy(p, path);
  const auto loaded = load_policy(path);
  CHECK(loaded.feature_dim == p.feature_dim);
  CHECK(loaded.action_count == p.action_count);
  CHECK((loaded.weights - p.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.value_weights - p.value_weights).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
