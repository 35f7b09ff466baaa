#include <algorithm>
#include <cmath>
#include <ostream>

#include "rrl/decimal.hpp"
#include "rrl/error.hpp"
#include "rrl/harness.hpp"
#include "rrl/mlp.hpp"
#include "rrl/oracle.hpp"

namespace rrl {

VerifyLevel parse_verify_level(const std::string& text) {
  if (text == "quick") return VerifyLevel::quick;
  if (text == "full") return VerifyLevel::full;
  throw ConfigError("verify level must be quick or full");
}

long verify_samples(VerifyLevel level) { return level == VerifyLevel::quick ? 20000 : 200000; }

namespace {

// Pinned tolerances.
constexpr double kUnbiasedRelL2 = 0.05;
constexpr double kUnbiasedCosine = 0.99;
constexpr double kVarianceMarginSe = 3.0;
constexpr double kEq4Tolerance = 1e-10;
constexpr double kGradientRelError = 1e-4;
constexpr double kGradientAbsFloor = 1e-8;
constexpr double kFiniteDifferenceStep = 1e-6;
constexpr double kVerifyGamma = 0.99;

CheckResult make_check(std::string name, std::string statistic_name, double statistic, std::string comparison,
                       double threshold) {
  bool passed = false;
  if (comparison == "<") passed = statistic < threshold;
  else if (comparison == ">") passed = statistic > threshold;
  else passed = statistic == threshold;
  return {std::move(name), std::move(statistic_name), statistic, std::move(comparison), threshold, passed};
}

struct FixtureBaselines {
  std::vector<std::string> names;
  std::vector<std::optional<StateBaseline>> baselines;
};

// none; current-V: exact value-to-go of the frozen policy; prior-V: value-to-go
// of the uniform policy (a stale estimate from other computation); combined:
// 0.5 current + 0.5 prior.
FixtureBaselines fixture_baselines(const EnumerationFixture& fx) {
  const StateBaseline current = exact_value_baseline(fx.model, fx.logits, fx.horizon, fx.gamma);
  const TabularPolicy uniform = TabularPolicy::uniform(fx.model.state_count, fx.model.action_count);
  const auto prior_to_go = finite_horizon_values(fx.model, uniform, fx.gamma, fx.horizon);
  std::vector<std::vector<double>> prior_rows(fx.horizon), combined_rows(fx.horizon);
  for (int t = 0; t < fx.horizon; ++t) {
    prior_rows[t] = prior_to_go[fx.horizon - t];
    combined_rows[t].resize(fx.model.state_count);
    for (int s = 0; s < fx.model.state_count; ++s) {
      combined_rows[t][s] = 0.5 * current.at(t, s) + 0.5 * prior_rows[t][s];
    }
  }
  return {{"none", "current-V", "prior-V", "combined w=0.5"},
          {std::nullopt, current, StateBaseline::per_step(prior_rows), StateBaseline::per_step(combined_rows)}};
}

}  // namespace

std::vector<CheckResult> check_unbiasedness(long n_samples, std::uint64_t seed) {
  const EnumerationFixture fx = enumeration_fixture();
  const ExactGradient exact = exact_policy_gradient(fx.model, fx.logits, fx.horizon, fx.gamma);
  const FixtureBaselines b = fixture_baselines(fx);
  Rng rng(seed);
  const auto results = gradient_variance(fx.model, fx.logits, fx.horizon, fx.gamma, b.baselines, n_samples, rng);

  std::vector<CheckResult> checks;
  double exact_norm = 0.0;
  for (double g : exact.values) exact_norm += g * g;
  exact_norm = std::sqrt(exact_norm);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& mean = results[i].mean_gradient;
    double diff = 0.0, dot = 0.0, mean_norm = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      diff += (mean[k] - exact.values[k]) * (mean[k] - exact.values[k]);
      dot += mean[k] * exact.values[k];
      mean_norm += mean[k] * mean[k];
    }
    const double rel = std::sqrt(diff) / exact_norm;
    const double cosine = dot / (std::sqrt(mean_norm) * exact_norm);
    checks.push_back(make_check("unbiasedness [" + b.names[i] + "]", "relative L2 error", rel, "<", kUnbiasedRelL2));
    checks.push_back(make_check("unbiasedness [" + b.names[i] + "]", "cosine similarity", cosine, ">", kUnbiasedCosine));
  }
  return checks;
}

std::vector<CheckResult> check_variance_reduction(long n_samples, std::uint64_t seed) {
  const EnumerationFixture fx = enumeration_fixture();
  const StateBaseline exact_v = exact_value_baseline(fx.model, fx.logits, fx.horizon, fx.gamma);
  Rng rng(seed);
  const auto results =
      gradient_variance(fx.model, fx.logits, fx.horizon, fx.gamma, {std::nullopt, exact_v}, n_samples, rng);
  const GradientVariance& none = results[0];
  const GradientVariance& with_v = results[1];
  // Independent-error SE; never smaller than the paired SE on these runs.
  const double se = std::hypot(none.standard_error, with_v.standard_error);
  const double margin = (none.covariance_trace - with_v.covariance_trace) / se;
  return {make_check("variance reduction [exact V]", "(trace_none - trace_V) / SE", margin, ">", kVarianceMarginSe)};
}

std::vector<CheckResult> check_q_to_v_identity(int policies, std::uint64_t seed) {
  std::vector<CheckResult> checks;
  Rng rng(seed);
  for (EnvId id : {EnvId::chain, EnvId::windy_grid}) {
    const EnvConfig config = default_env_config(id);
    const TabularModel model = as_tabular(config);
    double worst = 0.0;
    for (int p = 0; p < policies; ++p) {
      const TabularPolicy policy = TabularPolicy::random(model.state_count, model.action_count, rng);
      const auto v = exact_value(model, policy, kVerifyGamma);
      const auto q = exact_q(model, policy, kVerifyGamma);
      for (int s = 0; s < model.state_count; ++s) {
        double sum = 0.0;
        for (int a = 0; a < model.action_count; ++a) sum += policy(s, a) * q[s * model.action_count + a];
        worst = std::max(worst, std::abs(sum - v[s]));
      }
    }
    checks.push_back(make_check("Q-to-V identity [" + to_string(id) + "]", "max |sum_a pi Q - V|", worst, "<",
                                kEq4Tolerance));
  }
  return checks;
}

std::vector<CheckResult> check_mlp_gradient(int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int d = 0; d < draws; ++d) {
    MlpModel model = MlpModel::initialized({4, 8, 8, 2}, rng, 1.0);
    for (DenseLayer& layer : model.layers()) {
      for (Eigen::Index i = 0; i < layer.biases.size(); ++i) layer.biases[i] = 0.1 * normal(rng);
    }
    Eigen::VectorXd x(4), upstream(2);
    for (Eigen::Index i = 0; i < 4; ++i) x[i] = normal(rng);
    for (Eigen::Index i = 0; i < 2; ++i) upstream[i] = normal(rng);
    const GradientBuffer analytic = model.backward(x, upstream);

    auto objective = [&](const MlpModel& m) { return upstream.dot(m.forward(x)); };
    auto compare = [&](double a, double n) {
      const double scale = std::max(std::abs(a), std::abs(n));
      if (scale < kGradientAbsFloor) return;
      worst = std::max(worst, std::abs(a - n) / scale);
    };
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
      DenseLayer& layer = model.layers()[l];
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
        double& w = layer.weights.data()[i];
        const double saved = w;
        w = saved + kFiniteDifferenceStep;
        const double up = objective(model);
        w = saved - kFiniteDifferenceStep;
        const double down = objective(model);
        w = saved;
        compare(analytic.layers()[l].weights.data()[i], (up - down) / (2.0 * kFiniteDifferenceStep));
      }
      for (Eigen::Index i = 0; i < layer.biases.size(); ++i) {
        double& b = layer.biases[i];
        const double saved = b;
        b = saved + kFiniteDifferenceStep;
        const double up = objective(model);
        b = saved - kFiniteDifferenceStep;
        const double down = objective(model);
        b = saved;
        compare(analytic.layers()[l].biases[i], (up - down) / (2.0 * kFiniteDifferenceStep));
      }
    }
  }
  return {make_check("MLP gradient check [4-8-8-2, " + std::to_string(draws) + " draws]", "max relative error", worst,
                     "<", kGradientRelError)};
}

std::vector<CheckResult> check_schedules() {
  const WeaningSchedule fixed = WeaningSchedule::fixed(0.9);
  double fixed_mismatch = 0.0;
  for (long t : {0L, 1L, 2047L, 10000L, 99999L, 1000000L}) {
    if (weaning_weight(fixed, t) != 0.9) fixed_mismatch += 1.0;
  }
  constexpr long kInterval = 10000;
  const WeaningSchedule decay = WeaningSchedule::step_decay(0.5, 0.1, kInterval);
  const double expected[] = {0.5, 0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0};
  double decay_mismatch = 0.0;
  for (long k = 0; k < 8; ++k) {
    if (weaning_weight(decay, k * kInterval) != expected[k]) decay_mismatch += 1.0;
    if (k > 0 && weaning_weight(decay, k * kInterval - 1) != expected[k - 1]) decay_mismatch += 1.0;
  }
  return {make_check("weaning schedule [fixed 0.9]", "mismatched values", fixed_mismatch, "==", 0.0),
          make_check("weaning schedule [step_decay 0.5/0.1]", "mismatched values", decay_mismatch, "==", 0.0)};
}

std::vector<CheckResult> verify(VerifyLevel level) {
  const long n = verify_samples(level);
  std::vector<CheckResult> checks;
  auto append = [&](std::vector<CheckResult> more) { checks.insert(checks.end(), more.begin(), more.end()); };
  append(check_unbiasedness(n, 7));
  append(check_variance_reduction(n, 11));
  append(check_q_to_v_identity(20, 13));
  append(check_mlp_gradient(50, 17));
  append(check_schedules());
  return checks;
}

void print_checks(const std::vector<CheckResult>& checks, std::ostream& out) {
  for (const CheckResult& c : checks) {
    out << (c.passed ? "PASS" : "FAIL") << "  " << c.name << ": " << c.statistic_name << " = "
        << format_double(c.statistic) << " (required " << c.comparison << ' ' << format_double(c.threshold) << ")\n";
  }
}

bool all_passed(const std::vector<CheckResult>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

}  // namespace rrl
