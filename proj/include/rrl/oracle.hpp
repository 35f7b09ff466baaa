#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/random.hpp"

namespace rrl {

// pi(a|s) as a dense row-major [state][action] table.
struct TabularPolicy {
  int state_count = 0;
  int action_count = 0;
  std::vector<double> probabilities;

  double operator()(int s, int a) const { return probabilities[s * action_count + a]; }
  void validate() const;

  static TabularPolicy uniform(int states, int actions);
  // Row-wise softmax of [state][action] logits.
  static TabularPolicy from_logits(std::span<const double> logits, int states, int actions);
  // Rows drawn from a flat Dirichlet.
  static TabularPolicy random(int states, int actions, Rng& rng);
};

// Gaussian elimination with partial pivoting on a dense row-major n x n
// system. Pivots below 1e-12 in magnitude throw NumericError.
std::vector<double> solve_linear_system(std::vector<double> matrix, std::vector<double> rhs, int n);

// Solves (I - gamma P^pi) V = r^pi over the non-terminal states; terminal
// states have V = 0. gamma = 1 requires every policy to be proper.
std::vector<double> exact_value(const TabularModel& model, const TabularPolicy& policy, double gamma);
// Backward induction: values[k][s] is the value with k steps remaining.
std::vector<std::vector<double>> finite_horizon_values(const TabularModel& model, const TabularPolicy& policy,
                                                       double gamma, int horizon);
// Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s'), flattened [s][a].
std::vector<double> exact_q(const TabularModel& model, const TabularPolicy& policy, double gamma);

struct OptimalValues {
  std::vector<double> q;  // [s][a]
  std::vector<double> v;
  int iterations = 0;
};
OptimalValues value_iteration(const TabularModel& model, double gamma, double tolerance = 1e-13,
                              int max_iterations = 100000);

inline constexpr int kMaxEnumerationCells = 32;
inline constexpr int kMaxEnumerationHorizon = 8;

// Episodes run for at most `horizon` steps and stop early on a terminal
// state. R(tau) = sum_t gamma^t r(s_t, a_t).
struct ExactGradient {
  std::vector<double> values;  // d J / d logits[s][a]
  int horizon = 0;
  double gamma = 1.0;
};

// sum over every trajectory tau of P(tau) grad log P(tau) R(tau) for a
// softmax-tabular policy. Throws UnsupportedError past the size guard.
ExactGradient exact_policy_gradient(const TabularModel& model, std::span<const double> logits, int horizon,
                                    double gamma);
// J(theta) = sum_tau P(tau) R(tau), by the same enumeration.
double expected_return(const TabularModel& model, std::span<const double> logits, int horizon, double gamma);
// sum_tau P(tau) grad log P(tau); zero up to rounding.
std::vector<double> score_function_mean(const TabularModel& model, std::span<const double> logits, int horizon);

// State baseline b_t(s). A per-state table is reused at every t; a
// time-indexed table holds one row per step.
struct StateBaseline {
  std::vector<std::vector<double>> rows;  // [t][s]; a single row repeats over t

  static StateBaseline per_state(std::vector<double> values) { return {{std::move(values)}}; }
  static StateBaseline per_step(std::vector<std::vector<double>> values) { return {std::move(values)}; }
  double at(int t, int s) const { return rows.size() == 1 ? rows[0][s] : rows[t][s]; }
};

// Exact value-to-go baseline for the finite-horizon problem: b_t = V with
// (horizon - t) steps remaining.
StateBaseline exact_value_baseline(const TabularModel& model, std::span<const double> logits, int horizon,
                                   double gamma);

struct GradientVariance {
  std::vector<double> mean_gradient;
  double covariance_trace = 0.0;
  double standard_error = 0.0;  // jackknife
  std::vector<double> squared_deviations;  // per-sample |g_i - mean|^2, for paired comparisons
};

// Draws n trajectories and forms one estimate per trajectory,
//   g = sum_t gamma^t grad log pi(a_t|s_t) (G_t - b_t(s_t)),
// for each baseline on the same trajectories (nullopt: no baseline).
std::vector<GradientVariance> gradient_variance(const TabularModel& model, std::span<const double> logits,
                                                int horizon, double gamma,
                                                const std::vector<std::optional<StateBaseline>>& baselines,
                                                long n_samples, Rng& rng);
GradientVariance gradient_variance(const TabularModel& model, std::span<const double> logits, int horizon,
                                   double gamma, const std::optional<StateBaseline>& baseline, long n_samples,
                                   Rng& rng);

// Jackknife standard error of trace(A) - trace(B) for two estimators
// evaluated on the same trajectories.
double paired_trace_difference_se(const GradientVariance& a, const GradientVariance& b);

// Two-state, two-action, horizon-2 MDP used by the estimator checks, with
// the frozen logits it is evaluated at.
struct EnumerationFixture {
  TabularModel model;
  std::vector<double> logits;
  int horizon = 2;
  double gamma = 1.0;
};
EnumerationFixture enumeration_fixture();

}  // namespace rrl
