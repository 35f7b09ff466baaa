#include "rrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rrl/error.hpp"

namespace rrl {

void TabularPolicy::validate() const {
  if (probabilities.size() != static_cast<std::size_t>(state_count) * action_count) {
    throw ArgumentError("tabular policy has the wrong number of entries");
  }
  for (int s = 0; s < state_count; ++s) {
    double total = 0.0;
    for (int a = 0; a < action_count; ++a) {
      if ((*this)(s, a) < 0.0) throw ArgumentError("negative policy probability");
      total += (*this)(s, a);
    }
    if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("policy row does not sum to 1");
  }
}

TabularPolicy TabularPolicy::uniform(int states, int actions) {
  return {states, actions, std::vector<double>(static_cast<std::size_t>(states) * actions, 1.0 / actions)};
}

TabularPolicy TabularPolicy::from_logits(std::span<const double> logits, int states, int actions) {
  if (logits.size() != static_cast<std::size_t>(states) * actions) throw ArgumentError("logit table has wrong size");
  TabularPolicy policy{states, actions, std::vector<double>(logits.size())};
  for (int s = 0; s < states; ++s) {
    const auto row = logits.subspan(static_cast<std::size_t>(s) * actions, actions);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (int a = 0; a < actions; ++a) total += std::exp(row[a] - top);
    for (int a = 0; a < actions; ++a) policy.probabilities[s * actions + a] = std::exp(row[a] - top) / total;
  }
  return policy;
}

TabularPolicy TabularPolicy::random(int states, int actions, Rng& rng) {
  std::exponential_distribution<double> exponential(1.0);
  TabularPolicy policy{states, actions, std::vector<double>(static_cast<std::size_t>(states) * actions)};
  for (int s = 0; s < states; ++s) {
    double total = 0.0;
    for (int a = 0; a < actions; ++a) total += policy.probabilities[s * actions + a] = exponential(rng);
    for (int a = 0; a < actions; ++a) policy.probabilities[s * actions + a] /= total;
  }
  return policy;
}

std::vector<double> solve_linear_system(std::vector<double> m, std::vector<double> rhs, int n) {
  if (m.size() != static_cast<std::size_t>(n) * n || rhs.size() != static_cast<std::size_t>(n)) {
    throw ArgumentError("linear system has inconsistent dimensions");
  }
  auto at = [&](int r, int c) -> double& { return m[static_cast<std::size_t>(r) * n + c]; };
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
    }
    if (std::abs(at(pivot, col)) < 1e-12) throw NumericError("singular linear system (improper policy?)");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(at(pivot, c), at(col, c));
      std::swap(rhs[pivot], rhs[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double factor = at(r, col) / at(col, col);
      if (factor == 0.0) continue;
      for (int c = col; c < n; ++c) at(r, c) -= factor * at(col, c);
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < n; ++c) acc -= at(r, c) * x[c];
    x[r] = acc / at(r, r);
  }
  return x;
}

namespace {

void check_pair(const TabularModel& model, const TabularPolicy& policy) {
  if (model.state_count != policy.state_count || model.action_count != policy.action_count) {
    throw ArgumentError("policy shape does not match the tabular model");
  }
}

}  // namespace

std::vector<double> exact_value(const TabularModel& model, const TabularPolicy& policy, double gamma) {
  check_pair(model, policy);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0,1]");
  std::vector<int> index(model.state_count, -1);
  std::vector<int> states;
  for (int s = 0; s < model.state_count; ++s) {
    if (!model.terminal[s]) {
      index[s] = static_cast<int>(states.size());
      states.push_back(s);
    }
  }
  const int n = static_cast<int>(states.size());
  std::vector<double> matrix(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> rhs(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int s = states[i];
    matrix[static_cast<std::size_t>(i) * n + i] += 1.0;
    for (int a = 0; a < model.action_count; ++a) {
      const double pa = policy(s, a);
      rhs[i] += pa * model.r(s, a);
      for (int next = 0; next < model.state_count; ++next) {
        if (index[next] >= 0) matrix[static_cast<std::size_t>(i) * n + index[next]] -= gamma * pa * model.p(s, a, next);
      }
    }
  }
  const std::vector<double> solved = n > 0 ? solve_linear_system(std::move(matrix), std::move(rhs), n) : std::vector<double>{};
  std::vector<double> values(model.state_count, 0.0);
  for (int i = 0; i < n; ++i) values[states[i]] = solved[i];
  return values;
}

std::vector<std::vector<double>> finite_horizon_values(const TabularModel& model, const TabularPolicy& policy,
                                                       double gamma, int horizon) {
  check_pair(model, policy);
  if (horizon < 0) throw ArgumentError("horizon must be non-negative");
  std::vector<std::vector<double>> values(horizon + 1, std::vector<double>(model.state_count, 0.0));
  for (int k = 1; k <= horizon; ++k) {
    for (int s = 0; s < model.state_count; ++s) {
      if (model.terminal[s]) continue;
      double v = 0.0;
      for (int a = 0; a < model.action_count; ++a) {
        double next_value = 0.0;
        for (int next = 0; next < model.state_count; ++next) next_value += model.p(s, a, next) * values[k - 1][next];
        v += policy(s, a) * (model.r(s, a) + gamma * next_value);
      }
      values[k][s] = v;
    }
  }
  return values;
}

std::vector<double> exact_q(const TabularModel& model, const TabularPolicy& policy, double gamma) {
  const std::vector<double> v = exact_value(model, policy, gamma);
  std::vector<double> q(static_cast<std::size_t>(model.state_count) * model.action_count, 0.0);
  for (int s = 0; s < model.state_count; ++s) {
    if (model.terminal[s]) continue;
    for (int a = 0; a < model.action_count; ++a) {
      double next_value = 0.0;
      for (int next = 0; next < model.state_count; ++next) next_value += model.p(s, a, next) * v[next];
      q[s * model.action_count + a] = model.r(s, a) + gamma * next_value;
    }
  }
  return q;
}

OptimalValues value_iteration(const TabularModel& model, double gamma, double tolerance, int max_iterations) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("value iteration needs gamma in (0,1)");
  OptimalValues out;
  out.v.assign(model.state_count, 0.0);
  out.q.assign(static_cast<std::size_t>(model.state_count) * model.action_count, 0.0);
  for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
    double change = 0.0;
    std::vector<double> next_v(model.state_count, 0.0);
    for (int s = 0; s < model.state_count; ++s) {
      if (model.terminal[s]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < model.action_count; ++a) {
        double next_value = 0.0;
        for (int next = 0; next < model.state_count; ++next) next_value += model.p(s, a, next) * out.v[next];
        const double q = model.r(s, a) + gamma * next_value;
        out.q[s * model.action_count + a] = q;
        best = std::max(best, q);
      }
      next_v[s] = best;
      change = std::max(change, std::abs(best - out.v[s]));
    }
    out.v = std::move(next_v);
    if (change < tolerance) return out;
  }
  throw NumericError("value iteration did not converge");
}

// --- enumeration ----------------------------------------------------------------

namespace {

struct Step {
  int state;
  int action;
};

void check_enumeration(const TabularModel& model, std::span<const double> logits, int horizon) {
  if (model.state_count * model.action_count > kMaxEnumerationCells || horizon > kMaxEnumerationHorizon) {
    throw UnsupportedError("model too large to enumerate trajectories (|S||A| <= 32, horizon <= 8)");
  }
  if (horizon < 1) throw ArgumentError("horizon must be >= 1");
  if (logits.size() != static_cast<std::size_t>(model.state_count) * model.action_count) {
    throw ArgumentError("logit table does not match the model");
  }
}

// Calls visit(probability, steps, discounted_return) for every trajectory of
// non-zero probability.
void enumerate(const TabularModel& model, const TabularPolicy& policy, int horizon, double gamma,
               const std::function<void(double, const std::vector<Step>&, double)>& visit) {
  std::vector<Step> steps;
  std::function<void(int, double, double, double)> recurse = [&](int s, double prob, double ret, double discount) {
    if (static_cast<int>(steps.size()) == horizon || model.terminal[s]) {
      visit(prob, steps, ret);
      return;
    }
    for (int a = 0; a < model.action_count; ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      steps.push_back({s, a});
      for (int next = 0; next < model.state_count; ++next) {
        const double pn = model.p(s, a, next);
        if (pn == 0.0) continue;
        recurse(next, prob * pa * pn, ret + discount * model.r(s, a), discount * gamma);
      }
      steps.pop_back();
    }
  };
  for (int s = 0; s < model.state_count; ++s) {
    if (model.initial_distribution[s] > 0.0) recurse(s, model.initial_distribution[s], 0.0, 1.0);
  }
}

void add_score(const TabularPolicy& policy, const Step& step, double weight, double* out) {
  const int A = policy.action_count;
  for (int a = 0; a < A; ++a) out[step.state * A + a] -= weight * policy(step.state, a);
  out[step.state * A + step.action] += weight;
}

}  // namespace

ExactGradient exact_policy_gradient(const TabularModel& model, std::span<const double> logits, int horizon,
                                    double gamma) {
  check_enumeration(model, logits, horizon);
  const TabularPolicy policy = TabularPolicy::from_logits(logits, model.state_count, model.action_count);
  ExactGradient gradient{std::vector<double>(logits.size(), 0.0), horizon, gamma};
  enumerate(model, policy, horizon, gamma, [&](double prob, const std::vector<Step>& steps, double ret) {
    for (const Step& step : steps) add_score(policy, step, prob * ret, gradient.values.data());
  });
  return gradient;
}

double expected_return(const TabularModel& model, std::span<const double> logits, int horizon, double gamma) {
  check_enumeration(model, logits, horizon);
  const TabularPolicy policy = TabularPolicy::from_logits(logits, model.state_count, model.action_count);
  double total = 0.0;
  enumerate(model, policy, horizon, gamma, [&](double prob, const std::vector<Step>&, double ret) { total += prob * ret; });
  return total;
}

std::vector<double> score_function_mean(const TabularModel& model, std::span<const double> logits, int horizon) {
  check_enumeration(model, logits, horizon);
  const TabularPolicy policy = TabularPolicy::from_logits(logits, model.state_count, model.action_count);
  std::vector<double> mean(logits.size(), 0.0);
  enumerate(model, policy, horizon, 1.0, [&](double prob, const std::vector<Step>& steps, double) {
    for (const Step& step : steps) add_score(policy, step, prob, mean.data());
  });
  return mean;
}

StateBaseline exact_value_baseline(const TabularModel& model, std::span<const double> logits, int horizon,
                                   double gamma) {
  const TabularPolicy policy = TabularPolicy::from_logits(logits, model.state_count, model.action_count);
  const auto to_go = finite_horizon_values(model, policy, gamma, horizon);
  std::vector<std::vector<double>> rows(horizon);
  for (int t = 0; t < horizon; ++t) rows[t] = to_go[horizon - t];
  return StateBaseline::per_step(std::move(rows));
}

// --- sampling -----------------------------------------------------------------

namespace {

int draw(Rng& rng, const double* probs, int n) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (int i = 0; i < n; ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left the cumulative sum just below 1: take the last reachable entry.
  for (int i = n - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return i;
  }
  return n - 1;
}

// samples holds n rows of dim entries.
GradientVariance summarize(const std::vector<double>& samples, long n, std::size_t dim) {
  GradientVariance out;
  out.mean_gradient.assign(dim, 0.0);
  for (long i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) out.mean_gradient[k] += samples[i * dim + k];
  }
  for (double& m : out.mean_gradient) m /= static_cast<double>(n);
  out.squared_deviations.resize(n);
  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    double q = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = samples[i * dim + k] - out.mean_gradient[k];
      q += d * d;
    }
    out.squared_deviations[i] = q;
    total += q;
  }
  const double nd = static_cast<double>(n);
  out.covariance_trace = total / (nd - 1.0);
  // Leave-one-out traces on centred data are affine in q_i:
  //   T_(i) = (sum q - q_i n/(n-1)) / (n-2)
  if (n > 2) {
    const double mean_q = total / nd;
    double spread = 0.0;
    for (double q : out.squared_deviations) spread += (q - mean_q) * (q - mean_q);
    const double slope = (nd / (nd - 1.0)) / (nd - 2.0);
    out.standard_error = slope * std::sqrt((nd - 1.0) / nd * spread);
  }
  return out;
}

}  // namespace

std::vector<GradientVariance> gradient_variance(const TabularModel& model, std::span<const double> logits,
                                                int horizon, double gamma,
                                                const std::vector<std::optional<StateBaseline>>& baselines,
                                                long n_samples, Rng& rng) {
  if (n_samples < 2) throw ArgumentError("gradient_variance needs at least 2 samples");
  if (logits.size() != static_cast<std::size_t>(model.state_count) * model.action_count) {
    throw ArgumentError("logit table does not match the model");
  }
  for (const auto& baseline : baselines) {
    if (!baseline) continue;
    if (baseline->rows.empty()) throw ArgumentError("empty baseline table");
    if (baseline->rows.size() != 1 && static_cast<int>(baseline->rows.size()) < horizon) {
      throw ArgumentError("time-indexed baseline shorter than the horizon");
    }
    for (const auto& row : baseline->rows) {
      if (static_cast<int>(row.size()) != model.state_count) throw ArgumentError("baseline length must equal state count");
    }
  }

  const TabularPolicy policy = TabularPolicy::from_logits(logits, model.state_count, model.action_count);
  const std::size_t dim = logits.size();
  const int A = model.action_count;
  std::vector<std::vector<double>> samples(baselines.size(), std::vector<double>(n_samples * dim, 0.0));
  std::vector<Step> steps;
  std::vector<double> rewards;
  for (long i = 0; i < n_samples; ++i) {
    steps.clear();
    rewards.clear();
    int s = draw(rng, model.initial_distribution.data(), model.state_count);
    for (int t = 0; t < horizon && !model.terminal[s]; ++t) {
      const int a = draw(rng, &policy.probabilities[static_cast<std::size_t>(s) * A], A);
      steps.push_back({s, a});
      rewards.push_back(model.r(s, a));
      s = draw(rng, &model.transition[(static_cast<std::size_t>(s) * A + a) * model.state_count], model.state_count);
    }
    // Discounted reward-to-go G_t.
    std::vector<double> to_go(rewards.size() + 1, 0.0);
    for (std::size_t t = rewards.size(); t-- > 0;) to_go[t] = rewards[t] + gamma * to_go[t + 1];

    for (std::size_t b = 0; b < baselines.size(); ++b) {
      double* g = &samples[b][i * dim];
      double discount = 1.0;
      for (std::size_t t = 0; t < steps.size(); ++t) {
        const double base = baselines[b] ? baselines[b]->at(static_cast<int>(t), steps[t].state) : 0.0;
        add_score(policy, steps[t], discount * (to_go[t] - base), g);
        discount *= gamma;
      }
    }
  }

  std::vector<GradientVariance> results;
  results.reserve(baselines.size());
  for (const auto& per_baseline : samples) results.push_back(summarize(per_baseline, n_samples, dim));
  return results;
}

GradientVariance gradient_variance(const TabularModel& model, std::span<const double> logits, int horizon,
                                   double gamma, const std::optional<StateBaseline>& baseline, long n_samples,
                                   Rng& rng) {
  return gradient_variance(model, logits, horizon, gamma, std::vector<std::optional<StateBaseline>>{baseline},
                           n_samples, rng)
      .front();
}

double paired_trace_difference_se(const GradientVariance& a, const GradientVariance& b) {
  if (a.squared_deviations.size() != b.squared_deviations.size() || a.squared_deviations.size() < 3) {
    throw ArgumentError("paired comparison needs equal-size sample sets (n >= 3)");
  }
  const double n = static_cast<double>(a.squared_deviations.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.squared_deviations.size(); ++i) mean += a.squared_deviations[i] - b.squared_deviations[i];
  mean /= n;
  double spread = 0.0;
  for (std::size_t i = 0; i < a.squared_deviations.size(); ++i) {
    const double d = a.squared_deviations[i] - b.squared_deviations[i] - mean;
    spread += d * d;
  }
  return (n / (n - 1.0)) / (n - 2.0) * std::sqrt((n - 1.0) / n * spread);
}

EnumerationFixture enumeration_fixture() {
  EnumerationFixture fixture;
  TabularModel& m = fixture.model;
  m = TabularModel(2, 2, 2);
  m.initial_distribution = {0.5, 0.5};
  m.p(0, 0, 0) = 0.9;
  m.p(0, 0, 1) = 0.1;
  m.p(0, 1, 0) = 0.2;
  m.p(0, 1, 1) = 0.8;
  m.p(1, 0, 0) = 0.6;
  m.p(1, 0, 1) = 0.4;
  m.p(1, 1, 0) = 0.3;
  m.p(1, 1, 1) = 0.7;
  m.r(0, 0) = 1.0;
  m.r(0, 1) = 4.0;
  m.r(1, 0) = 5.0;
  m.r(1, 1) = 1.5;
  fixture.logits = {0.2, -0.3, 0.4, 0.1};
  fixture.horizon = 2;
  fixture.gamma = 1.0;
  return fixture;
}

}  // namespace rrl
