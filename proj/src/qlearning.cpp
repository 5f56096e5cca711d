// Copyright 2026 the mfec authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfec/qlearning.hpp"

#include <algorithm>
#include <numeric>

#include "mfec/errors.hpp"
#include "mfec/rng.hpp"

namespace mfec {

namespace {

std::size_t greedy(const QValues& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

}  // namespace

void QLearningConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in [0,1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in (0,1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0,1]");
}

std::string QTable::key(const ObservationFrame& obs) {
  return std::string(reinterpret_cast<const char*>(obs.pixels.data()), obs.pixels.size() * sizeof(double));
}

QValues& QTable::at(const ObservationFrame& obs) { return table_.try_emplace(key(obs), QValues{}).first->second; }

QValues QTable::get(const ObservationFrame& obs) const {
  const auto it = table_.find(key(obs));
  return it == table_.end() ? QValues{} : it->second;
}

QLearningRun q_learning_baseline(GridWorld& env, const QLearningConfig& config, std::size_t episodes,
                                 std::uint64_t seed) {
  config.validate();
  QLearningRun run;
  Rng policy(mix_seed(seed, 0x716c));
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    ObservationFrame obs = env.reset(mix_seed(seed, ep));
    double total = 0.0;
    std::size_t steps = 0;
    bool done = false;
    while (!done) {
      const double u = policy.uniform();
      const std::size_t action = u < config.epsilon ? policy.uniform_index(kNumActions) : greedy(run.table.get(obs));
      StepOutcome out = env.step(action);
      const double bootstrap = out.terminal ? 0.0 : [&] {
        const QValues next = run.table.get(out.observation);
        return *std::max_element(next.begin(), next.end());
      }();
      double& q = run.table.at(obs)[action];
      q += config.alpha * (out.reward + config.gamma * bootstrap - q);
      total += out.reward;
      ++steps;
      obs = std::move(out.observation);
      done = out.done;
    }
    run.curve.rewards.push_back(total);
    run.curve.steps.push_back(steps);
  }
  return run;
}

TunedBaseline tune_q_learning(const GridWorldSpec& spec, QLearningConfig config, std::span<const double> alphas,
                              std::size_t episodes, std::span<const std::uint64_t> seeds) {
  if (alphas.empty() || seeds.empty()) throw InvalidInput("tuning needs at least one alpha and one seed");
  TunedBaseline best;
  double best_score = 0.0;
  bool first = true;
  for (double alpha : alphas) {
    config.alpha = alpha;
    std::vector<LearningCurve> curves;
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
      GridWorld env(spec);
      curves.push_back(q_learning_baseline(env, config, episodes, seed).curve);
      sum += std::accumulate(curves.back().rewards.begin(), curves.back().rewards.end(), 0.0);
    }
    if (first || sum > best_score) {
      best = TunedBaseline{alpha, std::move(curves)};
      best_score = sum;
      first = false;
    }
  }
  return best;
}

}  // namespace mfec
