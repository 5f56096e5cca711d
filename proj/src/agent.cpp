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

#include "mfec/agent.hpp"

#include <cmath>
#include <string>

#include "mfec/errors.hpp"

namespace mfec {

AgentConfig AgentConfig::for_task(const GridWorldSpec& spec) {
  AgentConfig c;
  const bool revisits = spec.start_mode == StartMode::fixed && spec.task != Task::double_t_maze;
  if (revisits) {
    c.k = 11;
    c.gamma = 1.0;
    c.capacity = 1'000'000;
  } else {
    c.k = 50;
    c.gamma = 0.99;
    c.capacity = 100'000;
  }
  return c;
}

void AgentConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0,1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in (0,1]");
  if (k == 0) throw InvalidInput("k must be positive");
  if (capacity == 0) throw InvalidInput("capacity must be positive");
  if (num_actions == 0) throw InvalidInput("need at least one action");
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw InvalidInput("cannot compute returns of an empty episode");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in (0,1]");
  std::vector<double> out(rewards.size());
  double next = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    if (!std::isfinite(rewards[t])) throw InvalidInput("non-finite reward");
    next = rewards[t] + gamma * next;
    out[t] = next;
  }
  return out;
}

ActionId act(const EpisodicValueStore& store, std::span<const double> state, const AgentConfig& config, Rng& rng) {
  const double u = rng.uniform();
  if (u < config.epsilon) return rng.uniform_index(config.num_actions);
  ActionId best = 0;
  double best_value = 0.0;
  for (ActionId a = 0; a < config.num_actions; ++a) {
    const double v = store.estimate(state, a, config.k).value_or(0.0);
    if (a == 0 || v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

void end_episode(EpisodicValueStore& store, const EpisodeTrace& trace, double gamma) {
  if (trace.steps.empty()) throw InvalidInput("cannot replay an empty trace");
  std::vector<double> rewards(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) rewards[t] = trace.steps[t].reward;
  const std::vector<double> returns = compute_returns(rewards, gamma);
  for (std::size_t t = trace.size(); t-- > 0;) store.update(trace.steps[t].state, trace.steps[t].action, returns[t]);
}

EpisodeResult run_episode(GridWorld& env, EpisodicValueStore& store, const EmbeddingFunction& embed,
                          const AgentConfig& config, std::uint64_t seed, bool learn) {
  if (config.num_actions != env.num_actions() || config.num_actions != store.num_actions()) {
    throw InvalidInput("agent, store and environment disagree on the action count");
  }
  Rng policy(mix_seed(seed, 0x706f6c));
  ObservationFrame obs = env.reset(mix_seed(seed, 0x656e76));
  EpisodeResult result;
  bool done = false;
  while (!done) {
    Embedding state = embed(obs);
    const ActionId action = act(store, state, config, policy);
    StepOutcome out = env.step(action);
    result.total_reward += out.reward;
    result.trace.steps.push_back(TraceStep{std::move(state), action, out.reward});
    obs = std::move(out.observation);
    done = out.done;
  }
  result.steps = result.trace.size();
  if (learn) end_episode(store, result.trace, config.gamma);
  return result;
}

}  // namespace mfec
