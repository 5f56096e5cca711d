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

// Model-free episodic control: act greedily (with epsilon exploration) on
// nearest-neighbour value estimates for a whole episode, then replay the
// episode backwards writing each step's return into the store.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfec/embeddings.hpp"
#include "mfec/environment.hpp"
#include "mfec/memory.hpp"
#include "mfec/rng.hpp"

namespace mfec {

struct AgentConfig {
  double epsilon = 0.005;
  double gamma = 1.0;
  std::size_t k = 11;
  std::size_t capacity = 1'000'000;
  std::size_t num_actions = kNumActions;
  UpdateRule rule = UpdateRule::max_return;

  /// Fixed-start tasks revisit identical states (k=11, gamma=1, 1e6 entries
  /// per action); the others rarely do (k=50, gamma=0.99, 1e5 entries).
  static AgentConfig for_task(const GridWorldSpec& spec);

  /// Throws InvalidInput on out-of-range fields.
  void validate() const;
};

struct TraceStep {
  Embedding state;
  ActionId action = 0;
  double reward = 0.0;  // reward received after taking `action` in `state`
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  std::size_t size() const noexcept { return steps.size(); }
};

/// R[t] = rewards[t] + gamma * R[t+1], R[T-1] = rewards[T-1].
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);

/// Epsilon-greedy over estimate(); empty buffers count as 0 and ties go to
/// the lowest action id. Consumes exactly one uniform draw, plus one index
/// draw when exploring.
ActionId act(const EpisodicValueStore& store, std::span<const double> state, const AgentConfig& config, Rng& rng);

/// Backward replay: computes returns and updates the store from the last
/// step to the first. Throws InvalidInput on an empty trace.
void end_episode(EpisodicValueStore& store, const EpisodeTrace& trace, double gamma);

struct EpisodeResult {
  double total_reward = 0.0;
  std::size_t steps = 0;
  EpisodeTrace trace;
};

/// Runs one episode. The environment is reset with a seed and the policy
/// draws from a separate stream, both derived from `seed`. With `learn` the
/// trace is replayed into the store at the end; without it the store is
/// only read.
EpisodeResult run_episode(GridWorld& env, EpisodicValueStore& store, const EmbeddingFunction& embed,
                          const AgentConfig& config, std::uint64_t seed, bool learn = true);

}  // namespace mfec
