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

// Tabular one-step Q-learning keyed on exact observations; the parametric
// baseline the episodic controller is compared against.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfec/environment.hpp"

namespace mfec {

struct QLearningConfig {
  double alpha = 0.1;
  double gamma = 0.99;
  double epsilon = 0.1;
  void validate() const;
};

using QValues = std::array<double, kNumActions>;

class QTable {
 public:
  /// Zero-initialised on first access.
  QValues& at(const ObservationFrame& obs);
  QValues get(const ObservationFrame& obs) const;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  static std::string key(const ObservationFrame& obs);
  std::unordered_map<std::string, QValues> table_;
};

struct LearningCurve {
  std::vector<double> rewards;     // per-episode total reward
  std::vector<std::size_t> steps;  // per-episode step count
};

struct QLearningRun {
  LearningCurve curve;
  QTable table;
};

/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); no bootstrap
/// past a terminal step. Epsilon-greedy with ties to the lowest action id.
/// Episode i resets the environment with mix_seed(seed, i).
QLearningRun q_learning_baseline(GridWorld& env, const QLearningConfig& config, std::size_t episodes,
                                 std::uint64_t seed);

struct TunedBaseline {
  double alpha = 0.0;
  std::vector<LearningCurve> curves;  // one per seed, for the chosen alpha
};

/// Runs every alpha over every seed and keeps the alpha with the highest
/// mean reward over all episodes and seeds (first wins ties).
TunedBaseline tune_q_learning(const GridWorldSpec& spec, QLearningConfig config, std::span<const double> alphas,
                              std::size_t episodes, std::span<const std::uint64_t> seeds);

}  // namespace mfec
