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

// Experiment runner: configuration parsing, multi-seed execution, k sweeps
// and CSV output.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfec/agent.hpp"
#include "mfec/environment.hpp"
#include "mfec/qlearning.hpp"

namespace mfec {

enum class EmbeddingKind { identity, projection, vae };
enum class AgentKind { episodic, qlearning };

struct VaePretraining {
  std::size_t frames = 5000;  // random-policy frames collected before learning
  std::size_t steps = 1500;
  std::size_t batch_size = 32;
  std::size_t hidden = 32;
  std::size_t latent = 8;
  double step_size = 1e-3;
};

struct ExperimentConfig {
  GridWorldSpec env;
  AgentKind agent_kind = AgentKind::episodic;
  EmbeddingKind embedding = EmbeddingKind::identity;
  std::size_t projection_dim = 64;
  AgentConfig agent;
  QLearningConfig qlearning;
  std::vector<double> alpha_grid;  // non-empty: tune alpha over these values
  std::size_t episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  std::string output_path = "out";
  std::vector<std::size_t> sweep_k;
  VaePretraining vae;

  void validate() const;
};

/// Line-oriented key=value text. Required keys: task, episodes. Grid keys
/// are those of parse_grid_spec(); agent defaults follow the task family.
/// Throws ParseError naming the line and key.
ExperimentConfig parse_config(std::string_view text);

struct EpisodeRow {
  std::size_t episode = 0;  // 1-based
  std::size_t steps = 0;
  std::size_t frames = 0;   // cumulative, including pretraining frames
  double total_reward = 0.0;
  std::optional<double> match_rate;  // cumulative over the run; none for the baseline
  std::vector<std::size_t> occupancy;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpisodeRow> rows;
  std::optional<std::string> failure;
};

struct AggregateRow {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double sem_reward = 0.0;  // NaN with fewer than two seeds
  std::size_t n_seeds = 0;
};

struct AggregateCurve {
  std::vector<AggregateRow> rows;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  AggregateCurve aggregate;
  std::optional<double> tuned_alpha;
};

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;  // sample standard deviation / sqrt(n); NaN for n < 2
};
MeanSem mean_sem(std::span<const double> values);

/// Averages successful runs episode by episode.
AggregateCurve aggregate(std::span<const RunRecord> runs);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean total reward over the last 10% of episodes (at least one).
double final_score(const RunRecord& run);

struct SweepPoint {
  std::size_t k = 0;
  ExperimentResult result;
  MeanSem score;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

/// Runs the whole experiment once per k in config.sweep_k. Pretrained VAEs
/// are shared across k for the same seed.
SweepResult run_k_sweep(const ExperimentConfig& config);

/// seed_<s>.csv per run and aggregate.csv in `dir`.
void write_metrics(const ExperimentResult& result, const std::filesystem::path& dir);
/// sweep.csv in `dir` plus write_metrics() output under dir/k_<k>.
void write_sweep(const SweepResult& sweep, const std::filesystem::path& dir);

std::string run_csv(const RunRecord& run);
std::string aggregate_csv(const AggregateCurve& curve);
std::string sweep_csv(const SweepResult& sweep);

}  // namespace mfec
