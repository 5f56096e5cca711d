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

#include "mfec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "mfec/embeddings.hpp"
#include "mfec/errors.hpp"
#include "mfec/rng.hpp"
#include "mfec/text_io.hpp"
#include "mfec/vae.hpp"

namespace mfec {

namespace {

constexpr std::uint64_t kProjectionStream = 0x70726f6a;
constexpr std::uint64_t kVaeCorpusStream = 0x76616563;
constexpr std::uint64_t kVaeInitStream = 0x76616569;
constexpr std::uint64_t kVaeTrainStream = 0x76616574;

template <typename T>
std::vector<T> parse_list(const text::KeyValue& kv, auto parse_one) {
  std::vector<T> out;
  for (auto tok : text::split(kv.value, ',')) {
    const auto v = parse_one(text::trim(tok));
    if (!v) throw ParseError(kv.line, kv.key, "bad list element '" + std::string(tok) + "'");
    out.push_back(static_cast<T>(*v));
  }
  return out;
}

std::size_t positive_size(const text::KeyValue& kv) {
  const auto v = text::parse_uint(kv.value);
  if (!v || *v == 0) throw ParseError(kv.line, kv.key, "expected a positive integer");
  return static_cast<std::size_t>(*v);
}

double number_in(const text::KeyValue& kv, double lo, double hi, bool open_lo) {
  const auto v = text::parse_double(kv.value);
  if (!v) throw ParseError(kv.line, kv.key, "expected a number");
  if (!(open_lo ? *v > lo : *v >= lo) || !(*v <= hi)) {
    throw ParseError(kv.line, kv.key,
                     "value " + kv.value + " out of range " + (open_lo ? "(" : "[") + text::format_double(lo) + ", " +
                         text::format_double(hi) + "]");
  }
  return *v;
}

struct SeedContext {
  std::shared_ptr<const EmbeddingFunction> embed;
  std::size_t frame_offset = 0;
};

TrainingCorpus collect_random_frames(const GridWorldSpec& spec, std::size_t count, std::uint64_t seed) {
  GridWorld env(spec);
  Rng rng(mix_seed(seed, kVaeCorpusStream));
  TrainingCorpus corpus;
  corpus.frames.reserve(count);
  std::uint64_t episode = 0;
  while (corpus.frames.size() < count) {
    ObservationFrame obs = env.reset(mix_seed(seed ^ kVaeCorpusStream, episode++));
    while (corpus.frames.size() < count) {
      StepOutcome out = env.step(rng.uniform_index(kNumActions));
      corpus.frames.push_back(to_grayscale(out.observation));
      if (out.done) break;
    }
  }
  return corpus;
}

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const std::size_t obs_dim = config.env.width * config.env.height * kNumPlanes;
  switch (config.embedding) {
    case EmbeddingKind::identity:
      return {std::make_shared<EmbeddingFunction>(EmbeddingFunction::identity(obs_dim)), 0};
    case EmbeddingKind::projection:
      return {std::make_shared<EmbeddingFunction>(EmbeddingFunction::random_projection(
                  make_projection(obs_dim, config.projection_dim, mix_seed(seed, kProjectionStream)))),
              0};
    case EmbeddingKind::vae: {
      const auto& p = config.vae;
      const TrainingCorpus corpus = collect_random_frames(config.env, p.frames, seed);
      auto model = std::make_shared<VaeModel>(
          VaeModel::initialized(config.env.width * config.env.height, p.hidden, p.latent, mix_seed(seed, kVaeInitStream)));
      TrainOptions opts;
      opts.steps = p.steps;
      opts.batch_size = p.batch_size;
      opts.step_size = p.step_size;
      opts.seed = mix_seed(seed, kVaeTrainStream);
      train(*model, corpus, opts);
      return {std::make_shared<EmbeddingFunction>(EmbeddingFunction::vae(std::move(model), true)), p.frames};
    }
  }
  throw InvalidInput("unknown embedding kind");
}

RunRecord run_episodic_seed(const ExperimentConfig& config, const SeedContext& ctx, std::uint64_t seed) {
  RunRecord rec{seed, {}, std::nullopt};
  try {
    GridWorld env(config.env);
    EpisodicValueStore store(config.agent.num_actions, ctx.embed->output_dim(), config.agent.capacity, config.agent.rule);
    std::size_t frames = ctx.frame_offset;
    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
      const EpisodeResult res = run_episode(env, store, *ctx.embed, config.agent, mix_seed(seed, ep));
      frames += res.steps;
      EpisodeRow row{ep + 1, res.steps, frames, res.total_reward, store.match_rate(), {}};
      for (ActionId a = 0; a < store.num_actions(); ++a) row.occupancy.push_back(store.buffer(a).size());
      rec.rows.push_back(std::move(row));
    }
  } catch (const Error& e) {
    rec.failure = e.what();
  }
  return rec;
}

RunRecord run_baseline_seed(const ExperimentConfig& config, const QLearningConfig& q, std::uint64_t seed) {
  RunRecord rec{seed, {}, std::nullopt};
  try {
    GridWorld env(config.env);
    const QLearningRun run = q_learning_baseline(env, q, config.episodes, seed);
    std::size_t frames = 0;
    for (std::size_t ep = 0; ep < run.curve.rewards.size(); ++ep) {
      frames += run.curve.steps[ep];
      rec.rows.push_back(EpisodeRow{ep + 1, run.curve.steps[ep], frames, run.curve.rewards[ep], std::nullopt,
                                    {run.table.size()}});
    }
  } catch (const Error& e) {
    rec.failure = e.what();
  }
  return rec;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

ExperimentResult run_with_contexts(const ExperimentConfig& config, const std::vector<SeedContext>& contexts) {
  ExperimentResult result;
  result.runs.resize(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t i) {
    result.runs[i] = run_episodic_seed(config, contexts[i], config.seeds[i]);
  });
  result.aggregate = aggregate(result.runs);
  return result;
}

std::vector<SeedContext> prepare_all(const ExperimentConfig& config) {
  std::vector<SeedContext> contexts(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t i) { contexts[i] = prepare_seed(config, config.seeds[i]); });
  return contexts;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
  agent.validate();
  qlearning.validate();
  if (episodes == 0) throw InvalidInput("episode budget must be at least 1");
  if (seeds.empty()) throw InvalidInput("seed list must not be empty");
  std::vector<std::size_t> ks = sweep_k;
  std::sort(ks.begin(), ks.end());
  if (std::adjacent_find(ks.begin(), ks.end()) != ks.end()) throw InvalidInput("sweep values must be distinct");
  if (std::find(ks.begin(), ks.end(), 0) != ks.end()) throw InvalidInput("sweep values must be positive");
  if (!sweep_k.empty() && agent_kind != AgentKind::episodic) throw InvalidInput("k sweeps need the episodic agent");
  if (embedding == EmbeddingKind::projection && projection_dim >= env.width * env.height * kNumPlanes) {
    throw InvalidInput("projection_dim must be below the observation dimension");
  }
  auto problems = env.violations();
  if (!problems.empty()) throw SpecValidationError(std::move(problems));
}

ExperimentConfig parse_config(std::string_view text) {
  const auto pairs = text::parse_key_values(text);
  std::map<std::string, std::size_t> seen;
  for (const auto& kv : pairs) {
    if (!seen.emplace(kv.key, kv.line).second) throw ParseError(kv.line, kv.key, "duplicate key");
  }
  for (const char* required : {"task", "episodes"}) {
    if (!seen.contains(required)) throw ParseError(0, required, "missing required key");
  }

  std::vector<text::KeyValue> rest;
  ExperimentConfig cfg;
  cfg.env = grid_spec_from_pairs(pairs, &rest);
  cfg.agent = AgentConfig::for_task(cfg.env);
  cfg.qlearning.gamma = cfg.agent.gamma;
  bool alpha_given = false;

  for (const auto& kv : rest) {
    const std::string& k = kv.key;
    if (k == "agent") {
      if (kv.value == "episodic") cfg.agent_kind = AgentKind::episodic;
      else if (kv.value == "qlearning") cfg.agent_kind = AgentKind::qlearning;
      else throw ParseError(kv.line, k, "expected episodic or qlearning");
    } else if (k == "embedding") {
      if (kv.value == "identity") cfg.embedding = EmbeddingKind::identity;
      else if (kv.value == "projection") cfg.embedding = EmbeddingKind::projection;
      else if (kv.value == "vae") cfg.embedding = EmbeddingKind::vae;
      else throw ParseError(kv.line, k, "expected identity, projection or vae");
    } else if (k == "projection_dim") {
      cfg.projection_dim = positive_size(kv);
    } else if (k == "epsilon") {
      cfg.agent.epsilon = number_in(kv, 0.0, 1.0, false);
    } else if (k == "gamma") {
      cfg.agent.gamma = number_in(kv, 0.0, 1.0, true);
      cfg.qlearning.gamma = cfg.agent.gamma;
    } else if (k == "k") {
      cfg.agent.k = positive_size(kv);
    } else if (k == "capacity") {
      cfg.agent.capacity = positive_size(kv);
    } else if (k == "update_rule") {
      if (kv.value == "max") cfg.agent.rule = UpdateRule::max_return;
      else if (kv.value == "overwrite") cfg.agent.rule = UpdateRule::overwrite;
      else throw ParseError(kv.line, k, "expected max or overwrite");
    } else if (k == "alpha") {
      const auto grid = parse_list<double>(kv, [](std::string_view s) { return text::parse_double(s); });
      for (double a : grid) {
        if (!(a >= 0.0 && a <= 1.0)) throw ParseError(kv.line, k, "alpha out of range [0, 1]");
      }
      if (grid.size() == 1) cfg.qlearning.alpha = grid.front(); else cfg.alpha_grid = grid;
      alpha_given = true;
    } else if (k == "q_epsilon") {
      cfg.qlearning.epsilon = number_in(kv, 0.0, 1.0, false);
    } else if (k == "episodes") {
      cfg.episodes = positive_size(kv);
    } else if (k == "seeds") {
      cfg.seeds = parse_list<std::uint64_t>(kv, [](std::string_view s) { return text::parse_uint(s); });
      if (cfg.seeds.empty()) throw ParseError(kv.line, k, "seed list must not be empty");
    } else if (k == "out") {
      cfg.output_path = kv.value;
    } else if (k == "sweep_k") {
      if (!kv.value.empty()) {
        cfg.sweep_k = parse_list<std::size_t>(kv, [](std::string_view s) {
          const auto v = text::parse_uint(s);
          return v && *v > 0 ? v : std::nullopt;
        });
      }
    } else if (k == "vae_frames") {
      cfg.vae.frames = positive_size(kv);
    } else if (k == "vae_steps") {
      cfg.vae.steps = positive_size(kv);
    } else if (k == "vae_batch") {
      cfg.vae.batch_size = positive_size(kv);
    } else if (k == "vae_hidden") {
      cfg.vae.hidden = positive_size(kv);
    } else if (k == "vae_latent") {
      cfg.vae.latent = positive_size(kv);
    } else if (k == "vae_step_size") {
      cfg.vae.step_size = number_in(kv, 0.0, 1.0, true);
    } else {
      throw ParseError(kv.line, k, "unknown key");
    }
  }
  if (cfg.agent_kind == AgentKind::qlearning && !alpha_given) cfg.alpha_grid = {0.05, 0.1, 0.3};

  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ParseError(0, "config", e.what());
  }
  return cfg;
}

MeanSem mean_sem(std::span<const double> values) {
  if (values.empty()) throw UndefinedStatistic("mean of an empty sample");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

AggregateCurve aggregate(std::span<const RunRecord> runs) {
  AggregateCurve curve;
  std::size_t episodes = 0;
  for (const auto& r : runs) {
    if (!r.failure) episodes = std::max(episodes, r.rows.size());
  }
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    std::vector<double> values;
    for (const auto& r : runs) {
      if (!r.failure && ep < r.rows.size()) values.push_back(r.rows[ep].total_reward);
    }
    const MeanSem ms = mean_sem(values);
    curve.rows.push_back(AggregateRow{ep + 1, ms.mean, ms.sem, values.size()});
  }
  return curve;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.agent_kind == AgentKind::episodic) return run_with_contexts(config, prepare_all(config));

  ExperimentResult result;
  QLearningConfig q = config.qlearning;
  if (!config.alpha_grid.empty()) {
    q.alpha = tune_q_learning(config.env, q, config.alpha_grid, config.episodes, config.seeds).alpha;
    result.tuned_alpha = q.alpha;
  }
  result.runs.resize(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t i) { result.runs[i] = run_baseline_seed(config, q, config.seeds[i]); });
  result.aggregate = aggregate(result.runs);
  return result;
}

double final_score(const RunRecord& run) {
  if (run.rows.empty()) throw UndefinedStatistic("final score of an empty run");
  const std::size_t window = std::max<std::size_t>(1, (run.rows.size() + 9) / 10);
  double sum = 0.0;
  for (std::size_t i = run.rows.size() - window; i < run.rows.size(); ++i) sum += run.rows[i].total_reward;
  return sum / static_cast<double>(window);
}

SweepResult run_k_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.sweep_k.empty()) throw InvalidInput("k sweep needs at least one k");
  const std::vector<SeedContext> contexts = prepare_all(config);
  SweepResult sweep;
  for (std::size_t k : config.sweep_k) {
    ExperimentConfig cfg = config;
    cfg.agent.k = k;
    SweepPoint point{k, run_with_contexts(cfg, contexts), {}};
    std::vector<double> scores;
    for (const auto& r : point.result.runs) {
      if (!r.failure) scores.push_back(final_score(r));
    }
    point.score = scores.empty() ? MeanSem{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()}
                                 : mean_sem(scores);
    sweep.points.push_back(std::move(point));
  }
  return sweep;
}

std::string run_csv(const RunRecord& run) {
  std::ostringstream out;
  out << "episode,steps,frames,total_reward,match_rate,buffer_occupancy\n";
  for (const auto& r : run.rows) {
    out << r.episode << ',' << r.steps << ',' << r.frames << ',' << text::format_double(r.total_reward) << ','
        << (r.match_rate ? text::format_double(*r.match_rate) : "nan") << ',';
    for (std::size_t a = 0; a < r.occupancy.size(); ++a) out << (a ? ";" : "") << r.occupancy[a];
    out << '\n';
  }
  if (run.failure) out << "# failed: " << *run.failure << '\n';
  return out.str();
}

std::string aggregate_csv(const AggregateCurve& curve) {
  std::ostringstream out;
  out << "episode,mean_reward,sem_reward,n_seeds\n";
  for (const auto& r : curve.rows) {
    out << r.episode << ',' << text::format_double(r.mean_reward) << ',' << text::format_double(r.sem_reward) << ','
        << r.n_seeds << '\n';
  }
  return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "k,final_score_mean,final_score_sem\n";
  for (const auto& p : sweep.points) {
    out << p.k << ',' << text::format_double(p.score.mean) << ',' << text::format_double(p.score.sem) << '\n';
  }
  return out.str();
}

void write_metrics(const ExperimentResult& result, const std::filesystem::path& dir) {
  if (result.runs.empty()) throw InvalidInput("no run records to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& run : result.runs) write_file(dir / ("seed_" + std::to_string(run.seed) + ".csv"), run_csv(run));
  write_file(dir / "aggregate.csv", aggregate_csv(result.aggregate));
}

void write_sweep(const SweepResult& sweep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& p : sweep.points) write_metrics(p.result, dir / ("k_" + std::to_string(p.k)));
  write_file(dir / "sweep.csv", sweep_csv(sweep));
}

}  // namespace mfec
