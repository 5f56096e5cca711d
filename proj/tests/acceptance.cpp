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

// Acceptance suite: one PASS/FAIL line per criterion, each with its measured
// quantities and wall-clock time against its budget. Exit status is zero only
// when every selected criterion passes.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfec/embeddings.hpp"
#include "mfec/environment.hpp"
#include "mfec/harness.hpp"
#include "mfec/memory.hpp"
#include "mfec/rng.hpp"
#include "mfec/simd/kernels.hpp"
#include "mfec/vae.hpp"
#include "oracles.hpp"

namespace {

using Vec = std::vector<double>;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

Outcome knn_oracle() {
  mfec::Rng rng(1001);
  double worst = 0.0;
  std::size_t hits = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t dim = 1 + rng.uniform_index(16);
    const std::size_t cap = 1 + rng.uniform_index(200);
    const std::size_t writes = 1 + rng.uniform_index(250);
    mfec::EpisodicValueStore store(1, dim, cap);
    std::vector<Vec> written;
    for (std::size_t i = 0; i < writes; ++i) {
      Vec key(dim);
      for (double& x : key) x = std::round(rng.normal() * 3.0) / 2.0;
      store.update(key, 0, rng.normal() * 5.0);
      written.push_back(key);
    }
    Vec q(dim);
    if (rng.bernoulli(0.3)) {
      q = written[rng.uniform_index(written.size())];
    } else {
      for (double& x : q) x = rng.normal() * 2.0;
    }
    const std::size_t k = 1 + rng.uniform_index(60);
    const auto entries = store.buffer(0).entries();
    double expect = 0.0;
    bool exact = false;
    for (const auto& e : entries) {
      if (std::memcmp(e.key.data(), q.data(), dim * sizeof(double)) == 0) {
        expect = e.value;
        exact = true;
      }
    }
    if (exact) ++hits;
    if (!exact) expect = oracle::knn_mean(entries, q, k);
    const double got = *store.estimate(q, 0, k);
    worst = std::max(worst, std::abs(got - expect));
  }
  return {worst <= 1e-9, "1000 cases (" + std::to_string(hits) + " exact hits), max |error| " + fmt(worst)};
}

Outcome monotonicity() {
  mfec::Rng rng(1002);
  std::size_t checks = 0, violations = 0;
  for (int seq = 0; seq < 10000; ++seq) {
    const std::size_t pool = 1 + rng.uniform_index(6);
    const std::size_t cap = 1 + rng.uniform_index(8);
    mfec::EpisodicValueStore store(2, 1, cap);
    std::map<std::pair<std::size_t, std::size_t>, double> last;
    const std::size_t len = 1 + rng.uniform_index(30);
    for (std::size_t i = 0; i < len; ++i) {
      const Vec key{static_cast<double>(rng.uniform_index(pool))};
      store.update(key, rng.uniform_index(2), std::round(rng.normal() * 10.0) / 4.0);
      for (std::size_t s = 0; s < pool; ++s) {
        for (std::size_t a = 0; a < 2; ++a) {
          const Vec probe{static_cast<double>(s)};
          const auto slot = store.buffer(a).find(probe);
          if (!slot) {
            last.erase({s, a});
            continue;
          }
          const double now = *store.estimate(probe, a, 1);
          const auto it = last.find({s, a});
          if (it != last.end()) {
            ++checks;
            if (now < it->second) ++violations;
          }
          last[{s, a}] = now;
        }
      }
    }
  }
  return {violations == 0 && checks > 0,
          "10000 sequences, " + std::to_string(checks) + " exact-hit comparisons, " + std::to_string(violations) +
              " decreases"};
}

Outcome lru() {
  mfec::Rng rng(1003);
  std::size_t sequences = 0, evictions = 0, mismatches = 0;
  for (std::size_t cap = 1; cap <= 8; ++cap) {
    for (std::size_t len = 1; len <= 64; ++len) {
      for (int rep = 0; rep < 8; ++rep) {
        ++sequences;
        mfec::EpisodicValueStore store(1, 1, cap);
        oracle::LruModel model(cap);
        const std::size_t pool = cap + 1 + rng.uniform_index(2 * cap + 2);
        for (std::size_t i = 0; i < len; ++i) {
          const Vec key{static_cast<double>(rng.uniform_index(pool))};
          const double ret = std::round(rng.normal() * 4.0);
          auto before = store.buffer(0).entries();
          store.update(key, 0, ret);
          const auto expected = model.write(key, ret, true);
          const auto after = store.buffer(0).entries();
          std::optional<Vec> evicted;
          for (const auto& e : before) {
            const bool kept = std::any_of(after.begin(), after.end(), [&](const auto& x) { return x.key == e.key; });
            if (!kept) evicted = e.key;
          }
          if (evicted) ++evictions;
          if (evicted != expected) ++mismatches;
          if (after.size() != model.slots().size()) {
            ++mismatches;
            continue;
          }
          for (std::size_t j = 0; j < after.size(); ++j) {
            if (after[j].key != model.slots()[j].key || after[j].value != model.slots()[j].value) ++mismatches;
          }
        }
      }
    }
  }
  return {mismatches == 0 && evictions > 0, std::to_string(sequences) + " sequences, " + std::to_string(evictions) +
                                                " evictions, " + std::to_string(mismatches) + " mismatches"};
}

Outcome jl() {
  double worst_median = 0.0, worst_rank = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    mfec::Rng rng(mfec::mix_seed(seed, 77));
    // Each point gets a log-uniform scale in [1, 10] so pairwise distances
    // span a range and their ranking is a meaningful target.
    std::vector<Vec> pts(100, Vec(1024));
    for (auto& p : pts) {
      const double scale = std::exp(rng.uniform() * std::log(10.0));
      for (double& x : p) x = scale * rng.normal();
    }
    const auto m = mfec::make_projection(1024, 64, seed);
    worst_median = std::max(worst_median, mfec::jl_distortion(m, pts).median);
    worst_rank = std::min(worst_rank, mfec::distance_rank_correlation(m, pts));
  }
  return {worst_median < 0.35 && worst_rank > 0.9,
          "10 seeds x 100 scaled Gaussian points, worst median distortion " + fmt(worst_median) + " (< 0.35), worst rank correlation " +
              fmt(worst_rank) + " (> 0.9)"};
}

Outcome gradient_check() {
  double worst = 0.0;
  std::size_t models = 0, skipped = 0;
  for (std::uint64_t seed = 0; models < 40 && seed < 400; ++seed) {
    if (const auto err = oracle::vae_gradient_error(seed)) {
      worst = std::max(worst, *err);
      ++models;
    } else {
      ++skipped;
    }
  }
  return {models >= 20 && worst < 1e-4, std::to_string(models) + " models (" + std::to_string(skipped) +
                                            " skipped near kinks), max relative error " + fmt(worst)};
}

Outcome vae_progress() {
  mfec::GridWorld env(mfec::default_forage_spec());
  mfec::Rng rng(1006);
  mfec::TrainingCorpus corpus;
  env.reset(0);
  while (corpus.frames.size() < 2000) {
    if (env.done()) env.reset(rng.next_u64());
    corpus.frames.push_back(mfec::to_grayscale(env.step(rng.uniform_index(4)).observation));
  }
  auto model = mfec::VaeModel::initialized(64, 32, 8, 1006);
  mfec::TrainOptions opt;
  opt.steps = 500;
  opt.batch_size = 32;
  opt.step_size = 1e-3;
  opt.seed = 1006;
  const auto log = mfec::train(model, corpus, opt);
  const double final_ma = mfec::moving_average(log.loss, 50).back();
  double first50 = 0.0;
  for (std::size_t i = 0; i < 50; ++i) first50 += log.loss[i] / 50.0;
  return {final_ma < log.loss.front() && final_ma < first50,
          "initial loss " + fmt(log.loss.front()) + ", first-50 mean " + fmt(first50) + ", final 50-step average " +
              fmt(final_ma)};
}

std::vector<double> trailing_mean(const mfec::AggregateCurve& c, std::size_t window) {
  std::vector<double> r;
  for (const auto& row : c.rows) r.push_back(row.mean_reward);
  return mfec::moving_average(r, window);
}

Outcome fast_learning() {
  const auto spec = mfec::default_forage_spec();
  const double optimum = static_cast<double>(oracle::forage_optimum(spec));
  const auto ec = mfec::run_experiment(mfec::parse_config(
      "task=forage\nstart_mode=fixed\nembedding=projection\nprojection_dim=64\nk=11\ngamma=0.99\nepsilon=0.2\n"
      "episodes=200\nseeds=1,2,3,4,5\n"));
  const auto q = mfec::run_experiment(mfec::parse_config(
      "task=forage\nstart_mode=fixed\nagent=qlearning\nalpha=0.05,0.1,0.3\ngamma=0.99\nq_epsilon=0.2\n"
      "episodes=200\nseeds=1,2,3,4,5\n"));
  const auto smooth = trailing_mean(ec.aggregate, 10);
  std::optional<std::size_t> reached;
  for (std::size_t i = 0; i < smooth.size() && !reached; ++i) {
    if (smooth[i] >= 0.9 * optimum) reached = i + 1;
  }
  std::size_t blocks_won = 0;
  double ec100 = 0.0, q100 = 0.0;
  for (std::size_t b = 0; b < 10; ++b) {
    double e = 0.0, r = 0.0;
    for (std::size_t i = b * 10; i < b * 10 + 10; ++i) {
      e += ec.aggregate.rows[i].mean_reward;
      r += q.aggregate.rows[i].mean_reward;
    }
    if (e >= r) ++blocks_won;
    ec100 += e / 100.0;
    q100 += r / 100.0;
  }
  return {reached.has_value() && blocks_won == 10,
          "optimum " + fmt(optimum) + ", 10-episode mean reaches 90% at episode " +
              (reached ? std::to_string(*reached) : std::string("never")) + "; episodes 1-100 mean EC " + fmt(ec100) +
              " vs Q (alpha " + fmt(q.tuned_alpha.value_or(-1)) + ") " + fmt(q100) + ", EC >= Q in " +
              std::to_string(blocks_won) + "/10 blocks"};
}

double tail_mean(const mfec::AggregateCurve& c, double fraction) {
  const std::size_t n = c.rows.size();
  const auto take = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * fraction));
  double s = 0.0;
  for (std::size_t i = n - take; i < n; ++i) s += c.rows[i].mean_reward;
  return s / static_cast<double>(take);
}

Outcome sparse_reward() {
  const auto ec = mfec::run_experiment(mfec::parse_config(
      "task=double-t-maze\nembedding=projection\nprojection_dim=64\nepsilon=0.2\nepisodes=2000\nseeds=1,2,3,4,5\n"));
  const auto q = mfec::run_experiment(mfec::parse_config(
      "task=double-t-maze\nagent=qlearning\nalpha=0.05,0.1,0.3\nq_epsilon=0.2\nepisodes=2000\nseeds=1,2,3,4,5\n"));
  const double e = tail_mean(ec.aggregate, 0.2), r = tail_mean(q.aggregate, 0.2);
  return {e > 0.0 && r <= 0.0, "last 20% mean return: EC " + fmt(e) + " (> 0), tabular Q (alpha " +
                                   fmt(q.tuned_alpha.value_or(-1)) + ") " + fmt(r) + " (<= 0)"};
}

Outcome match_regimes() {
  const std::string base =
      "task=forage\nembedding=projection\nprojection_dim=64\nk=11\ngamma=0.99\nepsilon=0.2\nepisodes=60\n"
      "seeds=1,2,3,4,5\n";
  const auto fixed = mfec::run_experiment(mfec::parse_config(base + "start_mode=fixed\n"));
  const auto random = mfec::run_experiment(mfec::parse_config(base + "start_mode=randomized\n"));
  double fixed_min = 1.0, random_max = 0.0;
  for (const auto& run : fixed.runs) fixed_min = std::min(fixed_min, run.rows.back().match_rate.value_or(0.0));
  for (const auto& run : random.runs) random_max = std::max(random_max, run.rows.back().match_rate.value_or(1.0));
  return {fixed_min >= 0.10 && random_max <= 0.01, "after 60 episodes: fixed-start min match rate " +
                                                       fmt(fixed_min) + " (>= 0.10), randomized max " +
                                                       fmt(random_max) + " (<= 0.01)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome k_sweep() {
  auto cfg = mfec::parse_config(
      "task=forage\nstart_mode=fixed\nembedding=vae\ngamma=0.99\nepsilon=0.2\nepisodes=200\nseeds=1,2,3,4,5\n"
      "sweep_k=1,5,11,50\n");
  const auto sweep = mfec::run_k_sweep(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "mfec_acceptance_sweep";
  std::filesystem::remove_all(dir);
  mfec::write_sweep(sweep, dir);
  const std::string csv = slurp(dir / "sweep.csv");
  std::istringstream lines(csv);
  std::string header, line;
  std::getline(lines, header);
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  bool files = true;
  for (std::size_t k : cfg.sweep_k) {
    const auto sub = dir / ("k_" + std::to_string(k));
    files = files && std::filesystem::exists(sub / "aggregate.csv");
    for (std::uint64_t s : cfg.seeds) files = files && std::filesystem::exists(sub / ("seed_" + std::to_string(s) + ".csv"));
  }
  std::filesystem::remove_all(dir);
  const bool schema = header == "k,final_score_mean,final_score_sem" && rows == 4 && files;
  double best_ratio = 0.0;
  std::string best_pair = "none";
  std::string scores;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& a = sweep.points[i];
    scores += (i ? ", " : "") + std::string("k=") + std::to_string(a.k) + ":" + fmt(a.score.mean, 3);
    for (std::size_t j = i + 1; j < sweep.points.size(); ++j) {
      const auto& b = sweep.points[j];
      const double pooled = std::sqrt(a.score.sem * a.score.sem + b.score.sem * b.score.sem);
      const double ratio = std::abs(a.score.mean - b.score.mean) / pooled;
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_pair = "k=" + std::to_string(a.k) + " vs k=" + std::to_string(b.k);
      }
    }
  }
  return {schema && best_ratio > 1.0, std::string(schema ? "schema ok" : "schema BROKEN") + "; final scores " + scores +
                                          "; largest gap " + fmt(best_ratio, 3) + " pooled SEM (" + best_pair + ")"};
}

std::map<std::string, std::string> tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "mfec_acceptance_determinism";
  std::filesystem::remove_all(root);
  const std::vector<std::string> configs = {
      "task=forage-avoid\nstart_mode=randomized\nembedding=projection\nprojection_dim=32\nepsilon=0.1\nepisodes=40\n"
      "seeds=3,4,5\n",
      "task=double-t-maze\nagent=qlearning\nepisodes=40\nseeds=1,2\n",
      "task=forage\nembedding=vae\nvae_frames=500\nvae_steps=100\nepisodes=20\nseeds=1,2\nsweep_k=1,11\n"};
  const auto original = mfec::simd::active_backend();
  auto produce = [&](const std::filesystem::path& dir) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto cfg = mfec::parse_config(configs[i]);
      const auto out = dir / ("config_" + std::to_string(i));
      if (cfg.sweep_k.empty()) {
        mfec::write_metrics(mfec::run_experiment(cfg), out);
      } else {
        mfec::write_sweep(mfec::run_k_sweep(cfg), out);
      }
    }
    return tree(dir);
  };
  const auto first = produce(root / "a");
  const auto second = produce(root / "b");
  mfec::simd::set_backend(mfec::simd::Backend::scalar);
  const auto scalar = produce(root / "c");
  mfec::simd::set_backend(original);
  std::filesystem::remove_all(root);
  const bool rerun = first == second && !first.empty();
  const bool across = first == scalar;
  return {rerun && across, std::to_string(first.size()) + " CSV files; rerun " +
                               (rerun ? "byte-identical" : "DIFFERS") + "; " +
                               std::string(mfec::simd::backend_name(original)) + " vs scalar kernels " +
                               (across ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfec acceptance suite"};
  std::vector<int> only;
  app.add_option("--criterion,-c", only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "knn-oracle-equivalence", 5, knn_oracle},
      {2, "max-update-monotonicity", 5, monotonicity},
      {3, "lru-eviction-replay", 5, lru},
      {4, "jl-distortion", 30, jl},
      {5, "vae-gradient-check", 30, gradient_check},
      {6, "vae-training-progress", 120, vae_progress},
      {7, "fast-learning-forage", 120, fast_learning},
      {8, "sparse-reward-double-t-maze", 300, sparse_reward},
      {9, "exact-match-regimes", 120, match_regimes},
      {10, "k-sweep-vae", 600, k_sweep},
      {11, "determinism", 600, determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::cout << "simd backend: " << mfec::simd::backend_name(mfec::simd::active_backend()) << '\n';
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << fmt(secs, 3) << " s of " << fmt(c.budget_s, 3) << " s" << (in_time ? "" : ", OVER BUDGET") << ")"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
