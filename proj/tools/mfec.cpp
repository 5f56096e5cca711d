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

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mfec/errors.hpp"
#include "mfec/harness.hpp"
#include "mfec/simd/kernels.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mfec::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_summary(const mfec::ExperimentResult& result) {
  for (const auto& run : result.runs) {
    if (run.failure) {
      std::cout << "seed " << run.seed << ": FAILED " << *run.failure << '\n';
      continue;
    }
    const auto& last = run.rows.back();
    std::cout << "seed " << run.seed << ": " << run.rows.size() << " episodes, " << last.frames
              << " frames, final score " << mfec::final_score(run);
    if (last.match_rate) std::cout << ", match rate " << *last.match_rate;
    std::cout << '\n';
  }
  if (result.tuned_alpha) std::cout << "tuned alpha " << *result.tuned_alpha << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free episodic control experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment or a k sweep from a config file");
  std::string config_path;
  std::vector<std::size_t> sweep_k;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  run->add_option("--config", config_path, "key=value experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--sweep-k", sweep_k, "comma-separated k values")->delimiter(',');
  run->add_option("--out", out_dir, "output directory (overrides 'out')");
  run->add_option("--seeds", seeds, "comma-separated seeds (overrides 'seeds')")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    mfec::ExperimentConfig config = mfec::parse_config(read_file(config_path));
    if (!sweep_k.empty()) config.sweep_k = sweep_k;
    if (!seeds.empty()) config.seeds = seeds;
    if (!out_dir.empty()) config.output_path = out_dir;
    config.validate();
    std::cerr << "simd backend: " << mfec::simd::backend_name(mfec::simd::active_backend()) << '\n';

    if (config.sweep_k.empty()) {
      const auto result = mfec::run_experiment(config);
      mfec::write_metrics(result, config.output_path);
      print_summary(result);
    } else {
      const auto sweep = mfec::run_k_sweep(config);
      mfec::write_sweep(sweep, config.output_path);
      for (const auto& p : sweep.points) {
        std::cout << "k=" << p.k << " final score " << p.score.mean << " +/- " << p.score.sem << '\n';
      }
    }
    std::cout << "wrote " << config.output_path << '\n';
  } catch (const mfec::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
