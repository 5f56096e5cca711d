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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "mfec/environment.hpp"
#include "mfec/errors.hpp"
#include "mfec/rng.hpp"
#include "mfec/vae.hpp"
#include "oracles.hpp"

namespace {

using Vec = std::vector<double>;
using B = mfec::VaeModel::Block;

mfec::TrainingCorpus gridworld_corpus(std::size_t frames, std::uint64_t seed) {
  mfec::GridWorld env(mfec::default_forage_spec());
  mfec::Rng rng(seed);
  mfec::TrainingCorpus corpus;
  env.reset(seed);
  while (corpus.frames.size() < frames) {
    if (env.done()) env.reset(rng.next_u64());
    corpus.frames.push_back(mfec::to_grayscale(env.step(rng.uniform_index(4)).observation));
  }
  return corpus;
}

TEST(Vae, ZeroNetworkEncodesToZero) {
  const mfec::VaeModel m(4, 3, 2);
  const auto post = mfec::encode(m, Vec{0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(post.mu, Vec(2, 0.0));
  EXPECT_EQ(post.logstd, Vec(2, 0.0));
  EXPECT_EQ(mfec::vae_features(m, Vec{0.1, 0.2, 0.3, 0.4}), Vec(4, 0.0));
}

TEST(Vae, EncodeIsDeterministic) {
  const auto m = mfec::VaeModel::initialized(6, 5, 3, 1);
  const Vec x{0.1, 0.9, 0.3, 0.0, 1.0, 0.5};
  const auto a = mfec::encode(m, x), b = mfec::encode(m, x);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.logstd, b.logstd);
}

TEST(Vae, MatchesLayerByLayerOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = mfec::VaeModel::initialized(4, 3, 2, seed);
    mfec::Rng rng(seed + 50);
    Vec x(4), noise(2);
    for (double& v : x) v = rng.uniform();
    for (double& v : noise) v = rng.normal();
    const auto ref = oracle::vae_forward(m, x, noise);
    const auto post = mfec::encode(m, x);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(post.mu[i], ref.mu_z[i], 1e-12);
      EXPECT_NEAR(post.logstd[i], ref.logstd_z[i], 1e-12);
    }
    const auto lk = mfec::decode(m, ref.z);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(lk.mu[i], ref.mu_x[i], 1e-12);
      EXPECT_NEAR(lk.sigma[i], ref.sigma_x[i], 1e-12);
    }
    EXPECT_NEAR(mfec::elbo_value(m, x, noise), ref.loss, 1e-10);
    const auto full = mfec::elbo_loss(m, x, noise);
    EXPECT_NEAR(full.kl, ref.kl, 1e-12);
    EXPECT_NEAR(full.nll, ref.nll, 1e-10);
  }
}

TEST(Vae, EncodeRejectsWrongDimension) {
  const mfec::VaeModel m(4, 3, 2);
  EXPECT_THROW(mfec::encode(m, Vec(3)), mfec::InvalidInput);
  EXPECT_THROW(mfec::vae_features(m, Vec(5)), mfec::InvalidInput);
  EXPECT_THROW(mfec::recon_nll(m, Vec(4), Vec(3)), mfec::InvalidInput);
}

TEST(Vae, SampleLatentExamples) {
  EXPECT_EQ(mfec::sample_latent(Vec{1.5}, Vec{0.3}, Vec{0.0}), Vec{1.5});
  EXPECT_EQ(mfec::sample_latent(Vec{1.5}, Vec{0.0}, Vec{0.25}), Vec{1.75});
  EXPECT_NEAR(mfec::sample_latent(Vec{1.0}, Vec{std::log(2.0)}, Vec{0.5})[0], 2.0, 1e-15);
}

TEST(Vae, KlExamples) {
  EXPECT_EQ(mfec::kl_term(Vec{0.0}, Vec{0.0}), 0.0);
  EXPECT_NEAR(mfec::kl_term(Vec{1.0}, Vec{0.0}), 0.5, 1e-15);
  mfec::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_GE(mfec::kl_term(Vec{rng.normal(), rng.normal() * 1e-9}, Vec{rng.normal(), rng.normal() * 1e-9}), 0.0);
  }
  EXPECT_THROW(mfec::kl_term(Vec{std::nan("")}, Vec{0.0}), mfec::InvalidInput);
}

TEST(Vae, ReconNllExamples) {
  mfec::VaeModel m(1, 1, 1);
  EXPECT_NEAR(mfec::recon_nll(m, Vec{0.0}, Vec{0.0}), 0.5 * std::log(2.0 * M_PI), 1e-15);
  EXPECT_NEAR(mfec::recon_nll(m, Vec{0.0}, Vec{0.0}), 0.918939, 1e-6);

  m.block(B::dec_b2)[1] = -10.0;
  const double floored = 0.5 * std::log(2.0 * M_PI) + std::log(0.05) + 0.09 / (2.0 * 0.0025);
  EXPECT_NEAR(mfec::recon_nll(m, Vec{0.3}, Vec{0.0}), floored, 1e-12);
  EXPECT_NEAR(mfec::decode(m, Vec{0.0}).sigma[0], 0.05, 1e-15);

  m.block(B::dec_b2)[1] = 0.0;
  double prev = mfec::recon_nll(m, Vec{0.0}, Vec{0.0});
  for (double x : {0.1, 0.2, 0.5, 1.0}) {
    const double now = mfec::recon_nll(m, Vec{x}, Vec{0.0});
    EXPECT_GT(now, prev);
    prev = now;
  }
}

TEST(Vae, LossBoundsAndDeterminism) {
  const auto m = mfec::VaeModel::initialized(8, 4, 2, 5);
  const Vec x{0, 0.2, 0.4, 0.6, 0.8, 1, 0.5, 0.1};
  const Vec noise{0.3, -1.2};
  const auto a = mfec::elbo_loss(m, x, noise), b = mfec::elbo_loss(m, x, noise);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
  const auto z = mfec::sample_latent(mfec::encode(m, x).mu, mfec::encode(m, x).logstd, noise);
  EXPECT_GE(a.loss, mfec::recon_nll(m, x, z));
}

TEST(Vae, GradientMatchesFiniteDifferences) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; checked < 24 && seed < 200; ++seed) {
    if (const auto err = oracle::vae_gradient_error(seed)) {
      EXPECT_LT(*err, 1e-4) << "seed " << seed;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 24u);
}

TEST(Vae, NonFiniteLossNamesABlock) {
  auto m = mfec::VaeModel::initialized(4, 3, 2, 1);
  m.block(B::dec_w2)[0] = std::numeric_limits<double>::infinity();
  try {
    (void)mfec::elbo_loss(m, Vec{0.1, 0.2, 0.3, 0.4}, Vec{0.0, 0.0});
    FAIL() << "expected NumericalFailure";
  } catch (const mfec::NumericalFailure& e) {
    EXPECT_EQ(e.block(), "dec_w2");
  }
}

TEST(Vae, RmsPropZeroGradient) {
  mfec::RmsPropState st;
  st.mean_square = {4.0, 1.0};
  Vec p{1.0, -2.0};
  mfec::rmsprop_step(st, p, Vec{0.0, 0.0});
  EXPECT_EQ(p, (Vec{1.0, -2.0}));
  EXPECT_DOUBLE_EQ(st.mean_square[0], 3.6);
  EXPECT_DOUBLE_EQ(st.mean_square[1], 0.9);
}

TEST(Vae, RmsPropFirstStep) {
  mfec::RmsPropState st;
  st.step_size = 1e-3;
  Vec p{0.5, 0.5, 0.5};
  const Vec g{2.0, -0.1, 1e-5};
  mfec::rmsprop_step(st, p, g);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = 0.5 - 1e-3 * g[i] / std::sqrt(0.1 * g[i] * g[i] + 1e-8);
    EXPECT_DOUBLE_EQ(p[i], expect);
    EXPECT_EQ(p[i] < 0.5, g[i] > 0.0);
  }
}

TEST(Vae, RmsPropRejectsNonFinite) {
  mfec::RmsPropState st;
  Vec p{0.0};
  EXPECT_THROW(mfec::rmsprop_step(st, p, Vec{std::nan("")}), mfec::NumericalFailure);
}

TEST(Vae, FeaturesHaveTwiceLatentDim) {
  const auto m = mfec::VaeModel::initialized(10, 8, 32, 1);
  EXPECT_EQ(mfec::vae_features(m, Vec(10, 0.5)).size(), 64u);
}

TEST(Vae, CheckpointRoundTrip) {
  const auto m = mfec::VaeModel::initialized(5, 4, 2, 9);
  std::stringstream ss;
  m.save(ss);
  EXPECT_EQ(ss.str().rfind("EC-VAE v1 D=5 H=4 L=2\n", 0), 0u);
  const auto back = mfec::VaeModel::load(ss);
  EXPECT_TRUE(std::equal(m.params().begin(), m.params().end(), back.params().begin(), back.params().end()));
  std::stringstream bad("EC-VAE v1 D=5 H=4\n");
  EXPECT_THROW(mfec::VaeModel::load(bad), mfec::ParseError);
}

TEST(Vae, EmptyCorpusRejected) {
  mfec::VaeModel m(4, 3, 2);
  EXPECT_THROW(mfec::train(m, mfec::TrainingCorpus{}, mfec::TrainOptions{}), mfec::InvalidInput);
}

TEST(Vae, ConstantCorpusApproachesOptimum) {
  const std::size_t d = 4;
  mfec::TrainingCorpus corpus;
  corpus.frames.assign(16, mfec::ObservationFrame{Vec{0.2, 0.8, 0.5, 1.0}, 1, d, 1});
  auto m = mfec::VaeModel::initialized(d, 8, 2, 3);
  mfec::TrainOptions opt;
  opt.steps = 3000;
  opt.batch_size = 16;
  opt.step_size = 3e-3;
  const auto log = mfec::train(m, corpus, opt);
  const double optimum = static_cast<double>(d) * (0.5 * std::log(2.0 * M_PI) + std::log(0.05));
  const auto smooth = mfec::moving_average(log.loss, 100);
  EXPECT_LT(smooth.back(), optimum + 0.25);
  EXPECT_GT(smooth.back(), optimum - 0.05);
}

TEST(Vae, TrainingIsDeterministicAndMakesProgress) {
  const auto corpus = gridworld_corpus(400, 4);
  auto a = mfec::VaeModel::initialized(64, 32, 8, 2), b = a;
  mfec::TrainOptions opt;
  opt.steps = 500;
  opt.batch_size = 32;
  opt.step_size = 1e-3;
  opt.seed = 6;
  const auto la = mfec::train(a, corpus, opt), lb = mfec::train(b, corpus, opt);
  EXPECT_EQ(la.loss, lb.loss);
  const auto smooth = mfec::moving_average(la.loss, 50);
  EXPECT_LT(smooth.back(), la.loss.front());
}

TEST(Vae, MovingAverage) {
  EXPECT_EQ(mfec::moving_average(Vec{1, 3, 5, 7}, 2), (Vec{1, 2, 4, 6}));
  EXPECT_THROW(mfec::moving_average(Vec{1}, 0), mfec::InvalidInput);
}

}  // namespace
