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

// Dense variational autoencoder over flattened frames.
//
// Encoder: x (D) -> ReLU(H) -> [mu_z | logstd_z] (2L)
// Decoder: z (L) -> ReLU(H) -> [mu_x | logstd_x] (2D)
//
// Posterior and likelihood are diagonal Gaussians, the prior is N(0, I).
// The likelihood standard deviation is clamped from below at sigma_floor;
// the clamp passes no gradient. Gradients are derived by hand and checked
// against finite differences in the tests.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "mfec/embeddings.hpp"

namespace mfec {

class VaeModel {
 public:
  enum class Block : std::size_t { enc_w1, enc_b1, enc_w2, enc_b2, dec_w1, dec_b1, dec_w2, dec_b2 };
  static constexpr std::size_t kBlockCount = 8;
  static constexpr double kDefaultSigmaFloor = 0.05;

  /// All parameters zero.
  VaeModel(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim);

  /// Gaussian initialisation (std sqrt(2/fan_in) for ReLU layers, sqrt(1/fan_in)
  /// for output layers), zero biases.
  static VaeModel initialized(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim,
                              std::uint64_t seed);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  double sigma_floor() const noexcept { return sigma_floor_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::span<double> block(Block b);
  std::span<const double> block(Block b) const;
  /// (rows, cols) of a block; biases are (n, 1).
  std::pair<std::size_t, std::size_t> block_shape(Block b) const;
  std::size_t block_offset(Block b) const { return offsets_[static_cast<std::size_t>(b)]; }
  static std::string_view block_name(Block b);
  /// Block containing flat parameter index i.
  Block block_of(std::size_t index) const;

  /// "EC-VAE v1 D=<..> H=<..> L=<..>" then one "<name> <rows> <cols>"
  /// section per block, rows of decimal values.
  void save(std::ostream& out) const;
  static VaeModel load(std::istream& in);

 private:
  std::size_t input_dim_;
  std::size_t hidden_dim_;
  std::size_t latent_dim_;
  double sigma_floor_ = kDefaultSigmaFloor;
  std::array<std::size_t, kBlockCount + 1> offsets_{};
  std::vector<double> params_;
};

struct Posterior {
  std::vector<double> mu;
  std::vector<double> logstd;
};

struct Likelihood {
  std::vector<double> mu;
  std::vector<double> sigma;  // after flooring
};

Posterior encode(const VaeModel& model, std::span<const double> x);
Likelihood decode(const VaeModel& model, std::span<const double> z);

/// z = mu + exp(logstd) * noise.
std::vector<double> sample_latent(std::span<const double> mu, std::span<const double> logstd,
                                  std::span<const double> noise);

/// KL(N(mu, exp(logstd)^2) || N(0, 1)) summed over dimensions.
double kl_term(std::span<const double> mu, std::span<const double> logstd);

/// Gaussian negative log-likelihood of x under the decoded likelihood.
double recon_nll(const VaeModel& model, std::span<const double> x, std::span<const double> z);

struct ElboResult {
  double loss = 0.0;
  double kl = 0.0;
  double nll = 0.0;
  std::vector<double> grad;  // same layout as VaeModel::params()
};

/// Single-sample loss and analytic gradient. Throws NumericalFailure naming
/// the first non-finite parameter block when the loss is not finite.
ElboResult elbo_loss(const VaeModel& model, std::span<const double> x, std::span<const double> noise);

/// Loss only; same value as elbo_loss().loss.
double elbo_value(const VaeModel& model, std::span<const double> x, std::span<const double> noise);

struct RmsPropState {
  std::vector<double> mean_square;
  double decay = 0.9;
  double step_size = 1e-5;
  double epsilon = 1e-8;
};

/// v <- decay*v + (1-decay)*g^2;  theta <- theta - step*g/sqrt(v + eps).
void rmsprop_step(RmsPropState& state, std::span<double> params, std::span<const double> grads);

struct TrainingCorpus {
  std::vector<ObservationFrame> frames;
};

struct TrainOptions {
  std::size_t steps = 1000;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  double step_size = 1e-5;
  double decay = 0.9;
  double epsilon = 1e-8;
};

struct TrainingLog {
  std::vector<double> loss;  // minibatch mean loss before each step
};

TrainingLog train(VaeModel& model, const TrainingCorpus& corpus, const TrainOptions& options);

/// Trailing moving average with window `window` (shorter at the start).
std::vector<double> moving_average(std::span<const double> series, std::size_t window);

/// mu_z concatenated with logstd_z.
Embedding vae_features(const VaeModel& model, std::span<const double> x);

}  // namespace mfec
