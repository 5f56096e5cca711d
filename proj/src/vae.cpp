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

#include "mfec/vae.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include "mfec/errors.hpp"
#include "mfec/rng.hpp"
#include "mfec/simd/kernels.hpp"
#include "mfec/text_io.hpp"

namespace mfec {

namespace {

constexpr std::array<std::string_view, VaeModel::kBlockCount> kBlockNames = {
    "enc_w1", "enc_b1", "enc_w2", "enc_b2", "dec_w1", "dec_b1", "dec_w2", "dec_b2"};

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw InvalidInput(std::string(what) + ": expected dimension " + std::to_string(n) + ", got " +
                       std::to_string(v.size()));
  }
}

// out = W in + b, W row-major (rows x cols).
void dense(std::span<const double> w, std::span<const double> b, std::span<const double> in, std::span<double> out) {
  const auto& kern = simd::kernels();
  const std::size_t cols = in.size();
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = kern.dot(w.data() + r * cols, in.data(), cols) + b[r];
}

// grad_w += delta (x) in; grad_b += delta; grad_in (if given) = W^T delta.
void dense_backward(std::span<const double> w, std::span<const double> in, std::span<const double> delta,
                    std::span<double> grad_w, std::span<double> grad_b, std::span<double> grad_in) {
  const auto& kern = simd::kernels();
  const std::size_t cols = in.size();
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t r = 0; r < delta.size(); ++r) {
    const double d = delta[r];
    grad_b[r] += d;
    if (d == 0.0) continue;
    kern.axpy(d, in.data(), grad_w.data() + r * cols, cols);
    if (!grad_in.empty()) kern.axpy(d, w.data() + r * cols, grad_in.data(), cols);
  }
}

struct Forward {
  std::vector<double> enc_pre, enc_hidden, enc_out;  // enc_out = [mu | logstd]
  std::vector<double> z;
  std::vector<double> dec_pre, dec_hidden, dec_out;  // dec_out = [mu_x | logstd_x]
  double kl = 0.0;
  double nll = 0.0;
};

Forward forward(const VaeModel& m, std::span<const double> x, std::span<const double> noise) {
  using B = VaeModel::Block;
  const std::size_t d = m.input_dim(), h = m.hidden_dim(), l = m.latent_dim();
  Forward f;
  f.enc_pre.resize(h);
  dense(m.block(B::enc_w1), m.block(B::enc_b1), x, f.enc_pre);
  f.enc_hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) f.enc_hidden[i] = std::max(f.enc_pre[i], 0.0);
  f.enc_out.resize(2 * l);
  dense(m.block(B::enc_w2), m.block(B::enc_b2), f.enc_hidden, f.enc_out);
  const std::span<const double> mu(f.enc_out.data(), l), logstd(f.enc_out.data() + l, l);
  f.z = sample_latent(mu, logstd, noise);
  f.kl = kl_term(mu, logstd);

  f.dec_pre.resize(h);
  dense(m.block(B::dec_w1), m.block(B::dec_b1), f.z, f.dec_pre);
  f.dec_hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) f.dec_hidden[i] = std::max(f.dec_pre[i], 0.0);
  f.dec_out.resize(2 * d);
  dense(m.block(B::dec_w2), m.block(B::dec_b2), f.dec_hidden, f.dec_out);

  const double log_floor = std::log(m.sigma_floor());
  double nll = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double log_sigma = std::max(f.dec_out[d + i], log_floor);
    const double sigma = std::exp(log_sigma);
    const double r = x[i] - f.dec_out[i];
    nll += kHalfLog2Pi + log_sigma + r * r / (2.0 * sigma * sigma);
  }
  f.nll = nll;
  return f;
}

[[noreturn]] void raise_non_finite(const VaeModel& m, const char* what) {
  for (std::size_t b = 0; b < VaeModel::kBlockCount; ++b) {
    const auto blk = m.block(static_cast<VaeModel::Block>(b));
    if (!std::all_of(blk.begin(), blk.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericalFailure(std::string(kBlockNames[b]), what);
    }
  }
  throw NumericalFailure("loss", what);
}

}  // namespace

VaeModel::VaeModel(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), latent_dim_(latent_dim) {
  if (input_dim == 0 || hidden_dim == 0 || latent_dim == 0) throw InvalidInput("vae dimensions must be positive");
  const std::size_t d = input_dim, h = hidden_dim, l = latent_dim;
  const std::array<std::size_t, kBlockCount> sizes = {h * d, h, 2 * l * h, 2 * l, h * l, h, 2 * d * h, 2 * d};
  offsets_[0] = 0;
  for (std::size_t b = 0; b < kBlockCount; ++b) offsets_[b + 1] = offsets_[b] + sizes[b];
  params_.assign(offsets_.back(), 0.0);
}

VaeModel VaeModel::initialized(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim,
                               std::uint64_t seed) {
  VaeModel m(input_dim, hidden_dim, latent_dim);
  Rng rng(seed);
  const auto fill = [&](Block b, double fan_in, double gain) {
    const double std_dev = std::sqrt(gain / fan_in);
    for (double& w : m.block(b)) w = std_dev * rng.normal();
  };
  fill(Block::enc_w1, static_cast<double>(input_dim), 2.0);
  fill(Block::enc_w2, static_cast<double>(hidden_dim), 1.0);
  fill(Block::dec_w1, static_cast<double>(latent_dim), 2.0);
  fill(Block::dec_w2, static_cast<double>(hidden_dim), 1.0);
  return m;
}

std::span<double> VaeModel::block(Block b) {
  const auto i = static_cast<std::size_t>(b);
  return std::span(params_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> VaeModel::block(Block b) const {
  const auto i = static_cast<std::size_t>(b);
  return std::span(params_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::pair<std::size_t, std::size_t> VaeModel::block_shape(Block b) const {
  const std::size_t d = input_dim_, h = hidden_dim_, l = latent_dim_;
  switch (b) {
    case Block::enc_w1: return {h, d};
    case Block::enc_b1: return {h, 1};
    case Block::enc_w2: return {2 * l, h};
    case Block::enc_b2: return {2 * l, 1};
    case Block::dec_w1: return {h, l};
    case Block::dec_b1: return {h, 1};
    case Block::dec_w2: return {2 * d, h};
    case Block::dec_b2: return {2 * d, 1};
  }
  return {0, 0};
}

std::string_view VaeModel::block_name(Block b) { return kBlockNames[static_cast<std::size_t>(b)]; }

VaeModel::Block VaeModel::block_of(std::size_t index) const {
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    if (index < offsets_[b + 1]) return static_cast<Block>(b);
  }
  throw InvalidInput("parameter index out of range");
}

void VaeModel::save(std::ostream& out) const {
  out << "EC-VAE v1 D=" << input_dim_ << " H=" << hidden_dim_ << " L=" << latent_dim_ << '\n';
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto blk = static_cast<Block>(b);
    const auto [rows, cols] = block_shape(blk);
    out << kBlockNames[b] << ' ' << rows << ' ' << cols << '\n';
    const auto values = block(blk);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (c) out << ' ';
        out << text::format_double(values[r * cols + c]);
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing vae checkpoint");
}

VaeModel VaeModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "header", "missing vae checkpoint header");
  const auto f = text::split(text::trim(line), ' ');
  if (f.size() != 5 || f[0] != "EC-VAE" || f[1] != "v1" || !f[2].starts_with("D=") || !f[3].starts_with("H=") ||
      !f[4].starts_with("L=")) {
    throw ParseError(1, "header", "expected 'EC-VAE v1 D=<..> H=<..> L=<..>'");
  }
  const auto d = text::parse_uint(f[2].substr(2));
  const auto h = text::parse_uint(f[3].substr(2));
  const auto l = text::parse_uint(f[4].substr(2));
  if (!d || !h || !l) throw ParseError(1, "header", "bad dimensions");
  VaeModel m(*d, *h, *l);
  std::size_t line_no = 1;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto blk = static_cast<Block>(b);
    const auto [rows, cols] = m.block_shape(blk);
    if (!std::getline(in, line)) throw ParseError(line_no + 1, std::string(kBlockNames[b]), "missing section");
    ++line_no;
    const auto head = text::split(text::trim(line), ' ');
    if (head.size() != 3 || head[0] != kBlockNames[b] || text::parse_uint(head[1]) != rows ||
        text::parse_uint(head[2]) != cols) {
      throw ParseError(line_no, std::string(kBlockNames[b]), "bad section header");
    }
    auto values = m.block(blk);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw ParseError(line_no + 1, std::string(kBlockNames[b]), "missing row");
      ++line_no;
      const auto cells = text::split(text::trim(line), ' ');
      if (cells.size() != cols) throw ParseError(line_no, std::string(kBlockNames[b]), "wrong column count");
      for (std::size_t c = 0; c < cols; ++c) {
        const auto v = text::parse_double(cells[c]);
        if (!v || !std::isfinite(*v)) throw ParseError(line_no, std::string(kBlockNames[b]), "bad value");
        values[r * cols + c] = *v;
      }
    }
  }
  return m;
}

Posterior encode(const VaeModel& model, std::span<const double> x) {
  using B = VaeModel::Block;
  require_size(x, model.input_dim(), "encode");
  const std::size_t h = model.hidden_dim(), l = model.latent_dim();
  std::vector<double> hidden(h), out(2 * l);
  dense(model.block(B::enc_w1), model.block(B::enc_b1), x, hidden);
  for (double& v : hidden) v = std::max(v, 0.0);
  dense(model.block(B::enc_w2), model.block(B::enc_b2), hidden, out);
  return Posterior{std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(l)),
                   std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(l), out.end())};
}

Likelihood decode(const VaeModel& model, std::span<const double> z) {
  using B = VaeModel::Block;
  require_size(z, model.latent_dim(), "decode");
  const std::size_t d = model.input_dim(), h = model.hidden_dim();
  std::vector<double> hidden(h), out(2 * d);
  dense(model.block(B::dec_w1), model.block(B::dec_b1), z, hidden);
  for (double& v : hidden) v = std::max(v, 0.0);
  dense(model.block(B::dec_w2), model.block(B::dec_b2), hidden, out);
  Likelihood lk{std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d)), std::vector<double>(d)};
  for (std::size_t i = 0; i < d; ++i) lk.sigma[i] = std::max(std::exp(out[d + i]), model.sigma_floor());
  return lk;
}

std::vector<double> sample_latent(std::span<const double> mu, std::span<const double> logstd,
                                  std::span<const double> noise) {
  require_size(logstd, mu.size(), "sample_latent logstd");
  require_size(noise, mu.size(), "sample_latent noise");
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(logstd[i]) * noise[i];
  return z;
}

double kl_term(std::span<const double> mu, std::span<const double> logstd) {
  require_size(logstd, mu.size(), "kl_term");
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(logstd[i])) throw InvalidInput("kl_term: non-finite input");
    sum += mu[i] * mu[i] + std::exp(2.0 * logstd[i]) - 1.0 - 2.0 * logstd[i];
  }
  return std::max(0.5 * sum, 0.0);
}

double recon_nll(const VaeModel& model, std::span<const double> x, std::span<const double> z) {
  require_size(x, model.input_dim(), "recon_nll");
  const Likelihood lk = decode(model, z);
  double nll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = lk.sigma[i];
    const double r = x[i] - lk.mu[i];
    nll += 0.5 * std::log(2.0 * std::numbers::pi * s * s) + r * r / (2.0 * s * s);
  }
  return nll;
}

double elbo_value(const VaeModel& model, std::span<const double> x, std::span<const double> noise) {
  require_size(x, model.input_dim(), "elbo input");
  require_size(noise, model.latent_dim(), "elbo noise");
  const Forward f = forward(model, x, noise);
  return f.kl + f.nll;
}

ElboResult elbo_loss(const VaeModel& model, std::span<const double> x, std::span<const double> noise) {
  using B = VaeModel::Block;
  require_size(x, model.input_dim(), "elbo input");
  require_size(noise, model.latent_dim(), "elbo noise");
  const std::size_t d = model.input_dim(), h = model.hidden_dim(), l = model.latent_dim();
  const Forward f = forward(model, x, noise);
  ElboResult res{f.kl + f.nll, f.kl, f.nll, std::vector<double>(model.param_count(), 0.0)};
  if (!std::isfinite(res.loss)) raise_non_finite(model, "non-finite elbo loss");

  const auto grad_block = [&](B b) {
    return std::span(res.grad).subspan(model.block_offset(b), model.block(b).size());
  };

  // Decoder output layer.
  const double log_floor = std::log(model.sigma_floor());
  std::vector<double> d_dec_out(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    const double log_sigma_raw = f.dec_out[d + i];
    const bool clamped = log_sigma_raw < log_floor;
    const double sigma = std::exp(clamped ? log_floor : log_sigma_raw);
    const double inv_var = 1.0 / (sigma * sigma);
    const double r = x[i] - f.dec_out[i];
    d_dec_out[i] = -r * inv_var;
    d_dec_out[d + i] = clamped ? 0.0 : 1.0 - r * r * inv_var;
  }
  std::vector<double> d_dec_hidden(h);
  dense_backward(model.block(B::dec_w2), f.dec_hidden, d_dec_out, grad_block(B::dec_w2), grad_block(B::dec_b2),
                 d_dec_hidden);
  for (std::size_t i = 0; i < h; ++i) {
    if (f.dec_pre[i] <= 0.0) d_dec_hidden[i] = 0.0;
  }
  std::vector<double> d_z(l);
  dense_backward(model.block(B::dec_w1), f.z, d_dec_hidden, grad_block(B::dec_w1), grad_block(B::dec_b1), d_z);

  // Reparameterisation and KL.
  std::vector<double> d_enc_out(2 * l);
  for (std::size_t i = 0; i < l; ++i) {
    const double mu = f.enc_out[i];
    const double logstd = f.enc_out[l + i];
    const double sd = std::exp(logstd);
    d_enc_out[i] = d_z[i] + mu;
    d_enc_out[l + i] = d_z[i] * sd * noise[i] + (sd * sd - 1.0);
  }
  std::vector<double> d_enc_hidden(h);
  dense_backward(model.block(B::enc_w2), f.enc_hidden, d_enc_out, grad_block(B::enc_w2), grad_block(B::enc_b2),
                 d_enc_hidden);
  for (std::size_t i = 0; i < h; ++i) {
    if (f.enc_pre[i] <= 0.0) d_enc_hidden[i] = 0.0;
  }
  dense_backward(model.block(B::enc_w1), x, d_enc_hidden, grad_block(B::enc_w1), grad_block(B::enc_b1), {});
  return res;
}

void rmsprop_step(RmsPropState& state, std::span<double> params, std::span<const double> grads) {
  if (grads.size() != params.size()) throw InvalidInput("rmsprop: gradient shape mismatch");
  if (state.mean_square.empty()) state.mean_square.assign(params.size(), 0.0);
  if (state.mean_square.size() != params.size()) throw InvalidInput("rmsprop: state shape mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericalFailure("gradient", "non-finite gradient in rmsprop step");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& v = state.mean_square[i];
    v = state.decay * v + (1.0 - state.decay) * g * g;
    params[i] -= state.step_size * g / std::sqrt(v + state.epsilon);
  }
}

TrainingLog train(VaeModel& model, const TrainingCorpus& corpus, const TrainOptions& options) {
  if (corpus.frames.empty()) throw InvalidInput("training corpus is empty");
  if (options.batch_size == 0) throw InvalidInput("batch size must be positive");
  for (const auto& frame : corpus.frames) {
    frame.validate();
    require_size(frame.pixels, model.input_dim(), "training frame");
  }

  Rng rng(options.seed);
  RmsPropState opt{{}, options.decay, options.step_size, options.epsilon};
  std::vector<std::size_t> order(corpus.frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainingLog log;
  log.loss.reserve(options.steps);
  std::vector<double> grad(model.param_count());
  std::vector<double> noise(model.latent_dim());
  const double inv_batch = 1.0 / static_cast<double>(options.batch_size);

  for (std::size_t step = 0; step < options.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < options.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
        cursor = 0;
      }
      const auto& x = corpus.frames[order[cursor++]].pixels;
      for (double& n : noise) n = rng.normal();
      const ElboResult r = elbo_loss(model, x, noise);
      loss += r.loss;
      simd::axpy(inv_batch, r.grad, grad);
    }
    log.loss.push_back(loss * inv_batch);
    rmsprop_step(opt, model.params(), grad);
  }
  return log;
}

std::vector<double> moving_average(std::span<const double> series, std::size_t window) {
  if (window == 0) throw InvalidInput("moving average window must be positive");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

Embedding vae_features(const VaeModel& model, std::span<const double> x) {
  Posterior p = encode(model, x);
  Embedding out = std::move(p.mu);
  out.insert(out.end(), p.logstd.begin(), p.logstd.end());
  return out;
}

}  // namespace mfec
