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

#include "mfec/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mfec/errors.hpp"
#include "mfec/rng.hpp"
#include "mfec/simd/kernels.hpp"
#include "mfec/vae.hpp"

namespace mfec {

void ObservationFrame::validate() const {
  if (height * width * channels != pixels.size()) {
    throw InvalidInput("frame shape " + std::to_string(height) + "x" + std::to_string(width) + "x" +
                       std::to_string(channels) + " does not match " + std::to_string(pixels.size()) + " pixels");
  }
  for (double p : pixels) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("pixel outside [0,1]");
  }
}

ObservationFrame to_grayscale(const ObservationFrame& frame) {
  const std::size_t plane = frame.height * frame.width;
  ObservationFrame out{std::vector<double>(plane, 0.0), frame.height, frame.width, 1};
  const double norm = std::ldexp(1.0, static_cast<int>(frame.channels)) - 1.0;
  for (std::size_t c = 0; c < frame.channels; ++c) {
    const double weight = std::ldexp(1.0, static_cast<int>(c)) / norm;
    for (std::size_t i = 0; i < plane; ++i) out.pixels[i] += weight * frame.pixels[c * plane + i];
  }
  for (double& p : out.pixels) p = std::min(p, 1.0);
  return out;
}

ProjectionMatrix::ProjectionMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries, std::uint64_t seed)
    : rows_(rows), cols_(cols), entries_(std::move(entries)), seed_(seed) {
  if (rows == 0 || cols == 0 || entries_.size() != rows * cols) throw InvalidInput("projection shape mismatch");
}

ProjectionMatrix make_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed) {
  if (output_dim == 0 || output_dim >= input_dim) {
    throw InvalidInput("random projection must reduce dimension: F=" + std::to_string(output_dim) +
                       " D=" + std::to_string(input_dim));
  }
  Rng rng(seed);
  std::vector<double> entries(output_dim * input_dim);
  for (double& e : entries) e = rng.normal();
  return ProjectionMatrix(output_dim, input_dim, std::move(entries), seed);
}

Embedding project(const ProjectionMatrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw InvalidInput("projection expects " + std::to_string(m.cols()) + " inputs, got " + std::to_string(x.size()));
  }
  const auto& kern = simd::kernels();
  Embedding out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = kern.dot(m.row(r).data(), x.data(), x.size());
  return out;
}

Embedding project(const ProjectionMatrix& m, const ObservationFrame& x) { return project(m, std::span(x.pixels)); }

namespace {

struct PairDistances {
  std::vector<double> original;
  std::vector<double> projected;
};

PairDistances pairwise(const ProjectionMatrix& m, std::span<const std::vector<double>> points, double scale) {
  std::vector<Embedding> images;
  images.reserve(points.size());
  for (const auto& p : points) images.push_back(project(m, p));
  PairDistances out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = std::sqrt(simd::squared_l2(points[i], points[j]));
      if (d == 0.0) continue;
      out.original.push_back(d);
      out.projected.push_back(scale * std::sqrt(simd::squared_l2(images[i], images[j])));
    }
  }
  if (out.original.empty()) throw UndefinedStatistic("distortion needs at least two distinct points");
  return out;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

DistortionSummary jl_distortion(const ProjectionMatrix& m, std::span<const std::vector<double>> points, bool rescale) {
  const double scale = rescale ? 1.0 / std::sqrt(static_cast<double>(m.rows())) : 1.0;
  const PairDistances pd = pairwise(m, points, scale);
  std::vector<double> rel(pd.original.size());
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = std::abs(pd.projected[i] - pd.original[i]) / pd.original[i];
  std::sort(rel.begin(), rel.end());
  const std::size_t n = rel.size();
  const double median = n % 2 == 1 ? rel[n / 2] : 0.5 * (rel[n / 2 - 1] + rel[n / 2]);
  return DistortionSummary{median, rel.back(), n};
}

double distance_rank_correlation(const ProjectionMatrix& m, std::span<const std::vector<double>> points) {
  const PairDistances pd = pairwise(m, points, 1.0);
  const auto ra = ranks(pd.original);
  const auto rb = ranks(pd.projected);
  const double n = static_cast<double>(ra.size());
  const double mean_a = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mean_b = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - mean_a) * (rb[i] - mean_b);
    va += (ra[i] - mean_a) * (ra[i] - mean_a);
    vb += (rb[i] - mean_b) * (rb[i] - mean_b);
  }
  if (va == 0.0 || vb == 0.0) throw UndefinedStatistic("rank correlation of constant distances");
  return cov / std::sqrt(va * vb);
}

EmbeddingFunction EmbeddingFunction::identity(std::size_t input_dim) { return {Identity{}, input_dim}; }

EmbeddingFunction EmbeddingFunction::random_projection(ProjectionMatrix matrix) {
  const std::size_t f = matrix.rows();
  return {RandomProjection{std::move(matrix)}, f};
}

EmbeddingFunction EmbeddingFunction::vae(std::shared_ptr<const VaeModel> model, bool grayscale) {
  if (!model) throw InvalidInput("vae embedding needs a model");
  const std::size_t f = 2 * model->latent_dim();
  return {VaeFeatures{std::move(model), grayscale}, f};
}

Embedding EmbeddingFunction::operator()(const ObservationFrame& frame) const {
  return std::visit(
      [&](const auto& k) -> Embedding {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Identity>) {
          if (frame.size() != output_dim_) throw InvalidInput("identity embedding dimension mismatch");
          return frame.pixels;
        } else if constexpr (std::is_same_v<K, RandomProjection>) {
          return project(k.matrix, frame);
        } else {
          if (k.grayscale) return vae_features(*k.model, to_grayscale(frame).pixels);
          return vae_features(*k.model, frame.pixels);
        }
      },
      kind_);
}

}  // namespace mfec
