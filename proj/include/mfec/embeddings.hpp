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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "mfec/memory.hpp"

namespace mfec {

class VaeModel;

/// Planar pixel frame, channel-major: pixels[(c * height + y) * width + x].
struct ObservationFrame {
  std::vector<double> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const noexcept { return pixels.size(); }
  /// Throws InvalidInput if the shape does not match or a pixel is outside [0,1].
  void validate() const;

  friend bool operator==(const ObservationFrame&, const ObservationFrame&) = default;
};

/// Single-channel frame: channel c contributes 2^c / (2^C - 1) times its
/// intensity, so distinct plane combinations map to distinct gray levels.
ObservationFrame to_grayscale(const ObservationFrame& frame);

class ProjectionMatrix {
 public:
  /// Raw construction with any shape; make_projection() is the normal route.
  ProjectionMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries, std::uint64_t seed = 0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> row(std::size_t r) const { return {entries_.data() + r * cols_, cols_}; }
  std::span<const double> entries() const noexcept { return entries_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
  std::uint64_t seed_;
};

/// F x D matrix of independent standard normals drawn row-major from
/// Rng(seed). Throws InvalidInput unless 0 < F < D.
ProjectionMatrix make_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);

Embedding project(const ProjectionMatrix& m, std::span<const double> x);
Embedding project(const ProjectionMatrix& m, const ObservationFrame& x);

struct DistortionSummary {
  double median = 0.0;
  double max = 0.0;
  std::size_t pairs = 0;
};

/// Relative error |d'(i,j) - d(i,j)| / d(i,j) over all pairs with d > 0,
/// where d' is the projected distance scaled by 1/sqrt(F) when `rescale`.
/// Throws UndefinedStatistic when no pair of distinct points exists.
DistortionSummary jl_distortion(const ProjectionMatrix& m, std::span<const std::vector<double>> points,
                                bool rescale = true);

/// Spearman rank correlation between original and projected pairwise distances.
double distance_rank_correlation(const ProjectionMatrix& m, std::span<const std::vector<double>> points);

class EmbeddingFunction {
 public:
  struct Identity {};
  struct RandomProjection {
    ProjectionMatrix matrix;
  };
  struct VaeFeatures {
    std::shared_ptr<const VaeModel> model;
    bool grayscale = true;
  };

  static EmbeddingFunction identity(std::size_t input_dim);
  static EmbeddingFunction random_projection(ProjectionMatrix matrix);
  static EmbeddingFunction vae(std::shared_ptr<const VaeModel> model, bool grayscale = true);

  Embedding operator()(const ObservationFrame& frame) const;
  std::size_t output_dim() const noexcept { return output_dim_; }
  const std::variant<Identity, RandomProjection, VaeFeatures>& kind() const noexcept { return kind_; }

 private:
  EmbeddingFunction(std::variant<Identity, RandomProjection, VaeFeatures> kind, std::size_t output_dim)
      : kind_(std::move(kind)), output_dim_(output_dim) {}

  std::variant<Identity, RandomProjection, VaeFeatures> kind_;
  std::size_t output_dim_;
};

}  // namespace mfec
