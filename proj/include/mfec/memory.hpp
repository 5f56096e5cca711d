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

// Per-action bounded nearest-neighbour value memories.
//
// Each action owns an ActionBuffer of (key, best return, stamp) entries.
// Writes keep the larger of the stored and the new return and refresh the
// entry's stamp from the store-wide clock; when a buffer is full, the entry
// with the oldest stamp is evicted. Reads never touch stamps.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mfec {

using Embedding = std::vector<double>;
using ActionId = std::size_t;

struct MemoryEntry {
  Embedding key;
  double value = 0.0;
  std::uint64_t stamp = 0;
};

struct Neighbor {
  MemoryEntry entry;
  double distance = 0.0;
};

class ActionBuffer {
 public:
  ActionBuffer(std::size_t dim, std::size_t capacity);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool full() const noexcept { return values_.size() == capacity_; }

  /// Slot of the entry whose key is bit-identical to `key`.
  std::optional<std::size_t> find(std::span<const double> key) const;

  /// Adds a new entry. The key must be absent; a full buffer evicts first.
  /// Returns the evicted entry, if any.
  std::optional<MemoryEntry> insert(std::span<const double> key, double value, std::uint64_t stamp);

  /// Overwrites the value and stamp of an existing slot.
  void rewrite(std::size_t slot, double value, std::uint64_t stamp);

  /// Removes and returns the entry with the smallest stamp.
  /// Throws PreconditionViolation unless the buffer is at capacity.
  MemoryEntry evict();

  /// min(k, size) entries by ascending Euclidean distance, ties to the
  /// smaller stamp. Throws EmptyBuffer.
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const;

  /// Arithmetic mean of the values of the knn() result, summed in result
  /// order. Throws EmptyBuffer.
  double mean_nearest_value(std::span<const double> query, std::size_t k) const;

  std::span<const double> key(std::size_t slot) const { return {keys_.data() + slot * dim_, dim_}; }
  double value(std::size_t slot) const { return values_[slot]; }
  std::uint64_t stamp(std::size_t slot) const { return stamps_[slot]; }
  MemoryEntry entry(std::size_t slot) const;

  /// All entries, oldest stamp first.
  std::vector<MemoryEntry> entries() const;

 private:
  struct Ranked {
    double sq_distance;
    std::uint64_t stamp;
    std::size_t slot;
  };

  std::vector<Ranked> nearest(std::span<const double> query, std::size_t k) const;
  std::size_t hash_key(std::span<const double> key) const;
  void unlink(std::size_t slot);
  void link_back(std::size_t slot);
  void remove_slot(std::size_t slot);

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t dim_;
  std::size_t capacity_;
  std::vector<double> keys_;
  std::vector<double> values_;
  std::vector<std::uint64_t> stamps_;
  // Recency list over slots; head_ is the oldest write.
  std::vector<std::size_t> prev_;
  std::vector<std::size_t> next_;
  std::size_t head_ = kNone;
  std::size_t tail_ = kNone;
  std::unordered_multimap<std::size_t, std::size_t> index_;
};

enum class UpdateRule {
  max_return,  // keep the highest return ever seen
  overwrite,   // store the latest return (ablation only)
};

class EpisodicValueStore {
 public:
  EpisodicValueStore(std::size_t num_actions, std::size_t dim, std::size_t capacity,
                     UpdateRule rule = UpdateRule::max_return);

  EpisodicValueStore(const EpisodicValueStore& other);
  EpisodicValueStore& operator=(const EpisodicValueStore& other);
  EpisodicValueStore(EpisodicValueStore&&) noexcept;
  EpisodicValueStore& operator=(EpisodicValueStore&&) noexcept;
  ~EpisodicValueStore() = default;

  std::size_t num_actions() const noexcept { return buffers_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t clock() const noexcept { return clock_; }
  UpdateRule rule() const noexcept { return rule_; }

  void update(std::span<const double> state, ActionId action, double ret);

  /// Stored value on an exact hit, else the mean over the k nearest entries.
  /// std::nullopt when the action's buffer is empty. Counts every call as a
  /// query and every exact hit as a hit; safe to call concurrently.
  std::optional<double> estimate(std::span<const double> state, ActionId action, std::size_t k) const;

  /// hit_count / query_count; throws UndefinedStatistic before any query.
  double match_rate() const;
  std::uint64_t hit_count() const noexcept { return hits_.load(std::memory_order_relaxed); }
  std::uint64_t query_count() const noexcept { return queries_.load(std::memory_order_relaxed); }
  void reset_statistics() noexcept;

  const ActionBuffer& buffer(ActionId action) const;

  /// Text snapshot: "EC-STORE v1 F=<dim> actions=<n>" then one
  /// "action,value,stamp,v1,...,vF" line per entry.
  void save(std::ostream& out) const;
  static EpisodicValueStore load(std::istream& in, std::size_t capacity,
                                 UpdateRule rule = UpdateRule::max_return);

 private:
  void check_state(std::span<const double> state, ActionId action) const;

  std::size_t dim_;
  std::size_t capacity_;
  UpdateRule rule_;
  std::vector<ActionBuffer> buffers_;
  std::uint64_t clock_ = 0;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> queries_{0};
};

}  // namespace mfec
