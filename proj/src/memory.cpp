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

#include "mfec/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "mfec/errors.hpp"
#include "mfec/simd/kernels.hpp"
#include "mfec/text_io.hpp"

namespace mfec {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ActionBuffer::ActionBuffer(std::size_t dim, std::size_t capacity) : dim_(dim), capacity_(capacity) {
  if (dim == 0) throw InvalidInput("action buffer dimension must be positive");
  if (capacity == 0) throw InvalidInput("action buffer capacity must be positive");
}

std::size_t ActionBuffer::hash_key(std::span<const double> key) const {
  const std::string_view bytes(reinterpret_cast<const char*>(key.data()), key.size_bytes());
  return std::hash<std::string_view>{}(bytes);
}

std::optional<std::size_t> ActionBuffer::find(std::span<const double> key) const {
  if (key.size() != dim_) return std::nullopt;
  const auto [first, last] = index_.equal_range(hash_key(key));
  for (auto it = first; it != last; ++it) {
    if (std::memcmp(keys_.data() + it->second * dim_, key.data(), key.size_bytes()) == 0) return it->second;
  }
  return std::nullopt;
}

void ActionBuffer::unlink(std::size_t slot) {
  const std::size_t p = prev_[slot];
  const std::size_t n = next_[slot];
  if (p != kNone) next_[p] = n; else head_ = n;
  if (n != kNone) prev_[n] = p; else tail_ = p;
  prev_[slot] = next_[slot] = kNone;
}

void ActionBuffer::link_back(std::size_t slot) {
  prev_[slot] = tail_;
  next_[slot] = kNone;
  if (tail_ != kNone) next_[tail_] = slot; else head_ = slot;
  tail_ = slot;
}

std::optional<MemoryEntry> ActionBuffer::insert(std::span<const double> key, double value, std::uint64_t stamp) {
  if (key.size() != dim_) throw InvalidInput("key dimension mismatch");
  std::optional<MemoryEntry> evicted;
  if (full()) evicted = evict();
  const std::size_t slot = values_.size();
  keys_.insert(keys_.end(), key.begin(), key.end());
  values_.push_back(value);
  stamps_.push_back(stamp);
  prev_.push_back(kNone);
  next_.push_back(kNone);
  link_back(slot);
  index_.emplace(hash_key(key), slot);
  return evicted;
}

void ActionBuffer::rewrite(std::size_t slot, double value, std::uint64_t stamp) {
  values_[slot] = value;
  stamps_[slot] = stamp;
  unlink(slot);
  link_back(slot);
}

void ActionBuffer::remove_slot(std::size_t slot) {
  const auto erase_index = [this](std::size_t s) {
    const auto [first, last] = index_.equal_range(hash_key(key(s)));
    for (auto it = first; it != last; ++it) {
      if (it->second == s) {
        index_.erase(it);
        return;
      }
    }
  };
  erase_index(slot);
  unlink(slot);

  // Move the last slot into the hole so storage stays dense.
  const std::size_t last = values_.size() - 1;
  if (slot != last) {
    erase_index(last);
    std::copy_n(keys_.begin() + static_cast<std::ptrdiff_t>(last * dim_), dim_,
                keys_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
    values_[slot] = values_[last];
    stamps_[slot] = stamps_[last];
    prev_[slot] = prev_[last];
    next_[slot] = next_[last];
    if (prev_[slot] != kNone) next_[prev_[slot]] = slot; else head_ = slot;
    if (next_[slot] != kNone) prev_[next_[slot]] = slot; else tail_ = slot;
    index_.emplace(hash_key(key(slot)), slot);
  }
  keys_.resize(last * dim_);
  values_.pop_back();
  stamps_.pop_back();
  prev_.pop_back();
  next_.pop_back();
}

MemoryEntry ActionBuffer::evict() {
  if (!full()) throw PreconditionViolation("evict called on a buffer below capacity");
  const std::size_t oldest = head_;
  MemoryEntry out = entry(oldest);
  remove_slot(oldest);
  return out;
}

MemoryEntry ActionBuffer::entry(std::size_t slot) const {
  const auto k = key(slot);
  return MemoryEntry{Embedding(k.begin(), k.end()), values_[slot], stamps_[slot]};
}

std::vector<MemoryEntry> ActionBuffer::entries() const {
  std::vector<MemoryEntry> out;
  out.reserve(size());
  for (std::size_t s = head_; s != kNone; s = next_[s]) out.push_back(entry(s));
  return out;
}

std::vector<ActionBuffer::Ranked> ActionBuffer::nearest(std::span<const double> query, std::size_t k) const {
  if (empty()) throw EmptyBuffer("nearest-neighbour query on an empty buffer");
  if (query.size() != dim_) throw InvalidInput("query dimension mismatch");
  if (k == 0) throw InvalidInput("k must be positive");

  const auto& kern = simd::kernels();
  std::vector<Ranked> ranked(size());
  for (std::size_t s = 0; s < ranked.size(); ++s) {
    ranked[s] = Ranked{kern.squared_l2(keys_.data() + s * dim_, query.data(), dim_), stamps_[s], s};
  }
  const auto closer = [](const Ranked& a, const Ranked& b) {
    if (a.sq_distance != b.sq_distance) return a.sq_distance < b.sq_distance;
    return a.stamp < b.stamp;
  };
  const std::size_t m = std::min(k, ranked.size());
  if (m < ranked.size()) {
    std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(m), ranked.end(), closer);
    ranked.resize(m);
  }
  std::sort(ranked.begin(), ranked.end(), closer);
  return ranked;
}

std::vector<Neighbor> ActionBuffer::knn(std::span<const double> query, std::size_t k) const {
  std::vector<Neighbor> out;
  for (const Ranked& r : nearest(query, k)) out.push_back(Neighbor{entry(r.slot), std::sqrt(r.sq_distance)});
  return out;
}

double ActionBuffer::mean_nearest_value(std::span<const double> query, std::size_t k) const {
  const auto ranked = nearest(query, k);
  double sum = 0.0;
  for (const Ranked& r : ranked) sum += values_[r.slot];
  return sum / static_cast<double>(ranked.size());
}

EpisodicValueStore::EpisodicValueStore(std::size_t num_actions, std::size_t dim, std::size_t capacity, UpdateRule rule)
    : dim_(dim), capacity_(capacity), rule_(rule) {
  if (num_actions == 0) throw InvalidInput("store needs at least one action");
  buffers_.reserve(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) buffers_.emplace_back(dim, capacity);
}

EpisodicValueStore::EpisodicValueStore(const EpisodicValueStore& other)
    : dim_(other.dim_),
      capacity_(other.capacity_),
      rule_(other.rule_),
      buffers_(other.buffers_),
      clock_(other.clock_),
      hits_(other.hit_count()),
      queries_(other.query_count()) {}

EpisodicValueStore& EpisodicValueStore::operator=(const EpisodicValueStore& other) {
  if (this != &other) {
    dim_ = other.dim_;
    capacity_ = other.capacity_;
    rule_ = other.rule_;
    buffers_ = other.buffers_;
    clock_ = other.clock_;
    hits_.store(other.hit_count());
    queries_.store(other.query_count());
  }
  return *this;
}

EpisodicValueStore::EpisodicValueStore(EpisodicValueStore&& other) noexcept
    : dim_(other.dim_),
      capacity_(other.capacity_),
      rule_(other.rule_),
      buffers_(std::move(other.buffers_)),
      clock_(other.clock_),
      hits_(other.hit_count()),
      queries_(other.query_count()) {}

EpisodicValueStore& EpisodicValueStore::operator=(EpisodicValueStore&& other) noexcept {
  dim_ = other.dim_;
  capacity_ = other.capacity_;
  rule_ = other.rule_;
  buffers_ = std::move(other.buffers_);
  clock_ = other.clock_;
  hits_.store(other.hit_count());
  queries_.store(other.query_count());
  return *this;
}

void EpisodicValueStore::check_state(std::span<const double> state, ActionId action) const {
  if (action >= buffers_.size()) throw InvalidInput("action id out of range: " + std::to_string(action));
  if (state.size() != dim_) {
    throw InvalidInput("embedding dimension " + std::to_string(state.size()) + " does not match store dimension " +
                       std::to_string(dim_));
  }
  if (!all_finite(state)) throw InvalidInput("embedding has non-finite components");
}

void EpisodicValueStore::update(std::span<const double> state, ActionId action, double ret) {
  check_state(state, action);
  if (!std::isfinite(ret)) throw InvalidInput("return must be finite");
  ActionBuffer& buf = buffers_[action];
  const std::uint64_t stamp = ++clock_;
  if (const auto slot = buf.find(state)) {
    const double next = rule_ == UpdateRule::max_return ? std::max(buf.value(*slot), ret) : ret;
    buf.rewrite(*slot, next, stamp);
  } else {
    buf.insert(state, ret, stamp);
  }
}

std::optional<double> EpisodicValueStore::estimate(std::span<const double> state, ActionId action, std::size_t k) const {
  check_state(state, action);
  if (k == 0) throw InvalidInput("k must be positive");
  queries_.fetch_add(1, std::memory_order_relaxed);
  const ActionBuffer& buf = buffers_[action];
  if (buf.empty()) return std::nullopt;
  if (const auto slot = buf.find(state)) {
    hits_.fetch_add(1, std::memory_order_relaxed);
    return buf.value(*slot);
  }
  return buf.mean_nearest_value(state, k);
}

double EpisodicValueStore::match_rate() const {
  const std::uint64_t q = query_count();
  if (q == 0) throw UndefinedStatistic("match rate is undefined before any query");
  return static_cast<double>(hit_count()) / static_cast<double>(q);
}

void EpisodicValueStore::reset_statistics() noexcept {
  hits_.store(0);
  queries_.store(0);
}

const ActionBuffer& EpisodicValueStore::buffer(ActionId action) const {
  if (action >= buffers_.size()) throw InvalidInput("action id out of range: " + std::to_string(action));
  return buffers_[action];
}

void EpisodicValueStore::save(std::ostream& out) const {
  out << "EC-STORE v1 F=" << dim_ << " actions=" << buffers_.size() << '\n';
  for (std::size_t a = 0; a < buffers_.size(); ++a) {
    for (const MemoryEntry& e : buffers_[a].entries()) {
      out << a << ',' << text::format_double(e.value) << ',' << e.stamp;
      for (double v : e.key) out << ',' << text::format_double(v);
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing store snapshot");
}

EpisodicValueStore EpisodicValueStore::load(std::istream& in, std::size_t capacity, UpdateRule rule) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "header", "missing store snapshot header");
  const auto fields = text::split(text::trim(line), ' ');
  if (fields.size() != 4 || fields[0] != "EC-STORE" || fields[1] != "v1" || !fields[2].starts_with("F=") ||
      !fields[3].starts_with("actions=")) {
    throw ParseError(1, "header", "expected 'EC-STORE v1 F=<dim> actions=<n>'");
  }
  const auto dim = text::parse_uint(fields[2].substr(2));
  const auto actions = text::parse_uint(fields[3].substr(8));
  if (!dim || !actions || *dim == 0 || *actions == 0) throw ParseError(1, "header", "bad dimension or action count");

  EpisodicValueStore store(*actions, *dim, capacity, rule);
  std::vector<std::vector<MemoryEntry>> per_action(*actions);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cols = text::split(trimmed, ',');
    if (cols.size() != 3 + *dim) throw ParseError(line_no, "entry", "expected " + std::to_string(3 + *dim) + " fields");
    const auto action = text::parse_uint(cols[0]);
    const auto value = text::parse_double(cols[1]);
    const auto stamp = text::parse_uint(cols[2]);
    if (!action || *action >= *actions) throw ParseError(line_no, "action", "bad action id");
    if (!value || !std::isfinite(*value)) throw ParseError(line_no, "value", "bad value");
    if (!stamp) throw ParseError(line_no, "stamp", "bad stamp");
    MemoryEntry e{Embedding(*dim), *value, *stamp};
    for (std::size_t i = 0; i < *dim; ++i) {
      const auto v = text::parse_double(cols[3 + i]);
      if (!v || !std::isfinite(*v)) throw ParseError(line_no, "key", "bad key component");
      e.key[i] = *v;
    }
    per_action[*action].push_back(std::move(e));
  }

  for (std::size_t a = 0; a < per_action.size(); ++a) {
    auto& list = per_action[a];
    std::sort(list.begin(), list.end(), [](const MemoryEntry& x, const MemoryEntry& y) { return x.stamp < y.stamp; });
    for (const MemoryEntry& e : list) {
      if (store.buffers_[a].find(e.key)) throw ParseError(0, "key", "duplicate key in snapshot");
      store.buffers_[a].insert(e.key, e.value, e.stamp);
      store.clock_ = std::max(store.clock_, e.stamp);
    }
  }
  return store;
}

}  // namespace mfec
