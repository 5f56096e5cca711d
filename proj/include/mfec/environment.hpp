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

// Deterministic gridworld tasks with planar pixel observations.
//
// Actions are up, down, left, right (ids 0..3). Cells outside the grid are
// walls. Observations have five planes: walls, agent, apples, lemons and
// cue colour (red 1.0, green 0.5).
//
// Double-T-maze geometry for arm length A (grid (2A+3) x (2A+3)):
//
//   NW end  .         . NE end          stem runs from the start cell up
//     |               |                 to the first junction; the cross
//   west junction --- first junction --- east junction
//     |               |stem             bar joins two vertical arms whose
//   SW end          start      SE end   four ends hold one apple and three lemons.
//
// Cue convention: a red cue means "turn left relative to the direction you
// arrived from", green means "turn right". Arriving northbound at the first
// junction, left is west; westbound at the west junction, left is south;
// eastbound at the east junction, left is north.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfec/embeddings.hpp"
#include "mfec/rng.hpp"
#include "mfec/text_io.hpp"

namespace mfec {

enum class Task { forage, forage_avoid, double_t_maze };
enum class StartMode { fixed, randomized };
enum class Cell : std::uint8_t { floor, wall };
enum class ItemKind { apple, lemon };
enum class Action : std::size_t { up = 0, down = 1, left = 2, right = 3 };
enum class Cue : std::uint8_t { none, red, green };

inline constexpr std::size_t kNumActions = 4;
inline constexpr std::size_t kNumPlanes = 5;

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

struct Position {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Position&, const Position&) = default;
};

struct Item {
  Position pos;
  ItemKind kind = ItemKind::apple;
  friend bool operator==(const Item&, const Item&) = default;
};

struct GridWorldSpec {
  Task task = Task::forage;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Cell> layout;  // row-major, y * width + x
  std::vector<Item> items;
  StartMode start_mode = StartMode::fixed;
  Position start;
  std::size_t t_max = 100;
  std::uint64_t seed = 0;
  std::size_t arm_length = 0;  // double-t-maze only

  Cell cell(Position p) const;
  bool is_floor(Position p) const { return cell(p) == Cell::floor; }

  /// Empty when the spec is well formed.
  std::vector<std::string> violations() const;
};

/// Open 8x8 room, 5 apples, T_max 100.
GridWorldSpec default_forage_spec();
/// Open 8x8 room, 5 apples and 5 lemons, T_max 100.
GridWorldSpec default_forage_avoid_spec();
/// Arm length 4, T_max 200.
GridWorldSpec double_t_maze_spec(std::size_t arm_length = 4, std::size_t t_max = 200);

/// Builds a spec from key=value pairs (task, width, height, items, start_mode,
/// start, t_max, seed, arm_length). Unknown keys are returned untouched in
/// `rest` when given, otherwise rejected.
GridWorldSpec grid_spec_from_pairs(const std::vector<text::KeyValue>& pairs,
                                   std::vector<text::KeyValue>* rest = nullptr);
GridWorldSpec parse_grid_spec(std::string_view text);

struct DoubleTMazeLayout {
  Position start;
  Position first_junction;
  Position west_junction;
  Position east_junction;
  std::array<Position, 4> arm_ends;  // NW, SW, NE, SE
};
DoubleTMazeLayout double_t_maze_layout(std::size_t arm_length);

struct EnvState {
  Position agent;
  std::size_t t = 0;
  std::vector<Item> items;
  int apple_arm = -1;             // double-t-maze: index into arm_ends
  std::array<Cue, 3> cues{};      // first, west, east junction
  bool done = false;
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepOutcome {
  ObservationFrame observation;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;  // ended by the task itself (all apples eaten), not the step limit
};

ObservationFrame render(const GridWorldSpec& spec, const EnvState& state);

class GridWorld {
 public:
  /// Throws SpecValidationError listing every violation.
  explicit GridWorld(GridWorldSpec spec);

  ObservationFrame reset(std::uint64_t seed);
  /// Throws EpisodeFinished once done.
  StepOutcome step(Action action);
  StepOutcome step(std::size_t action) { return step(static_cast<Action>(action)); }
  ObservationFrame render() const { return mfec::render(spec_, state_); }

  const GridWorldSpec& spec() const noexcept { return spec_; }
  const EnvState& state() const noexcept { return state_; }
  bool done() const noexcept { return state_.done; }
  std::size_t observation_dim() const noexcept { return spec_.width * spec_.height * kNumPlanes; }
  std::size_t num_actions() const noexcept { return kNumActions; }

 private:
  void place_apple_arm(int arm);

  GridWorldSpec spec_;
  EnvState state_;
  Position home_;
  Rng rng_{0};
};

}  // namespace mfec
