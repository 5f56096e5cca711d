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

#include "mfec/environment.hpp"

#include <algorithm>
#include <set>

#include "mfec/errors.hpp"

namespace mfec {

namespace {

constexpr std::array<Position, kNumActions> kMoves = {Position{0, -1}, Position{0, 1}, Position{-1, 0}, Position{1, 0}};

constexpr std::size_t kWallPlane = 0;
constexpr std::size_t kAgentPlane = 1;
constexpr std::size_t kApplePlane = 2;
constexpr std::size_t kLemonPlane = 3;
constexpr std::size_t kCuePlane = 4;

bool is_forage(Task t) { return t == Task::forage || t == Task::forage_avoid; }

std::vector<Cell> open_room(std::size_t w, std::size_t h) { return std::vector<Cell>(w * h, Cell::floor); }

std::vector<Cell> maze_cells(std::size_t arm) {
  const std::size_t n = 2 * arm + 3;
  std::vector<Cell> cells(n * n, Cell::wall);
  const auto lay = double_t_maze_layout(arm);
  const auto open = [&](int x, int y) { cells[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)] = Cell::floor; };
  for (int x = lay.west_junction.x; x <= lay.east_junction.x; ++x) open(x, lay.first_junction.y);
  for (int y = lay.first_junction.y; y <= lay.start.y; ++y) open(lay.first_junction.x, y);
  for (int y = lay.arm_ends[0].y; y <= lay.arm_ends[1].y; ++y) {
    open(lay.west_junction.x, y);
    open(lay.east_junction.x, y);
  }
  return cells;
}

std::optional<Position> parse_position(std::string_view s) {
  const auto parts = text::split(s, ',');
  if (parts.size() != 2) return std::nullopt;
  const auto x = text::parse_int(parts[0]);
  const auto y = text::parse_int(parts[1]);
  if (!x || !y) return std::nullopt;
  return Position{static_cast<int>(*x), static_cast<int>(*y)};
}

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::forage: return "forage";
    case Task::forage_avoid: return "forage-avoid";
    case Task::double_t_maze: return "double-t-maze";
  }
  return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
  for (Task t : {Task::forage, Task::forage_avoid, Task::double_t_maze}) {
    if (name == task_name(t)) return t;
  }
  return std::nullopt;
}

Cell GridWorldSpec::cell(Position p) const {
  if (p.x < 0 || p.y < 0 || static_cast<std::size_t>(p.x) >= width || static_cast<std::size_t>(p.y) >= height) {
    return Cell::wall;
  }
  const std::size_t idx = static_cast<std::size_t>(p.y) * width + static_cast<std::size_t>(p.x);
  return idx < layout.size() ? layout[idx] : Cell::wall;
}

std::vector<std::string> GridWorldSpec::violations() const {
  std::vector<std::string> out;
  if (width == 0 || height == 0) out.push_back("width and height must be positive");
  if (layout.size() != width * height) out.push_back("layout size does not match width x height");
  if (t_max == 0) out.push_back("t_max must be positive");
  if (start_mode == StartMode::fixed && !is_floor(start)) out.push_back("start cell is not a floor cell");

  if (task == Task::double_t_maze) {
    if (arm_length == 0) {
      out.push_back("double-t-maze needs arm_length >= 1");
    } else if (width != 2 * arm_length + 3 || height != 2 * arm_length + 3) {
      out.push_back("double-t-maze grid must be (2*arm_length+3) square");
    } else if (layout != maze_cells(arm_length)) {
      out.push_back("double-t-maze layout does not match arm_length");
    }
    if (!items.empty()) out.push_back("double-t-maze places its own items");
    return out;
  }

  std::set<Position> occupied;
  std::size_t apples = 0;
  for (const Item& item : items) {
    if (!is_floor(item.pos)) {
      out.push_back("item at (" + std::to_string(item.pos.x) + "," + std::to_string(item.pos.y) + ") is not on a floor cell");
    }
    if (!occupied.insert(item.pos).second) {
      out.push_back("two items share cell (" + std::to_string(item.pos.x) + "," + std::to_string(item.pos.y) + ")");
    }
    if (start_mode == StartMode::fixed && item.pos == start) out.push_back("item placed on the start cell");
    if (item.kind == ItemKind::apple) ++apples;
    if (task == Task::forage && item.kind == ItemKind::lemon) out.push_back("forage task has no lemons");
  }
  if (apples == 0) out.push_back("forage tasks need at least one apple");
  const auto floors = static_cast<std::size_t>(std::count(layout.begin(), layout.end(), Cell::floor));
  if (start_mode == StartMode::randomized && floors < items.size() + 1) {
    out.push_back("not enough floor cells to randomise items and start");
  }
  return out;
}

DoubleTMazeLayout double_t_maze_layout(std::size_t arm_length) {
  const int a = static_cast<int>(arm_length);
  const int center = a + 1;
  const int west = 1;
  const int east = 2 * a + 1;
  return DoubleTMazeLayout{
      Position{center, 2 * a + 1},
      Position{center, center},
      Position{west, center},
      Position{east, center},
      {Position{west, 1}, Position{west, 2 * a + 1}, Position{east, 1}, Position{east, 2 * a + 1}},
  };
}

GridWorldSpec default_forage_spec() {
  GridWorldSpec s;
  s.task = Task::forage;
  s.width = 8;
  s.height = 8;
  s.layout = open_room(8, 8);
  s.start = Position{0, 0};
  s.items = {{{2, 1}, ItemKind::apple}, {{5, 2}, ItemKind::apple}, {{1, 4}, ItemKind::apple},
             {{6, 5}, ItemKind::apple}, {{3, 7}, ItemKind::apple}};
  s.t_max = 100;
  return s;
}

GridWorldSpec default_forage_avoid_spec() {
  GridWorldSpec s = default_forage_spec();
  s.task = Task::forage_avoid;
  s.items.insert(s.items.end(), {{{4, 1}, ItemKind::lemon}, {{2, 3}, ItemKind::lemon}, {{5, 4}, ItemKind::lemon},
                                 {{0, 6}, ItemKind::lemon}, {{7, 7}, ItemKind::lemon}});
  return s;
}

GridWorldSpec double_t_maze_spec(std::size_t arm_length, std::size_t t_max) {
  GridWorldSpec s;
  s.task = Task::double_t_maze;
  s.arm_length = arm_length;
  s.width = s.height = 2 * arm_length + 3;
  s.layout = maze_cells(arm_length);
  s.start = double_t_maze_layout(arm_length).start;
  s.t_max = t_max;
  return s;
}

GridWorldSpec grid_spec_from_pairs(const std::vector<text::KeyValue>& pairs, std::vector<text::KeyValue>* rest) {
  Task task = Task::forage;
  for (const auto& kv : pairs) {
    if (kv.key == "task") {
      const auto t = parse_task(kv.value);
      if (!t) throw ParseError(kv.line, kv.key, "unknown task '" + kv.value + "'");
      task = *t;
    }
  }
  GridWorldSpec spec = task == Task::forage         ? default_forage_spec()
                       : task == Task::forage_avoid ? default_forage_avoid_spec()
                                                    : double_t_maze_spec();
  bool resized = false;
  std::optional<std::size_t> t_max;
  for (const auto& kv : pairs) {
    const auto as_size = [&](std::size_t min) {
      const auto v = text::parse_uint(kv.value);
      if (!v || *v < min) throw ParseError(kv.line, kv.key, "expected an integer >= " + std::to_string(min));
      return static_cast<std::size_t>(*v);
    };
    if (kv.key == "task") {
      continue;
    } else if (kv.key == "width") {
      spec.width = as_size(1);
      resized = true;
    } else if (kv.key == "height") {
      spec.height = as_size(1);
      resized = true;
    } else if (kv.key == "arm_length") {
      if (task != Task::double_t_maze) throw ParseError(kv.line, kv.key, "only valid for double-t-maze");
      const std::size_t t = spec.t_max;
      spec = double_t_maze_spec(as_size(1), t);
    } else if (kv.key == "t_max") {
      t_max = as_size(1);
    } else if (kv.key == "seed") {
      const auto v = text::parse_uint(kv.value);
      if (!v) throw ParseError(kv.line, kv.key, "expected an unsigned integer");
      spec.seed = *v;
    } else if (kv.key == "start_mode") {
      if (kv.value == "fixed") spec.start_mode = StartMode::fixed;
      else if (kv.value == "randomized") spec.start_mode = StartMode::randomized;
      else throw ParseError(kv.line, kv.key, "expected fixed or randomized");
    } else if (kv.key == "start") {
      const auto p = parse_position(kv.value);
      if (!p) throw ParseError(kv.line, kv.key, "expected x,y");
      spec.start = *p;
    } else if (kv.key == "items") {
      spec.items.clear();
      for (auto tok : text::split(kv.value, ';')) {
        tok = text::trim(tok);
        if (tok.empty()) continue;
        const auto at = tok.find('@');
        const auto kind = at == std::string_view::npos ? std::string_view{} : tok.substr(0, at);
        const auto pos = at == std::string_view::npos ? std::nullopt : parse_position(tok.substr(at + 1));
        if ((kind != "apple" && kind != "lemon") || !pos) {
          throw ParseError(kv.line, kv.key, "expected apple@x,y or lemon@x,y entries separated by ';'");
        }
        spec.items.push_back(Item{*pos, kind == "apple" ? ItemKind::apple : ItemKind::lemon});
      }
    } else if (rest) {
      rest->push_back(kv);
    } else {
      throw ParseError(kv.line, kv.key, "unknown key");
    }
  }
  if (t_max) spec.t_max = *t_max;
  if (resized && task != Task::double_t_maze) spec.layout = open_room(spec.width, spec.height);
  return spec;
}

GridWorldSpec parse_grid_spec(std::string_view text) { return grid_spec_from_pairs(text::parse_key_values(text)); }

ObservationFrame render(const GridWorldSpec& spec, const EnvState& state) {
  const std::size_t w = spec.width, h = spec.height, plane = w * h;
  ObservationFrame f{std::vector<double>(plane * kNumPlanes, 0.0), h, w, kNumPlanes};
  const auto at = [&](std::size_t p, Position pos) -> double& {
    return f.pixels[p * plane + static_cast<std::size_t>(pos.y) * w + static_cast<std::size_t>(pos.x)];
  };
  for (std::size_t i = 0; i < plane; ++i) {
    if (spec.layout[i] == Cell::wall) f.pixels[kWallPlane * plane + i] = 1.0;
  }
  at(kAgentPlane, state.agent) = 1.0;
  for (const Item& item : state.items) at(item.kind == ItemKind::apple ? kApplePlane : kLemonPlane, item.pos) = 1.0;
  if (spec.task == Task::double_t_maze) {
    const auto lay = double_t_maze_layout(spec.arm_length);
    const std::array<Position, 3> junctions = {lay.first_junction, lay.west_junction, lay.east_junction};
    for (std::size_t j = 0; j < 3; ++j) {
      if (state.cues[j] == Cue::red) at(kCuePlane, junctions[j]) = 1.0;
      if (state.cues[j] == Cue::green) at(kCuePlane, junctions[j]) = 0.5;
    }
  }
  return f;
}

GridWorld::GridWorld(GridWorldSpec spec) : spec_(std::move(spec)) {
  auto problems = spec_.violations();
  if (!problems.empty()) throw SpecValidationError(std::move(problems));
  home_ = spec_.start;
  state_.agent = spec_.start;
  state_.items = spec_.items;
  state_.done = true;
}

void GridWorld::place_apple_arm(int arm) {
  const auto lay = double_t_maze_layout(spec_.arm_length);
  state_.apple_arm = arm;
  state_.items.clear();
  for (int i = 0; i < 4; ++i) {
    state_.items.push_back(Item{lay.arm_ends[static_cast<std::size_t>(i)], i == arm ? ItemKind::apple : ItemKind::lemon});
  }
  const bool west_side = arm <= 1;
  state_.cues[0] = west_side ? Cue::red : Cue::green;
  state_.cues[1] = west_side ? (arm == 1 ? Cue::red : Cue::green) : Cue::none;
  state_.cues[2] = west_side ? Cue::none : (arm == 2 ? Cue::red : Cue::green);
}

ObservationFrame GridWorld::reset(std::uint64_t seed) {
  rng_ = Rng(mix_seed(seed, 0x656e76));
  state_ = EnvState{};
  state_.items = spec_.items;
  home_ = spec_.start;

  if (spec_.start_mode == StartMode::randomized) {
    std::vector<Position> cells;
    for (int y = 0; y < static_cast<int>(spec_.height); ++y) {
      for (int x = 0; x < static_cast<int>(spec_.width); ++x) {
        if (spec_.is_floor({x, y})) cells.push_back({x, y});
      }
    }
    if (spec_.task == Task::double_t_maze) {
      const auto lay = double_t_maze_layout(spec_.arm_length);
      std::erase_if(cells, [&](Position p) { return std::find(lay.arm_ends.begin(), lay.arm_ends.end(), p) != lay.arm_ends.end(); });
      home_ = cells[rng_.uniform_index(cells.size())];
    } else {
      for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng_.uniform_index(i)]);
      home_ = cells[0];
      for (std::size_t i = 0; i < state_.items.size(); ++i) state_.items[i].pos = cells[i + 1];
    }
  }
  state_.agent = home_;
  if (spec_.task == Task::double_t_maze) place_apple_arm(static_cast<int>(rng_.uniform_index(4)));
  return render();
}

StepOutcome GridWorld::step(Action action) {
  if (state_.done) throw EpisodeFinished("step called on a finished episode");
  const auto idx = static_cast<std::size_t>(action);
  if (idx >= kNumActions) throw InvalidInput("action id out of range");
  const Position target{state_.agent.x + kMoves[idx].x, state_.agent.y + kMoves[idx].y};
  double reward = 0.0;
  if (spec_.is_floor(target)) {
    state_.agent = target;
    const auto hit = std::find_if(state_.items.begin(), state_.items.end(), [&](const Item& i) { return i.pos == target; });
    if (hit != state_.items.end()) {
      const bool apple = hit->kind == ItemKind::apple;
      reward = apple ? 1.0 : -1.0;
      if (spec_.task == Task::double_t_maze) {
        state_.agent = home_;
        if (apple) place_apple_arm(static_cast<int>(rng_.uniform_index(4)));
      } else if (apple) {
        state_.items.erase(hit);
      }
    }
  }
  ++state_.t;
  const bool apples_left = std::any_of(state_.items.begin(), state_.items.end(),
                                       [](const Item& i) { return i.kind == ItemKind::apple; });
  const bool terminal = is_forage(spec_.task) && !apples_left;
  state_.done = terminal || state_.t >= spec_.t_max;
  return StepOutcome{render(), reward, state_.done, terminal};
}

}  // namespace mfec
