#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gmrl/errors.hpp"

namespace gmrl::env {

enum class Slot : std::uint8_t { empty = 0, wp1 = 1, wp2 = 2 };

inline constexpr std::size_t kStations = 3;
inline constexpr std::size_t kConfigurations = 27;
inline constexpr std::size_t kObservationSize = kConfigurations + 2;
inline constexpr int kActionsPerRobot = 10;

/// Per-robot action catalog.
///
/// Routes: WP1 goes S1 -> S2 -> output, WP2 goes S3 -> S2 -> output. S2 is the
/// shared hand-over station and is only loaded by transfers, so fetching into
/// it always fails. A work-piece fetched onto the other type's entry station
/// is off-route; its next hop is back to its own entry station.
enum Action : int {
  fetch_wp1_s1 = 0,
  fetch_wp1_s2 = 1,
  fetch_wp1_s3 = 2,
  fetch_wp2_s1 = 3,
  fetch_wp2_s2 = 4,
  fetch_wp2_s3 = 5,
  advance_wp1 = 6,
  advance_wp2 = 7,
  deliver = 8,
  noop = 9,
};

/// Table of per-event rewards; applied additively within a step.
struct RewardTable {
  double step = -1.0;
  double locked_state = -100.0;
  double timeout = -100.0;
  double unequal_movement = -30.0;
  double wp_output = 50.0;
  double target_achieved = 500.0;
};

struct CellConfig {
  std::array<int, 2> target{20, 20};
  int max_steps = 1000;
  RewardTable rewards{};
};

struct CellState {
  std::array<Slot, kStations> stations{Slot::empty, Slot::empty, Slot::empty};
  std::array<int, 2> input_remaining{0, 0};
  std::array<int, 2> output_done{0, 0};
  int step_count = 0;
  bool unequal_penalised = false;
  bool done = false;

  friend bool operator==(const CellState&, const CellState&) = default;
};

/// Which Table-II events fired during one step.
struct StepInfo {
  int deliveries = 0;
  bool unequal_movement = false;
  bool target_achieved = false;
  bool locked = false;
  bool timeout = false;
  std::array<bool, 2> action_applied{false, false};
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

inline int slot_index(Slot s) { return static_cast<int>(s); }

inline std::size_t configuration_index(const std::array<Slot, kStations>& stations) {
  return static_cast<std::size_t>(slot_index(stations[0]) * 9 + slot_index(stations[1]) * 3 +
                                  slot_index(stations[2]));
}

inline std::array<Slot, kStations> configuration_from_index(std::size_t index) {
  if (index >= kConfigurations) throw DomainError("configuration index out of range");
  return {static_cast<Slot>(index / 9), static_cast<Slot>((index / 3) % 3),
          static_cast<Slot>(index % 3)};
}

/// All 27 station configurations in one-hot index order.
inline std::vector<CellState> enumerate_states() {
  std::vector<CellState> states;
  states.reserve(kConfigurations);
  for (std::size_t i = 0; i < kConfigurations; ++i) {
    CellState s;
    s.stations = configuration_from_index(i);
    states.push_back(s);
  }
  return states;
}

namespace detail {

inline constexpr std::size_t kS1 = 0, kS2 = 1, kS3 = 2;

inline std::size_t entry_station(int type) { return type == 0 ? kS1 : kS3; }

// Moves the most advanced movable piece of `type` one hop; false if none can move.
inline bool advance(CellState& s, int type) {
  const Slot piece = type == 0 ? Slot::wp1 : Slot::wp2;
  const std::size_t entry = entry_station(type);
  const std::size_t other = entry == kS1 ? kS3 : kS1;
  if (s.stations[entry] == piece && s.stations[kS2] == Slot::empty) {
    s.stations[kS2] = piece;
    s.stations[entry] = Slot::empty;
    return true;
  }
  if (s.stations[other] == piece && s.stations[entry] == Slot::empty) {
    s.stations[entry] = piece;
    s.stations[other] = Slot::empty;
    return true;
  }
  return false;
}

}  // namespace detail

/// Applies one robot action to the state. Returns the number of work-pieces
/// delivered (0 or 1) in `delivered`; false when the precondition fails and
/// the action degrades to a no-op.
inline bool apply_action(CellState& s, int action, int& delivered) {
  using namespace detail;
  delivered = 0;
  if (action < 0 || action >= kActionsPerRobot) {
    throw DomainError("robot-cell action " + std::to_string(action) + " outside [0, 10)");
  }
  switch (action) {
    case fetch_wp1_s1:
    case fetch_wp1_s2:
    case fetch_wp1_s3:
    case fetch_wp2_s1:
    case fetch_wp2_s2:
    case fetch_wp2_s3: {
      const int type = action / 3;
      const std::size_t station = static_cast<std::size_t>(action % 3);
      if (station == kS2) return false;
      if (s.input_remaining[type] <= 0 || s.stations[station] != Slot::empty) return false;
      s.stations[station] = type == 0 ? Slot::wp1 : Slot::wp2;
      --s.input_remaining[type];
      return true;
    }
    case advance_wp1: return advance(s, 0);
    case advance_wp2: return advance(s, 1);
    case deliver: {
      const Slot piece = s.stations[kS2];
      if (piece == Slot::empty) return false;
      ++s.output_done[slot_index(piece) - 1];
      s.stations[kS2] = Slot::empty;
      delivered = 1;
      return true;
    }
    case noop:
    default: return false;
  }
}

/// Locked when no action of either robot changes the cell: every fetch,
/// transfer and delivery precondition fails. Scans the full joint catalog.
inline bool detect_locked(const CellState& state) {
  for (int robot = 0; robot < 2; ++robot) {
    for (int a = 0; a < kActionsPerRobot; ++a) {
      CellState probe = state;
      int delivered = 0;
      if (apply_action(probe, a, delivered)) return false;
    }
  }
  return true;
}

/// Dual-robot manufacturing cell. Both robots act every step, robot 1 first.
class RobotCell {
 public:
  RobotCell() : RobotCell(CellConfig{}) {}
  explicit RobotCell(CellConfig cfg) : cfg_(cfg) {
    if (cfg_.target[0] < 1 || cfg_.target[1] < 1) throw DomainError("robot-cell targets must be >= 1");
    if (cfg_.max_steps < 1) throw DomainError("robot-cell max_steps must be >= 1");
    reset(0);
  }

  const CellConfig& config() const noexcept { return cfg_; }
  const CellState& state() const noexcept { return state_; }
  void set_state(const CellState& s) { state_ = s; }

  // The cell is deterministic; the seed is accepted for interface symmetry.
  std::vector<double> reset(std::uint64_t /*seed*/ = 0) {
    state_ = CellState{};
    state_.input_remaining = cfg_.target;
    return observe();
  }

  double completion(int type) const {
    return static_cast<double>(state_.output_done[type]) / static_cast<double>(cfg_.target[type]);
  }

  std::vector<double> observe() const {
    std::vector<double> obs(kObservationSize, 0.0);
    obs[configuration_index(state_.stations)] = 1.0;
    obs[kConfigurations] = completion(0);
    obs[kConfigurations + 1] = completion(1);
    return obs;
  }

  StepResult step(int action_robot1, int action_robot2) {
    if (state_.done) throw StateError("robot-cell: step after episode end");
    for (int a : {action_robot1, action_robot2}) {
      if (a < 0 || a >= kActionsPerRobot) {
        throw DomainError("robot-cell action " + std::to_string(a) + " outside [0, 10)");
      }
    }
    StepResult out;
    const RewardTable& r = cfg_.rewards;
    out.reward = r.step;
    ++state_.step_count;

    int delivered = 0;
    out.info.action_applied[0] = apply_action(state_, action_robot1, delivered);
    out.info.deliveries += delivered;
    out.info.action_applied[1] = apply_action(state_, action_robot2, delivered);
    out.info.deliveries += delivered;
    out.reward += r.wp_output * out.info.deliveries;

    const bool wp1_full = state_.output_done[0] >= cfg_.target[0];
    const bool wp2_full = state_.output_done[1] >= cfg_.target[1];
    if (!state_.unequal_penalised &&
        ((wp1_full && completion(1) < 0.75) || (wp2_full && completion(0) < 0.75))) {
      state_.unequal_penalised = true;
      out.info.unequal_movement = true;
      out.reward += r.unequal_movement;
    }

    if (wp1_full && wp2_full) {
      out.info.target_achieved = true;
      out.reward += r.target_achieved;
      state_.done = true;
    } else {
      if (detect_locked(state_)) {
        out.info.locked = true;
        out.reward += r.locked_state;
        state_.done = true;
      }
      if (state_.step_count >= cfg_.max_steps) {
        out.info.timeout = true;
        out.reward += r.timeout;
        state_.done = true;
      }
    }
    out.done = state_.done;
    out.observation = observe();
    return out;
  }

 private:
  CellConfig cfg_;
  CellState state_;
};

/// One JSON-lines record per step for replay and debugging.
inline void write_trace_line(std::ostream& os, int step, std::size_t state_index, int a1, int a2,
                             const StepResult& res) {
  os << "{\"step\":" << step << ",\"state\":" << state_index << ",\"a1\":" << a1
     << ",\"a2\":" << a2 << ",\"reward\":" << res.reward << ",\"deliveries\":" << res.info.deliveries
     << ",\"locked\":" << (res.info.locked ? "true" : "false")
     << ",\"timeout\":" << (res.info.timeout ? "true" : "false")
     << ",\"target\":" << (res.info.target_achieved ? "true" : "false")
     << ",\"done\":" << (res.done ? "true" : "false") << "}\n";
}

}  // namespace gmrl::env
