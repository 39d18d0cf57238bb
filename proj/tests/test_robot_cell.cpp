#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gmrl/env/robot_cell.hpp"
#include "gmrl/random.hpp"

using namespace gmrl;
using namespace gmrl::env;

namespace {

int pieces_of(const CellState& s, int type) {
  const Slot piece = type == 0 ? Slot::wp1 : Slot::wp2;
  const int in_cell = static_cast<int>(std::count(s.stations.begin(), s.stations.end(), piece));
  return s.input_remaining[type] + in_cell + s.output_done[type];
}

}  // namespace

TEST(RobotCell, ResetGivesEmptyCellAndFullInputs) {
  RobotCell cell;
  const auto obs = cell.reset();
  ASSERT_EQ(obs.size(), 29u);
  EXPECT_EQ(obs[0], 1.0);  // all-empty configuration
  EXPECT_EQ(std::count(obs.begin(), obs.begin() + 27, 1.0), 1);
  EXPECT_EQ(obs[27], 0.0);
  EXPECT_EQ(obs[28], 0.0);
  EXPECT_EQ(cell.state().input_remaining, (std::array<int, 2>{20, 20}));
  EXPECT_FALSE(cell.state().done);
}

TEST(RobotCell, BothNoopsCostOneStep) {
  RobotCell cell;
  const auto r = cell.step(noop, noop);
  EXPECT_EQ(r.reward, -1.0);
  EXPECT_FALSE(r.done);
}

TEST(RobotCell, FinalDeliveryCompletingBothTargets) {
  RobotCell cell;
  CellState s;
  s.stations = {Slot::empty, Slot::wp2, Slot::empty};
  s.output_done = {20, 19};
  s.unequal_penalised = false;
  s.step_count = 300;
  cell.set_state(s);
  const auto r = cell.step(deliver, noop);
  EXPECT_EQ(r.reward, 549.0);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.info.target_achieved);
  EXPECT_EQ(r.observation[27], 1.0);
  EXPECT_EQ(r.observation[28], 1.0);
}

TEST(RobotCell, SingleDeliveryRewardsFifty) {
  RobotCell cell;
  CellState s;
  s.stations = {Slot::empty, Slot::wp1, Slot::empty};
  s.input_remaining = {19, 20};
  cell.set_state(s);
  const auto r = cell.step(noop, deliver);
  EXPECT_EQ(r.reward, 49.0);
  EXPECT_EQ(r.info.deliveries, 1);
  EXPECT_FALSE(r.info.action_applied[0]);
  EXPECT_TRUE(r.info.action_applied[1]);
}

TEST(RobotCell, TimeoutAtStepLimit) {
  CellConfig cfg;
  cfg.max_steps = 3;
  RobotCell cell(cfg);
  EXPECT_EQ(cell.step(noop, noop).reward, -1.0);
  EXPECT_EQ(cell.step(noop, noop).reward, -1.0);
  const auto r = cell.step(noop, noop);
  EXPECT_EQ(r.reward, -101.0);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.info.timeout);
}

TEST(RobotCell, InvalidActionThrows) {
  RobotCell cell;
  EXPECT_THROW(cell.step(10, 0), DomainError);
  EXPECT_THROW(cell.step(0, -1), DomainError);
}

TEST(RobotCell, StepAfterDoneThrows) {
  CellConfig cfg;
  cfg.max_steps = 1;
  RobotCell cell(cfg);
  cell.step(noop, noop);
  EXPECT_THROW(cell.step(noop, noop), StateError);
}

TEST(RobotCell, BadConfigThrows) {
  CellConfig cfg;
  cfg.target = {0, 3};
  EXPECT_THROW(RobotCell{cfg}, DomainError);
}

TEST(RobotCell, RobotOneActsFirst) {
  RobotCell cell;
  // Both fetch onto S1: robot 1 wins, robot 2's precondition then fails.
  const auto r = cell.step(fetch_wp1_s1, fetch_wp2_s1);
  EXPECT_EQ(cell.state().stations[0], Slot::wp1);
  EXPECT_TRUE(r.info.action_applied[0]);
  EXPECT_FALSE(r.info.action_applied[1]);
  EXPECT_EQ(cell.state().input_remaining, (std::array<int, 2>{19, 20}));
}

TEST(RobotCell, FetchIntoS2Fails) {
  CellState s;
  s.input_remaining = {5, 5};
  int d = 0;
  EXPECT_FALSE(apply_action(s, fetch_wp1_s2, d));
  EXPECT_FALSE(apply_action(s, fetch_wp2_s2, d));
}

TEST(RobotCell, OffRoutePieceHopsBackToEntry) {
  CellState s;
  s.stations = {Slot::empty, Slot::empty, Slot::wp1};
  int d = 0;
  ASSERT_TRUE(apply_action(s, advance_wp1, d));
  EXPECT_EQ(s.stations, (std::array<Slot, 3>{Slot::wp1, Slot::empty, Slot::empty}));
  ASSERT_TRUE(apply_action(s, advance_wp1, d));
  EXPECT_EQ(s.stations, (std::array<Slot, 3>{Slot::empty, Slot::wp1, Slot::empty}));
}

TEST(RobotCell, EnumerateStatesHas27UniqueConfigurations) {
  const auto states = enumerate_states();
  ASSERT_EQ(states.size(), 27u);
  std::set<std::array<Slot, 3>> seen;
  for (const auto& s : states) seen.insert(s.stations);
  EXPECT_EQ(seen.size(), 27u);
  EXPECT_TRUE(seen.contains({Slot::wp1, Slot::wp1, Slot::wp1}));
  EXPECT_TRUE(seen.contains({Slot::empty, Slot::empty, Slot::empty}));
}

TEST(RobotCell, OneHotIndexIsBijectionWithEnumeration) {
  RobotCell cell;
  const auto states = enumerate_states();
  for (std::size_t i = 0; i < states.size(); ++i) {
    CellState s = states[i];
    s.input_remaining = {20, 20};
    cell.set_state(s);
    const auto obs = cell.observe();
    const auto hot = std::find(obs.begin(), obs.begin() + 27, 1.0) - obs.begin();
    EXPECT_EQ(static_cast<std::size_t>(hot), i);
    EXPECT_EQ(std::count(obs.begin(), obs.begin() + 27, 0.0), 26);
    EXPECT_EQ(configuration_from_index(i), states[i].stations);
  }
  EXPECT_THROW(configuration_from_index(27), DomainError);
}

TEST(DetectLocked, EmptyCellWithInputsIsNotLocked) {
  CellState s;
  s.input_remaining = {1, 1};
  EXPECT_FALSE(detect_locked(s));
}

TEST(DetectLocked, CrossedOffRoutePiecesAreLocked) {
  CellState s;
  s.stations = {Slot::wp2, Slot::empty, Slot::wp1};
  s.input_remaining = {3, 3};
  EXPECT_TRUE(detect_locked(s));
}

TEST(DetectLocked, FullCellWithDeliverablePieceIsNotLocked) {
  CellState s;
  s.stations = {Slot::wp1, Slot::wp2, Slot::wp2};
  EXPECT_FALSE(detect_locked(s));
}

TEST(RobotCell, LockedStateTerminatesWithPenalty) {
  RobotCell cell;
  CellState s;
  s.stations = {Slot::wp2, Slot::empty, Slot::empty};
  s.input_remaining = {20, 19};
  cell.set_state(s);
  const auto r = cell.step(fetch_wp1_s3, noop);
  EXPECT_TRUE(r.info.locked);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, -101.0);
}

TEST(RobotCell, UnequalMovementPenaltyFiresOnce) {
  CellConfig cfg;
  cfg.target = {2, 4};
  RobotCell cell(cfg);
  CellState s;
  s.stations = {Slot::wp1, Slot::wp1, Slot::empty};
  s.input_remaining = {0, 4};
  s.output_done = {0, 0};
  cell.set_state(s);
  EXPECT_EQ(cell.step(deliver, noop).reward, 49.0);
  EXPECT_EQ(cell.step(advance_wp1, noop).reward, -1.0);
  const auto r = cell.step(deliver, noop);
  EXPECT_TRUE(r.info.unequal_movement);
  EXPECT_EQ(r.reward, -1.0 + 50.0 - 30.0);
  int penalties = 1;
  Rng rng(3);
  while (!cell.state().done) {
    const auto x = cell.step(static_cast<int>(rng.below(10)), static_cast<int>(rng.below(10)));
    penalties += x.info.unequal_movement ? 1 : 0;
  }
  EXPECT_EQ(penalties, 1);
}

TEST(RobotCell, RandomEpisodesConservePieces) {
  CellConfig cfg;
  cfg.target = {4, 3};
  RobotCell cell(cfg);
  Rng rng(17);
  for (int ep = 0; ep < 200; ++ep) {
    cell.reset();
    while (!cell.state().done) {
      cell.step(static_cast<int>(rng.below(10)), static_cast<int>(rng.below(10)));
      ASSERT_EQ(pieces_of(cell.state(), 0), 4);
      ASSERT_EQ(pieces_of(cell.state(), 1), 3);
    }
  }
}
