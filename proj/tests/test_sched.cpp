#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "orthoforge/error.hpp"
#include "orthoforge/rng.hpp"
#include "orthoforge/sched.hpp"
#include "orthoforge/textio.hpp"
#include "test_util.hpp"

using namespace orthoforge;

namespace {

const SimEvent* find_event(const SimTimeline& tl, SimAction a, int tile,
                           int vm = -2) {
  for (const auto& e : tl.events)
    if (e.action == a && e.tile == tile && (vm == -2 || e.vm == vm)) return &e;
  return nullptr;
}

std::vector<double> times_of(const SimTimeline& tl, SimAction a) {
  std::vector<double> out;
  for (const auto& e : tl.events)
    if (e.action == a) out.push_back(e.time_min);
  return out;
}

}  // namespace

TEST_CASE("fleet construction orders captain, smalls, larges") {
  const auto fleet = default_fleet(10, 3);
  REQUIRE(fleet.size() == 10);
  CHECK(fleet[0].role == VmRole::CAPTAIN);
  CHECK(fleet[0].id == 0);
  for (int i = 1; i <= 6; ++i) CHECK(fleet[i].role == VmRole::SMALL);
  for (int i = 7; i <= 9; ++i) CHECK(fleet[i].role == VmRole::LARGE);
  for (int i = 0; i < 10; ++i) CHECK(fleet[i].id == i);

  CHECK_THROWS_AS(default_fleet(0, 0), InvalidInput);
  CHECK_THROWS_AS(default_fleet(1, 1), InvalidInput);
  CHECK_THROWS_AS(default_fleet(5, -1), InvalidInput);
}

TEST_CASE("plan inputs are validated") {
  WorkPlan plan;
  plan.tiles = 1;
  plan.pairs_per_tile = 1;
  plan.pair_minutes = 20.0;
  plan.fusion_minutes = 60.0;

  CHECK_THROWS_AS(simulate({}, plan, SimMode::PIPELINED), InvalidInput);
  std::vector<VmProfile> no_captain{{0, VmRole::SMALL, 0.0, 0.0}};
  CHECK_THROWS_AS(simulate(no_captain, plan, SimMode::PIPELINED),
                  InvalidInput);
  std::vector<VmProfile> two_captains{{0, VmRole::CAPTAIN, 0.0, 0.0},
                                      {1, VmRole::CAPTAIN, 0.0, 0.0}};
  CHECK_THROWS_AS(simulate(two_captains, plan, SimMode::PIPELINED),
                  InvalidInput);

  const auto fleet = default_fleet(3, 1);
  WorkPlan bad = plan;
  bad.tiles = 0;
  CHECK_THROWS_AS(simulate(fleet, bad, SimMode::PIPELINED), InvalidInput);
  bad = plan;
  bad.pair_minutes = 0.0;
  CHECK_THROWS_AS(simulate(fleet, bad, SimMode::PIPELINED), InvalidInput);
  bad = plan;
  bad.failure_prob = 1.0;
  CHECK_THROWS_AS(simulate(fleet, bad, SimMode::PIPELINED), InvalidInput);
}

TEST_CASE("three-vm walkthrough timeline") {
  const SimTimeline tl = replay_figure_fixture();
  CHECK(tl.makespan == 140.0);
  CHECK(tl.failed_attempts == 0);
  CHECK(tl.retries == 0);

  for (std::size_t i = 1; i < tl.events.size(); ++i)
    CHECK(tl.events[i - 1].time_min <= tl.events[i].time_min);

  // the captain opens the first fusion as soon as tile 0 completes
  const SimEvent* f0 = find_event(tl, SimAction::FUSE_START, 0);
  REQUIRE(f0);
  CHECK(f0->time_min == 20.0);
  CHECK(f0->vm == 0);
  // and immediately keeps pulling stereo work from the next tile
  const SimEvent* cap_pull = find_event(tl, SimAction::PULL, 1, 0);
  REQUIRE(cap_pull);
  CHECK(cap_pull->time_min == 20.0);

  const SimEvent* f1 = find_event(tl, SimAction::FUSE_START, 1);
  REQUIRE(f1);
  CHECK(f1->time_min == 80.0);  // fusions run one at a time, in order
  CHECK(times_of(tl, SimAction::FUSE_END) ==
        std::vector<double>({80.0, 140.0}));

  // the helpers move on at 20 while the captain stays responsible
  const SimEvent* sm = find_event(tl, SimAction::ADVANCE_TILE, 1, 1);
  REQUIRE(sm);
  CHECK(sm->time_min == 20.0);

  REQUIRE(tl.vm_idle.size() == 3);
  CHECK(tl.vm_idle[0] == 0.0);    // pairs plus both fusions tile the day
  CHECK(tl.vm_idle[1] == 100.0);  // helpers are done at 40
  CHECK(tl.vm_idle[2] == 100.0);

  // the naive barrier variant waits out each fusion
  std::vector<VmProfile> vms{{0, VmRole::CAPTAIN, 0.0, 0.0},
                             {1, VmRole::SMALL, 0.0, 0.0},
                             {2, VmRole::LARGE, 0.0, 0.0}};
  WorkPlan plan;
  plan.tiles = 2;
  plan.pairs_per_tile = 3;
  plan.pair_minutes = 20.0;
  plan.fusion_minutes = 60.0;
  const ModeComparison cmp = compare_modes(vms, plan);
  CHECK(cmp.barrier_minutes == 160.0);
  CHECK(cmp.pipelined_minutes == 140.0);
  CHECK(cmp.saving_minutes == 20.0);
}

TEST_CASE("ten-vm hundred-tile plan hits the reference makespans") {
  WorkPlan plan;
  plan.tiles = 100;
  plan.pairs_per_tile = 80;
  plan.pair_minutes = 20.0;
  plan.fusion_minutes = 60.0;
  const auto fleet = default_fleet(10, 0);

  const ModeComparison cmp = compare_modes(fleet, plan);
  // 8 pull rounds of 20 min plus one 60 min fusion, 100 times over
  CHECK(cmp.barrier_minutes == 22000.0);
  CHECK(cmp.pipelined_minutes == 16060.0);
  CHECK(cmp.saving_minutes == 5940.0);
  // roughly four days of wall clock saved
  CHECK(cmp.saving_minutes / (60.0 * 24.0) > 3.9);
  CHECK(cmp.saving_minutes / (60.0 * 24.0) < 4.2);
}

TEST_CASE("degenerate plans") {
  const auto fleet = default_fleet(3, 1);

  WorkPlan zero_fusion;
  zero_fusion.tiles = 2;
  zero_fusion.pairs_per_tile = 3;
  zero_fusion.pair_minutes = 20.0;
  zero_fusion.fusion_minutes = 0.0;
  CHECK(simulate(fleet, zero_fusion, SimMode::PIPELINED).makespan == 40.0);

  WorkPlan no_pairs;
  no_pairs.tiles = 3;
  no_pairs.pairs_per_tile = 0;
  no_pairs.pair_minutes = 20.0;
  no_pairs.fusion_minutes = 60.0;
  // nothing overlaps: the captain just fuses three tiles back to back
  CHECK(simulate(fleet, no_pairs, SimMode::PIPELINED).makespan == 180.0);

  WorkPlan solo;
  solo.tiles = 1;
  solo.pairs_per_tile = 1;
  solo.pair_minutes = 20.0;
  solo.fusion_minutes = 60.0;
  CHECK(simulate(default_fleet(1, 0), solo, SimMode::PIPELINED).makespan ==
        80.0);
}

TEST_CASE("per-vm duration overrides") {
  std::vector<VmProfile> vms{{0, VmRole::CAPTAIN, 0.0, 30.0},
                             {1, VmRole::SMALL, 10.0, 0.0}};
  WorkPlan plan;
  plan.tiles = 1;
  plan.pairs_per_tile = 2;
  plan.pair_minutes = 20.0;
  plan.fusion_minutes = 60.0;
  const SimTimeline tl = simulate(vms, plan, SimMode::PIPELINED);
  // the fast helper finishes its pair at 10, the captain at 20; the
  // captain's personal fusion speed then takes over
  CHECK(tl.makespan == 50.0);
}

TEST_CASE("failure handling follows the one-retry contract") {
  Rng prng(4242);
  for (int iter = 0; iter < 40; ++iter) {
    WorkPlan plan;
    plan.tiles = 2 + static_cast<int>(uniform_u64(prng, 5));
    plan.pairs_per_tile = 1 + static_cast<int>(uniform_u64(prng, 10));
    plan.pair_minutes = 5.0 + 5.0 * static_cast<double>(uniform_u64(prng, 4));
    plan.fusion_minutes =
        10.0 * static_cast<double>(uniform_u64(prng, 4));
    plan.failure_prob = 0.05 + 0.25 * uniform_real(prng);
    plan.seed = uniform_u64(prng, 1u << 30);
    const int total = 3 + static_cast<int>(uniform_u64(prng, 5));
    const int large = static_cast<int>(uniform_u64(prng, total));
    const auto fleet = default_fleet(total, std::min(large, total - 1));

    const SimTimeline tl = simulate(fleet, plan, SimMode::PIPELINED);

    for (std::size_t i = 1; i < tl.events.size(); ++i)
      REQUIRE(tl.events[i - 1].time_min <= tl.events[i].time_min);

    std::map<std::pair<int, int>, int> pulls, dones, fails, retries;
    int fuse_ends = 0;
    double last_fuse_end = -1.0;
    for (const auto& e : tl.events) {
      const auto key = std::make_pair(e.tile, e.pair);
      switch (e.action) {
        case SimAction::PULL: ++pulls[key]; break;
        case SimAction::DONE: ++dones[key]; break;
        case SimAction::FAIL: ++fails[key]; break;
        case SimAction::RETRY:
          ++retries[key];
          REQUIRE(fleet[e.vm].role != VmRole::SMALL);
          break;
        case SimAction::FUSE_END:
          ++fuse_ends;
          last_fuse_end = e.time_min;
          break;
        default: break;
      }
    }

    int total_fails = 0, total_retries = 0;
    for (int t = 0; t < plan.tiles; ++t)
      for (int p = 0; p < plan.pairs_per_tile; ++p) {
        const auto key = std::make_pair(t, p);
        REQUIRE(pulls[key] == 1);
        REQUIRE(dones[key] == 1);
        REQUIRE(fails[key] <= 2);
        REQUIRE(retries[key] == (fails[key] > 0 ? 1 : 0));
        total_fails += fails[key];
        total_retries += retries[key];
      }
    REQUIRE(tl.failed_attempts == total_fails);
    REQUIRE(tl.retries == total_retries);
    REQUIRE(fuse_ends == plan.tiles);
    REQUIRE(tl.makespan == last_fuse_end);

    REQUIRE(tl.vm_idle.size() == fleet.size());
    for (double idle : tl.vm_idle) {
      REQUIRE(idle >= 0.0);
      REQUIRE(idle <= tl.makespan);
    }

    // the overlap-free baseline can never beat the pipelined run
    const SimTimeline barrier = simulate(fleet, plan, SimMode::BARRIER);
    REQUIRE(tl.makespan <= barrier.makespan);

    // a fixed seed fixes the whole event list
    const SimTimeline again = simulate(fleet, plan, SimMode::PIPELINED);
    REQUIRE(format_timeline_csv(again) == format_timeline_csv(tl));
  }
}

TEST_CASE("barrier mode never pulls through an active fusion") {
  WorkPlan plan;
  plan.tiles = 4;
  plan.pairs_per_tile = 6;
  plan.pair_minutes = 15.0;
  plan.fusion_minutes = 45.0;
  plan.failure_prob = 0.2;
  plan.seed = 99;
  const auto fleet = default_fleet(4, 1);
  const SimTimeline tl = simulate(fleet, plan, SimMode::BARRIER);

  std::vector<std::pair<double, double>> fusions;
  double start = -1.0;
  for (const auto& e : tl.events) {
    if (e.action == SimAction::FUSE_START) start = e.time_min;
    if (e.action == SimAction::FUSE_END) fusions.push_back({start, e.time_min});
  }
  REQUIRE(fusions.size() == 4);
  for (const auto& e : tl.events) {
    if (e.action != SimAction::PULL && e.action != SimAction::RETRY) continue;
    for (const auto& f : fusions) {
      const bool inside = e.time_min > f.first && e.time_min < f.second;
      REQUIRE(!inside);
    }
  }

  // pipelining is visible in the other mode: stereo work starts on the next
  // tile while the first fusion is still running
  const SimTimeline pl = simulate(fleet, plan, SimMode::PIPELINED);
  double first_fuse_end = -1.0;
  for (const auto& e : pl.events)
    if (e.action == SimAction::FUSE_END) {
      first_fuse_end = e.time_min;
      break;
    }
  bool overlapped = false;
  for (const auto& e : pl.events)
    if (e.action == SimAction::PULL && e.tile > 0 &&
        e.time_min < first_fuse_end)
      overlapped = true;
  CHECK(overlapped);
}

TEST_CASE("plan files parse with defaults and validation") {
  const auto dir = testutil::scratch_dir("of_sched_plans");

  const std::string full = (dir / "full.plan").string();
  write_text_file(full,
                  "# demo plan\n"
                  "tiles = 100\n"
                  "pairs_per_tile = 80\n"
                  "pair_minutes = 20\n"
                  "fusion_minutes = 60\n"
                  "failure_prob = 0.1\n"
                  "seed = 7\n"
                  "vms = 12\n"
                  "large_vms = 2\n");
  const PlanFile pf = read_plan_file(full);
  CHECK(pf.plan.tiles == 100);
  CHECK(pf.plan.pairs_per_tile == 80);
  CHECK(pf.plan.pair_minutes == 20.0);
  CHECK(pf.plan.fusion_minutes == 60.0);
  CHECK(pf.plan.failure_prob == 0.1);
  CHECK(pf.plan.seed == 7);
  REQUIRE(pf.vms.size() == 12);
  CHECK(pf.vms[0].role == VmRole::CAPTAIN);
  int smalls = 0, larges = 0;
  for (const auto& vm : pf.vms) {
    smalls += vm.role == VmRole::SMALL;
    larges += vm.role == VmRole::LARGE;
  }
  CHECK(smalls == 9);
  CHECK(larges == 2);

  const std::string minimal = (dir / "minimal.plan").string();
  write_text_file(minimal,
                  "tiles = 2\n"
                  "pairs_per_tile = 3\n"
                  "pair_minutes = 20\n"
                  "fusion_minutes = 60\n");
  const PlanFile mf = read_plan_file(minimal);
  CHECK(mf.vms.size() == 10);  // fleet size defaults
  CHECK(mf.plan.failure_prob == 0.0);
  CHECK(mf.plan.seed == 0);

  const std::string missing = (dir / "missing.plan").string();
  write_text_file(missing, "tiles = 2\npairs_per_tile = 3\n");
  CHECK_THROWS_AS(read_plan_file(missing), InvalidInput);

  const std::string unknown = (dir / "unknown.plan").string();
  write_text_file(unknown,
                  "tiles = 2\npairs_per_tile = 3\npair_minutes = 20\n"
                  "fusion_minutes = 60\nwhat = 1\n");
  CHECK_THROWS_AS(read_plan_file(unknown), InvalidInput);
}

TEST_CASE("timeline serialization carries every event") {
  const SimTimeline tl = replay_figure_fixture();
  const std::string csv = format_timeline_csv(tl);
  CHECK(csv.rfind("time_min,vm_id,action,tile,pair\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<long>(tl.events.size()) + 1);
  // fuse rows leave the pair column empty
  CHECK(csv.find("20,0,FUSE_START,0,\n") != std::string::npos);
  CHECK(csv.find("140,0,FUSE_END,1,\n") != std::string::npos);
}
