#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace orthoforge {

// Discrete-event model of the distributed stereo/DSM workflow: a fleet of
// virtual machines pulls per-tile pair tasks from a shared queue, failed
// pairs get exactly one retry, and the captain fuses each finished tile.

enum class VmRole { CAPTAIN, LARGE, SMALL };

struct VmProfile {
    int id = 0;
    VmRole role = VmRole::SMALL;
    // Per-VM duration overrides; 0 means "use the plan-wide value".
    double pair_minutes = 0.0;
    double fusion_minutes = 0.0;  // meaningful for the captain only
};

struct WorkPlan {
    int tiles = 0;
    int pairs_per_tile = 0;
    double pair_minutes = 0.0;
    double fusion_minutes = 0.0;
    double failure_prob = 0.0;  // per attempt, must stay in [0,1)
    std::uint64_t seed = 0;
};

enum class SimMode { PIPELINED, BARRIER };

enum class SimAction {
    PULL,
    DONE,
    FAIL,
    RETRY,
    FUSE_START,
    FUSE_END,
    ADVANCE_TILE,
};

const char* action_name(SimAction a);

struct SimEvent {
    double time_min = 0.0;
    int vm = -1;
    SimAction action = SimAction::PULL;
    int tile = -1;
    int pair = -1;  // -1 for fuse and advance events
};

struct SimTimeline {
    std::vector<SimEvent> events;  // emission order, time non-decreasing
    double makespan = 0.0;         // time of the last FUSE_END
    std::vector<double> vm_idle;   // makespan minus busy time, per fleet slot
    int failed_attempts = 0;       // FAIL events
    int retries = 0;               // RETRY pulls
};

// Runs the plan to completion.  Queue discipline:
//  - every VM pulls unprocessed pairs of its current tile, lowest pair id
//    first; a pair is handed out exactly once per attempt;
//  - when a tile has no unpulled pairs left, SMALL VMs move on to the next
//    tile while CAPTAIN and LARGE VMs stay to run the retries of pairs whose
//    first attempt failed; a retried pair counts as done whatever happens;
//  - once every pair of a tile is done LARGE VMs advance and the captain
//    starts fusing that tile.  Fusion occupies a dedicated slot on the
//    captain (one tile at a time, in tile order); the captain's pull loop
//    keeps drawing work from the next tile while a fusion is in flight, so
//    only the final tile's fusion extends the makespan;
//  - BARRIER mode instead locks the next tile until FUSE_END, which is the
//    naive workflow the pipelined one is measured against.
// Simultaneous choices break ties by (vm id, tile id, pair id).  Failure
// draws happen at pull time in event order, so a seed fixes the timeline.
SimTimeline simulate(const std::vector<VmProfile>& vms, const WorkPlan& plan,
                     SimMode mode);

struct ModeComparison {
    double barrier_minutes = 0.0;
    double pipelined_minutes = 0.0;
    double saving_minutes = 0.0;
};

ModeComparison compare_modes(const std::vector<VmProfile>& vms,
                             const WorkPlan& plan);

// The 3-VM, 2-tile, 3-pairs-per-tile walkthrough scenario: captain, one
// small, one large, 20 min pairs, 60 min fusion, no failures.
SimTimeline replay_figure_fixture();

// Captain first (id 0), then smalls, then larges.
std::vector<VmProfile> default_fleet(int total, int large);

struct PlanFile {
    WorkPlan plan;
    std::vector<VmProfile> vms;
};

// Line-oriented "key = value" file.  Keys: tiles, pairs_per_tile,
// pair_minutes, fusion_minutes, failure_prob, seed, vms, large_vms.
// The first four are required; vms defaults to 10, large_vms to 0.
PlanFile read_plan_file(const std::string& path);

std::string format_timeline_csv(const SimTimeline& tl);
void write_timeline_csv(const SimTimeline& tl, const std::string& path);

}  // namespace orthoforge
