#include "orthoforge/sched.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "orthoforge/error.hpp"
#include "orthoforge/rng.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

const char* action_name(SimAction a) {
    switch (a) {
        case SimAction::PULL: return "PULL";
        case SimAction::DONE: return "DONE";
        case SimAction::FAIL: return "FAIL";
        case SimAction::RETRY: return "RETRY";
        case SimAction::FUSE_START: return "FUSE_START";
        case SimAction::FUSE_END: return "FUSE_END";
        case SimAction::ADVANCE_TILE: return "ADVANCE_TILE";
    }
    return "?";
}

namespace {

enum PairState : int {
    UNPULLED = 0,
    RUNNING = 1,
    AWAITING_RETRY = 2,
    RETRY_RUNNING = 3,
    PAIR_DONE = 4,
};

struct TileState {
    std::vector<int> pair_state;
    int unpulled = 0;        // first attempts not yet handed out
    int not_done = 0;        // pairs not yet marked done
    std::vector<int> retry_queue;  // pair ids in first-failure order
    std::size_t retry_next = 0;
    bool fuse_started = false;
};

struct VmState {
    VmProfile prof;
    int pos = 0;
    bool busy = false;
    double busy_until = 0.0;
    int task_tile = -1;
    int task_pair = -1;
    bool task_is_retry = false;
    bool task_failed = false;
    // Pair-task spans; fusion spans live on the side and can overlap the
    // captain's own pulls, so idle time comes from the union of both.
    std::vector<std::pair<double, double>> spans;
};

double union_length(std::vector<std::pair<double, double>> spans) {
    std::sort(spans.begin(), spans.end());
    double total = 0.0, hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : spans) {
        double a = std::max(s.first, hi);
        if (s.second > a) total += s.second - a;
        hi = std::max(hi, s.second);
    }
    return total;
}

class Sim {
  public:
    Sim(const std::vector<VmProfile>& vms, const WorkPlan& plan, SimMode mode)
        : plan_(plan), mode_(mode), rng_(plan.seed) {
        if (plan.tiles <= 0) throw InvalidInput("work plan has no tiles");
        if (plan.pairs_per_tile < 0)
            throw InvalidInput("negative pairs_per_tile");
        if (plan.pair_minutes <= 0.0)
            throw InvalidInput("pair_minutes must be positive");
        if (plan.fusion_minutes < 0.0)
            throw InvalidInput("fusion_minutes must not be negative");
        if (plan.failure_prob < 0.0 || plan.failure_prob >= 1.0)
            throw InvalidInput("failure_prob must lie in [0,1)");
        if (vms.empty()) throw InvalidInput("fleet is empty");
        int captains = 0;
        for (const auto& v : vms) {
            if (v.role == VmRole::CAPTAIN) ++captains;
            if (v.pair_minutes < 0.0 || v.fusion_minutes < 0.0)
                throw InvalidInput("negative per-VM duration");
        }
        if (captains != 1)
            throw InvalidInput("fleet needs exactly one captain");
        vms_.reserve(vms.size());
        for (const auto& v : vms) {
            VmState st;
            st.prof = v;
            vms_.push_back(std::move(st));
        }
        tiles_.resize(plan.tiles);
        for (auto& t : tiles_) {
            t.pair_state.assign(plan.pairs_per_tile, UNPULLED);
            t.unpulled = plan.pairs_per_tile;
            t.not_done = plan.pairs_per_tile;
        }
    }

    SimTimeline run() {
        double now = 0.0;
        while (next_fuse_ < plan_.tiles) {
            settle(now);
            if (next_fuse_ >= plan_.tiles) break;
            double next = std::numeric_limits<double>::infinity();
            for (const auto& vm : vms_)
                if (vm.busy) next = std::min(next, vm.busy_until);
            if (fusing_tile_ >= 0) next = std::min(next, fuse_end_);
            if (!std::isfinite(next))
                throw InvalidInput("simulation stalled with unfused tiles");
            now = next;
        }
        tl_.makespan = now;
        tl_.vm_idle.resize(vms_.size());
        for (std::size_t i = 0; i < vms_.size(); ++i) {
            auto spans = vms_[i].spans;
            if (vms_[i].prof.role == VmRole::CAPTAIN)
                spans.insert(spans.end(), fuse_spans_.begin(),
                             fuse_spans_.end());
            tl_.vm_idle[i] = now - union_length(std::move(spans));
        }
        return std::move(tl_);
    }

  private:
    double pair_minutes(const VmState& vm) const {
        return vm.prof.pair_minutes > 0.0 ? vm.prof.pair_minutes
                                          : plan_.pair_minutes;
    }
    double fusion_minutes(const VmState& vm) const {
        return vm.prof.fusion_minutes > 0.0 ? vm.prof.fusion_minutes
                                            : plan_.fusion_minutes;
    }

    void emit(double t, int vm, SimAction a, int tile, int pair) {
        tl_.events.push_back(SimEvent{t, vm, a, tile, pair});
        if (a == SimAction::FAIL) ++tl_.failed_attempts;
        if (a == SimAction::RETRY) ++tl_.retries;
    }

    // Runs completions and assignments until nothing changes at time `now`.
    // Zero-length fusions resolve inside one settle call.
    void settle(double now) {
        bool progress = true;
        while (progress) {
            progress = false;
            for (auto& vm : vms_) {
                if (vm.busy && vm.busy_until == now) {
                    complete(vm, now);
                    progress = true;
                }
            }
            if (fusing_tile_ >= 0 && fuse_end_ == now) {
                finish_fusion(now);
                progress = true;
            }
            if (next_fuse_ >= plan_.tiles) return;
            for (auto& vm : vms_) {
                if (!vm.busy && assign(vm, now)) progress = true;
            }
        }
    }

    void complete(VmState& vm, double now) {
        vm.busy = false;
        TileState& t = tiles_[vm.task_tile];
        if (vm.task_is_retry) {
            // Second attempts count as done even when they fail again.
            if (vm.task_failed)
                emit(now, vm.prof.id, SimAction::FAIL, vm.task_tile,
                     vm.task_pair);
            emit(now, vm.prof.id, SimAction::DONE, vm.task_tile, vm.task_pair);
            t.pair_state[vm.task_pair] = PAIR_DONE;
            --t.not_done;
        } else if (vm.task_failed) {
            emit(now, vm.prof.id, SimAction::FAIL, vm.task_tile, vm.task_pair);
            t.pair_state[vm.task_pair] = AWAITING_RETRY;
            t.retry_queue.push_back(vm.task_pair);
        } else {
            emit(now, vm.prof.id, SimAction::DONE, vm.task_tile, vm.task_pair);
            t.pair_state[vm.task_pair] = PAIR_DONE;
            --t.not_done;
        }
        vm.task_tile = vm.task_pair = -1;
    }

    void finish_fusion(double now) {
        emit(now, captain_id(), SimAction::FUSE_END, fusing_tile_, -1);
        fusing_tile_ = -1;
        ++next_fuse_;
        if (mode_ == SimMode::BARRIER && next_fuse_ < plan_.tiles) {
            // The naive workflow releases everyone at once.
            for (auto& vm : vms_) {
                vm.pos = next_fuse_;
                emit(now, vm.prof.id, SimAction::ADVANCE_TILE, next_fuse_, -1);
            }
        }
    }

    int captain_id() const {
        for (const auto& vm : vms_)
            if (vm.prof.role == VmRole::CAPTAIN) return vm.prof.id;
        return -1;
    }

    bool assign(VmState& vm, double now) {
        if (vm.prof.role == VmRole::CAPTAIN && try_start_fusion(vm, now))
            return true;
        return try_pull(vm, now);
    }

    bool try_start_fusion(VmState& vm, double now) {
        if (fusing_tile_ >= 0) return false;
        if (next_fuse_ >= plan_.tiles) return false;
        TileState& t = tiles_[next_fuse_];
        if (t.not_done != 0 || t.fuse_started) return false;
        t.fuse_started = true;
        fusing_tile_ = next_fuse_;
        fuse_end_ = now + fusion_minutes(vm);
        fuse_spans_.emplace_back(now, fuse_end_);
        emit(now, vm.prof.id, SimAction::FUSE_START, fusing_tile_, -1);
        if (mode_ == SimMode::PIPELINED && fusing_tile_ + 1 < plan_.tiles &&
            vm.pos == fusing_tile_) {
            vm.pos = fusing_tile_ + 1;
            emit(now, vm.prof.id, SimAction::ADVANCE_TILE, vm.pos, -1);
        }
        return true;
    }

    bool try_pull(VmState& vm, double now) {
        if (mode_ == SimMode::BARRIER) {
            if (tiles_[next_fuse_].fuse_started) return false;
            vm.pos = next_fuse_;
            return pull_from(vm, next_fuse_, now);
        }
        if (vm.prof.role == VmRole::SMALL) {
            // Small VMs chase unpulled work and skip finished queues; they
            // never serve retries.
            while (vm.pos + 1 < plan_.tiles && tiles_[vm.pos].unpulled == 0) {
                ++vm.pos;
                emit(now, vm.prof.id, SimAction::ADVANCE_TILE, vm.pos, -1);
            }
            if (tiles_[vm.pos].unpulled == 0) return false;
            return pull_from(vm, vm.pos, now);
        }
        if (vm.prof.role == VmRole::LARGE) {
            // Large VMs hold back for the retry phase and advance only once
            // the whole tile is done, retries included.
            while (vm.pos + 1 < plan_.tiles && tiles_[vm.pos].not_done == 0) {
                ++vm.pos;
                emit(now, vm.prof.id, SimAction::ADVANCE_TILE, vm.pos, -1);
            }
            return pull_from(vm, vm.pos, now);
        }
        // Captain: pulls on its own tile; tile changes happen at FUSE_START.
        return pull_from(vm, vm.pos, now);
    }

    bool pull_from(VmState& vm, int tile, double now) {
        TileState& t = tiles_[tile];
        if (t.unpulled > 0) {
            for (int p = 0; p < plan_.pairs_per_tile; ++p) {
                if (t.pair_state[p] == UNPULLED) {
                    start_attempt(vm, tile, p, false, now);
                    return true;
                }
            }
        }
        if (vm.prof.role != VmRole::SMALL && t.unpulled == 0 &&
            t.retry_next < t.retry_queue.size()) {
            int p = t.retry_queue[t.retry_next++];
            start_attempt(vm, tile, p, true, now);
            return true;
        }
        return false;
    }

    void start_attempt(VmState& vm, int tile, int pair, bool is_retry,
                       double now) {
        TileState& t = tiles_[tile];
        if (is_retry) {
            t.pair_state[pair] = RETRY_RUNNING;
        } else {
            t.pair_state[pair] = RUNNING;
            --t.unpulled;
        }
        vm.busy = true;
        vm.task_tile = tile;
        vm.task_pair = pair;
        vm.task_is_retry = is_retry;
        vm.task_failed = plan_.failure_prob > 0.0 &&
                         uniform_real(rng_) < plan_.failure_prob;
        double dur = pair_minutes(vm);
        vm.busy_until = now + dur;
        vm.spans.emplace_back(now, vm.busy_until);
        emit(now, vm.prof.id, is_retry ? SimAction::RETRY : SimAction::PULL,
             tile, pair);
    }

    WorkPlan plan_;
    SimMode mode_;
    Rng rng_;
    std::vector<VmState> vms_;
    std::vector<TileState> tiles_;
    std::vector<std::pair<double, double>> fuse_spans_;
    int next_fuse_ = 0;
    int fusing_tile_ = -1;
    double fuse_end_ = 0.0;
    SimTimeline tl_;
};

}  // namespace

SimTimeline simulate(const std::vector<VmProfile>& vms, const WorkPlan& plan,
                     SimMode mode) {
    Sim sim(vms, plan, mode);
    return sim.run();
}

ModeComparison compare_modes(const std::vector<VmProfile>& vms,
                             const WorkPlan& plan) {
    ModeComparison out;
    out.barrier_minutes = simulate(vms, plan, SimMode::BARRIER).makespan;
    out.pipelined_minutes = simulate(vms, plan, SimMode::PIPELINED).makespan;
    out.saving_minutes = out.barrier_minutes - out.pipelined_minutes;
    return out;
}

SimTimeline replay_figure_fixture() {
    std::vector<VmProfile> vms{
        {0, VmRole::CAPTAIN, 0.0, 0.0},
        {1, VmRole::SMALL, 0.0, 0.0},
        {2, VmRole::LARGE, 0.0, 0.0},
    };
    WorkPlan plan;
    plan.tiles = 2;
    plan.pairs_per_tile = 3;
    plan.pair_minutes = 20.0;
    plan.fusion_minutes = 60.0;
    plan.failure_prob = 0.0;
    plan.seed = 0;
    return simulate(vms, plan, SimMode::PIPELINED);
}

std::vector<VmProfile> default_fleet(int total, int large) {
    if (total < 1) throw InvalidInput("fleet needs at least the captain");
    if (large < 0 || large > total - 1)
        throw InvalidInput("large VM count out of range");
    std::vector<VmProfile> vms;
    vms.push_back(VmProfile{0, VmRole::CAPTAIN, 0.0, 0.0});
    int small = total - 1 - large;
    for (int i = 0; i < small; ++i)
        vms.push_back(VmProfile{1 + i, VmRole::SMALL, 0.0, 0.0});
    for (int i = 0; i < large; ++i)
        vms.push_back(VmProfile{1 + small + i, VmRole::LARGE, 0.0, 0.0});
    return vms;
}

PlanFile read_plan_file(const std::string& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    bool have_tiles = false, have_pairs = false, have_pair_min = false,
         have_fuse_min = false;
    WorkPlan plan;
    int total_vms = 10;
    int large_vms = 0;
    while (std::getline(in, line)) {
        std::string s{trim(line)};
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("plan line without '=': " + s);
        std::string key{trim(s.substr(0, eq))};
        std::string val{trim(s.substr(eq + 1))};
        if (key == "tiles") {
            plan.tiles = static_cast<int>(parse_int(val, key));
            have_tiles = true;
        } else if (key == "pairs_per_tile") {
            plan.pairs_per_tile = static_cast<int>(parse_int(val, key));
            have_pairs = true;
        } else if (key == "pair_minutes") {
            plan.pair_minutes = parse_double(val, key);
            have_pair_min = true;
        } else if (key == "fusion_minutes") {
            plan.fusion_minutes = parse_double(val, key);
            have_fuse_min = true;
        } else if (key == "failure_prob") {
            plan.failure_prob = parse_double(val, key);
        } else if (key == "seed") {
            plan.seed = static_cast<std::uint64_t>(parse_int(val, key));
        } else if (key == "vms") {
            total_vms = static_cast<int>(parse_int(val, key));
        } else if (key == "large_vms") {
            large_vms = static_cast<int>(parse_int(val, key));
        } else {
            throw InvalidInput("unknown plan key: " + key);
        }
    }
    if (!have_tiles || !have_pairs || !have_pair_min || !have_fuse_min)
        throw InvalidInput(
            "plan needs tiles, pairs_per_tile, pair_minutes, fusion_minutes");
    PlanFile out;
    out.plan = plan;
    out.vms = default_fleet(total_vms, large_vms);
    return out;
}

std::string format_timeline_csv(const SimTimeline& tl) {
    std::string out = "time_min,vm_id,action,tile,pair\n";
    for (const auto& ev : tl.events) {
        out += fmt_double(ev.time_min);
        out += ',';
        out += fmt_int(ev.vm);
        out += ',';
        out += action_name(ev.action);
        out += ',';
        if (ev.tile >= 0) out += fmt_int(ev.tile);
        out += ',';
        if (ev.pair >= 0) out += fmt_int(ev.pair);
        out += '\n';
    }
    return out;
}

void write_timeline_csv(const SimTimeline& tl, const std::string& path) {
    write_text_file(path, format_timeline_csv(tl));
}

}  // namespace orthoforge
