#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "orthoforge/sched.hpp"
#include "orthoforge/textio.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fleet schedule simulator"};
  std::string plan_path;
  std::string mode_name = "pipelined";
  long long seed = -1;
  app.add_option("--plan", plan_path, "plan file")->required();
  app.add_option("--mode", mode_name, "pipelined or barrier")
      ->check(CLI::IsMember({"pipelined", "barrier"}));
  app.add_option("--seed", seed, "override the plan seed");
  CLI11_PARSE(app, argc, argv);

  try {
    orthoforge::PlanFile pf = orthoforge::read_plan_file(plan_path);
    if (seed >= 0) pf.plan.seed = static_cast<std::uint64_t>(seed);
    const orthoforge::SimMode mode = mode_name == "barrier"
                                         ? orthoforge::SimMode::BARRIER
                                         : orthoforge::SimMode::PIPELINED;
    const orthoforge::SimTimeline tl =
        orthoforge::simulate(pf.vms, pf.plan, mode);
    std::fputs(orthoforge::format_timeline_csv(tl).c_str(), stdout);
    std::fprintf(stderr, "makespan_minutes = %s\n",
                 orthoforge::fmt_double(tl.makespan).c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
