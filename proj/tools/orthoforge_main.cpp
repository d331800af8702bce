#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "orthoforge/fixture.hpp"
#include "orthoforge/manifest.hpp"
#include "orthoforge/stages.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tile-based semantic mapping pipeline"};
  app.require_subcommand(1);

  std::string manifest_path;
  int workers = 0;
  long long seed = -1;
  for (const std::string& name : orthoforge::stage_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("--manifest", manifest_path, "manifest file")->required();
    sub->add_option("--workers", workers, "thread count, 0 means all");
    sub->add_option("--seed", seed, "override the configured seed");
  }

  std::string fixture_dir;
  std::uint64_t fixture_seed = 17;
  CLI::App* mk =
      app.add_subcommand("make-fixture", "write a synthetic test dataset");
  mk->add_option("--dir", fixture_dir, "output directory")->required();
  mk->add_option("--seed", fixture_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "make-fixture") {
      orthoforge::FixtureOptions opt;
      opt.dir = fixture_dir;
      opt.seed = fixture_seed;
      std::printf("%s\n", orthoforge::make_fixture(opt).c_str());
      return 0;
    }
    orthoforge::Manifest manifest = orthoforge::Manifest::read(manifest_path);
    return orthoforge::run_stage(sub->get_name(), manifest, workers, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
