#pragma once

#include <string>
#include <vector>

#include "orthoforge/manifest.hpp"

namespace orthoforge {

// Runs one pipeline stage against a manifest. Stages locate inputs and
// upstream artifacts through the manifest, create their output directories,
// and write every artifact with the deterministic text writers, so a rerun
// against unchanged inputs is byte-identical. A missing upstream artifact
// raises InvalidInput naming the stage to run first.
//
// workers caps the parallel kernels (0 = library default). seed overrides
// the [params] seed when >= 0. Returns the process exit code: nonzero only
// from validate, when a report misses a threshold.
int run_stage(const std::string& name, Manifest& manifest, int workers = 0,
              long long seed = -1);

const std::vector<std::string>& stage_names();

}  // namespace orthoforge
