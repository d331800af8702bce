#pragma once

#include "orthoforge/grid.hpp"

namespace orthoforge {

struct NccResult {
  int dx = 0;  // columns the second raster must move east
  int dy = 0;  // rows it must move south
  double score = 0.0;
  int evaluated_shifts = 0;
};

// Exhaustive integer-shift search maximizing zero-normalized cross
// correlation over the valid overlap. Exact score ties go to the smaller
// shift norm, then to row-major order over (dy, dx). Throws NoSignal when
// either raster is flat.
NccResult ncc_align(const Grid& feature, const Grid& reference, int radius,
                    int workers = 0);

namespace serial {
NccResult ncc_align(const Grid& feature, const Grid& reference, int radius);
}

}  // namespace orthoforge
