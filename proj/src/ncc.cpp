#include "orthoforge/ncc.hpp"

#include <cmath>
#include <vector>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"

namespace orthoforge {

namespace {

bool has_signal(const Grid& g) {
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < g.nrows(); ++r)
    for (int c = 0; c < g.ncols(); ++c)
      if (g.valid(r, c)) {
        sum += g.at(r, c);
        sumsq += g.at(r, c) * g.at(r, c);
        ++n;
      }
  if (n < 2) return false;
  return sumsq - sum * sum / n > 1e-12;
}

// ZNCC of feature(r, c) against reference(r - dy, c - dx); -2 marks an
// unusable shift so every real score beats it.
double score_shift(const Grid& feature, const Grid& reference, int dx,
                   int dy) {
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < feature.nrows(); ++r) {
    const int rr = r - dy;
    if (rr < 0 || rr >= reference.nrows()) continue;
    for (int c = 0; c < feature.ncols(); ++c) {
      const int cc = c - dx;
      if (cc < 0 || cc >= reference.ncols()) continue;
      if (!feature.valid(r, c) || !reference.valid(rr, cc)) continue;
      const double a = feature.at(r, c);
      const double b = reference.at(rr, cc);
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
      ++n;
    }
  }
  if (n < 2) return -2.0;
  const double va = saa - sa * sa / n;
  const double vb = sbb - sb * sb / n;
  if (va <= 1e-12 || vb <= 1e-12) return -2.0;
  return (sab - sa * sb / n) / std::sqrt(va * vb);
}

struct Best {
  double score = -3.0;
  int dx = 0, dy = 0;

  // strictly better, or equal with the documented tie rules
  bool improves(double s, int x, int y) const {
    if (s > score) return true;
    if (s < score) return false;
    const int n_new = x * x + y * y;
    const int n_old = dx * dx + dy * dy;
    if (n_new != n_old) return n_new < n_old;
    return false;  // earlier row-major candidate keeps the slot
  }
};

}  // namespace

NccResult ncc_align(const Grid& feature, const Grid& reference, int radius,
                    int workers) {
  if (radius < 0) throw InvalidInput("ncc radius must be >= 0");
  if (!has_signal(feature) || !has_signal(reference))
    throw NoSignal("ncc input raster has no variance");

  const int span = 2 * radius + 1;
  std::vector<Best> row_best(span);
  const int nw = resolve_workers(workers);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nw)
#endif
  for (int iy = 0; iy < span; ++iy) {
    const int dy = iy - radius;
    Best b;
    for (int dx = -radius; dx <= radius; ++dx) {
      const double s = score_shift(feature, reference, dx, dy);
      if (s <= -2.0) continue;
      if (b.improves(s, dx, dy)) {
        b.score = s;
        b.dx = dx;
        b.dy = dy;
      }
    }
    row_best[iy] = b;
  }
  (void)nw;

  // merging in dy order reproduces the serial row-major scan exactly
  Best best;
  for (const Best& b : row_best) {
    if (b.score > -2.0 && best.improves(b.score, b.dx, b.dy)) {
      best.score = b.score;
      best.dx = b.dx;
      best.dy = b.dy;
    }
  }
  if (best.score <= -2.0)
    throw NoSignal("no shift produced a usable overlap");

  NccResult out;
  out.dx = best.dx;
  out.dy = best.dy;
  out.score = best.score;
  out.evaluated_shifts = span * span;
  return out;
}

namespace serial {
NccResult ncc_align(const Grid& feature, const Grid& reference, int radius) {
  if (radius < 0) throw InvalidInput("ncc radius must be >= 0");
  if (!has_signal(feature) || !has_signal(reference))
    throw NoSignal("ncc input raster has no variance");
  Best best;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double s = score_shift(feature, reference, dx, dy);
      if (s <= -2.0) continue;
      if (best.improves(s, dx, dy)) {
        best.score = s;
        best.dx = dx;
        best.dy = dy;
      }
    }
  if (best.score <= -2.0)
    throw NoSignal("no shift produced a usable overlap");
  NccResult out;
  out.dx = best.dx;
  out.dy = best.dy;
  out.score = best.score;
  out.evaluated_shifts = (2 * radius + 1) * (2 * radius + 1);
  return out;
}
}  // namespace serial

}  // namespace orthoforge
