#include "orthoforge/mv_fusion.hpp"

#include <algorithm>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"
#include "orthoforge/rng.hpp"

namespace orthoforge {

std::size_t ViewStack::flat_index(int v, int c, int y, int x) const {
  if (layout == Layout::PER_VIEW_CHANNELS)
    return ((static_cast<std::size_t>(v) * classes + c) * height + y) * width +
           x;
  return ((static_cast<std::size_t>(c) * slots + v) * height + y) * width + x;
}

ViewStack assemble_stack(const std::vector<PredictionMap>& views, int slots,
                         ViewStack::Layout layout) {
  if (slots <= 0) throw InvalidInput("view stack needs at least one slot");
  if (static_cast<int>(views.size()) > slots)
    throw InvalidInput("more views than stack slots");
  if (views.empty()) throw InvalidInput("view stack needs at least one view");

  ViewStack st;
  st.layout = layout;
  st.slots = slots;
  st.classes = views[0].classes;
  st.height = views[0].height;
  st.width = views[0].width;
  const std::size_t plane = static_cast<std::size_t>(st.height) * st.width;
  st.data.assign(static_cast<std::size_t>(slots) * st.classes * plane, 0.0);
  st.present.assign(slots, 0);
  st.visible.assign(static_cast<std::size_t>(slots) * plane, 0);
  st.view_ids.assign(slots, "");

  for (std::size_t v = 0; v < views.size(); ++v) {
    const PredictionMap& pm = views[v];
    if (pm.classes != st.classes || pm.height != st.height ||
        pm.width != st.width)
      throw InvalidInput("view " + pm.view_id + " shape mismatch");
    if (pm.scores.size() != static_cast<std::size_t>(pm.classes) * plane ||
        pm.visible.size() != plane)
      throw InvalidInput("view " + pm.view_id + " buffer sizes wrong");
    st.present[v] = 1;
    st.view_ids[v] = pm.view_id;
    std::copy(pm.scores.begin(), pm.scores.end(),
              st.data.begin() + v * st.classes * plane);
    std::copy(pm.visible.begin(), pm.visible.end(),
              st.visible.begin() + v * plane);
  }
  return st;
}

PredictionMap extract_view(const ViewStack& stack, int slot) {
  if (slot < 0 || slot >= stack.slots)
    throw InvalidInput("extract_view: slot out of range");
  PredictionMap pm;
  pm.view_id = stack.view_ids[slot];
  pm.classes = stack.classes;
  pm.height = stack.height;
  pm.width = stack.width;
  const std::size_t plane = static_cast<std::size_t>(stack.height) *
                            stack.width;
  pm.scores.assign(stack.data.begin() + slot * stack.classes * plane,
                   stack.data.begin() + (slot + 1) * stack.classes * plane);
  pm.visible.assign(stack.visible.begin() + slot * plane,
                    stack.visible.begin() + (slot + 1) * plane);
  return pm;
}

FusionWeights FusionWeights::uniform(ViewStack::Layout layout, int slots,
                                     int classes) {
  FusionWeights fw;
  fw.layout = layout;
  fw.slots = slots;
  fw.classes = classes;
  const double v = 1.0 / slots;
  if (layout == ViewStack::Layout::PER_VIEW_CHANNELS) {
    fw.w.assign(static_cast<std::size_t>(slots) * classes, v);
    fw.bias.assign(classes, 0.0);
  } else {
    fw.w.assign(slots, v);
    fw.bias.assign(1, 0.0);
  }
  return fw;
}

FusedScores fuse(const ViewStack& stack, const FusionWeights& fw) {
  if (fw.layout != stack.layout || fw.slots != stack.slots ||
      fw.classes != stack.classes)
    throw InvalidInput("fusion weights do not match the stack");

  FusedScores out;
  out.classes = stack.classes;
  out.height = stack.height;
  out.width = stack.width;
  const std::size_t plane = static_cast<std::size_t>(out.height) * out.width;
  out.scores.assign(static_cast<std::size_t>(out.classes) * plane, 0.0);
  out.prob.assign(out.scores.size(), 0.0);

  for (int c = 0; c < out.classes; ++c) {
    const double b =
        fw.layout == ViewStack::Layout::PER_VIEW_CHANNELS ? fw.bias[c]
                                                          : fw.bias[0];
    for (std::size_t p = 0; p < plane; ++p) {
      double s = b;
      for (int v = 0; v < stack.slots; ++v)
        s += fw.weight(v, c) *
             stack.data[(static_cast<std::size_t>(v) * stack.classes + c) *
                            plane +
                        p];
      out.scores[c * plane + p] = s;
    }
  }

  for (std::size_t p = 0; p < plane; ++p) {
    double mx = -1e300;
    for (int c = 0; c < out.classes; ++c)
      mx = std::max(mx, out.scores[c * plane + p]);
    double z = 0.0;
    for (int c = 0; c < out.classes; ++c)
      z += std::exp(out.scores[c * plane + p] - mx);
    for (int c = 0; c < out.classes; ++c)
      out.prob[c * plane + p] = std::exp(out.scores[c * plane + p] - mx) / z;
  }
  return out;
}

namespace {

int count_present(const ViewStack& st) {
  int n = 0;
  for (auto p : st.present) n += p != 0;
  return n;
}

void check_gt(const ViewStack& st, const GroundTruthWindow& gt) {
  if (gt.height != st.height || gt.width != st.width)
    throw InvalidInput("ground truth window shape mismatch");
  for (auto l : gt.labels)
    if (l >= st.classes) throw InvalidInput("ground truth label out of range");
}

// Both loss contributions for one row of pixels. Writing per-pixel gradient
// entries is race-free across rows; the scalar sums are returned so callers
// can fold rows in a fixed order.
struct RowSums {
  double sv = 0.0;
  double mv = 0.0;
  std::vector<double> grad_w;
  std::vector<double> grad_bias;
};

RowSums loss_row(const ViewStack& st, const FusionWeights& fw,
                 const GroundTruthWindow& gt, const LossConfig& cfg, int y,
                 int n_present, std::vector<double>& grad_data) {
  const int C = st.classes;
  const int M = st.slots;
  const std::size_t plane = static_cast<std::size_t>(st.height) * st.width;
  RowSums out;
  out.grad_w.assign(fw.w.size(), 0.0);
  out.grad_bias.assign(fw.bias.size(), 0.0);

  std::vector<double> sm(C), fused(C), pf(C);
  for (int x = 0; x < st.width; ++x) {
    const std::size_t p = static_cast<std::size_t>(y) * st.width + x;
    const int g = gt.label(y, x);
    const double wg = cfg.class_weights[g];

    // single-view term, occlusion masked
    for (int v = 0; v < M; ++v) {
      if (!st.present[v] || st.visible[v * plane + p] == 0) continue;
      double mx = -1e300;
      for (int c = 0; c < C; ++c)
        mx = std::max(mx, st.data[(v * C + c) * plane + p]);
      double z = 0.0;
      for (int c = 0; c < C; ++c) {
        sm[c] = std::exp(st.data[(v * C + c) * plane + p] - mx);
        z += sm[c];
      }
      for (int c = 0; c < C; ++c) sm[c] /= z;
      out.sv += wg * (std::log(z) + mx - st.data[(v * C + g) * plane + p]);
      const double scale = cfg.alpha * wg / n_present;
      for (int c = 0; c < C; ++c)
        grad_data[(v * C + c) * plane + p] +=
            scale * (sm[c] - (c == g ? 1.0 : 0.0));
    }

    // fused term over every labeled point
    for (int c = 0; c < C; ++c) {
      double s = fw.layout == ViewStack::Layout::PER_VIEW_CHANNELS
                     ? fw.bias[c]
                     : fw.bias[0];
      for (int v = 0; v < M; ++v)
        s += fw.weight(v, c) * st.data[(v * C + c) * plane + p];
      fused[c] = s;
    }
    double mx = -1e300;
    for (int c = 0; c < C; ++c) mx = std::max(mx, fused[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) {
      pf[c] = std::exp(fused[c] - mx);
      z += pf[c];
    }
    for (int c = 0; c < C; ++c) pf[c] /= z;
    out.mv += wg * (std::log(z) + mx - fused[g]);

    for (int c = 0; c < C; ++c) {
      const double df = wg * (pf[c] - (c == g ? 1.0 : 0.0));
      for (int v = 0; v < M; ++v) {
        const double t = st.data[(v * C + c) * plane + p];
        if (st.present[v])
          grad_data[(v * C + c) * plane + p] +=
              cfg.beta * fw.weight(v, c) * df;
        if (fw.layout == ViewStack::Layout::PER_VIEW_CHANNELS)
          out.grad_w[static_cast<std::size_t>(v) * C + c] +=
              cfg.beta * t * df;
        else
          out.grad_w[v] += cfg.beta * t * df;
      }
      if (fw.layout == ViewStack::Layout::PER_VIEW_CHANNELS)
        out.grad_bias[c] += cfg.beta * df;
      else
        out.grad_bias[0] += cfg.beta * df;
    }
  }
  return out;
}

}  // namespace

LossResult total_loss(const ViewStack& stack, const FusionWeights& fw,
                      const GroundTruthWindow& gt, const LossConfig& cfg,
                      int workers) {
  if (fw.layout != stack.layout || fw.slots != stack.slots ||
      fw.classes != stack.classes)
    throw InvalidInput("fusion weights do not match the stack");
  check_gt(stack, gt);
  const int n_present = count_present(stack);
  if (n_present == 0) throw InvalidInput("loss over an all-absent stack");

  LossResult res;
  res.grad_data.assign(stack.data.size(), 0.0);
  std::vector<RowSums> rows(stack.height);

  const int nw = resolve_workers(workers);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw)
#endif
  for (int y = 0; y < stack.height; ++y)
    rows[y] = loss_row(stack, fw, gt, cfg, y, n_present, res.grad_data);
  (void)nw;

  // fixed fold order keeps totals identical for any worker count
  res.grad_w.assign(fw.w.size(), 0.0);
  res.grad_bias.assign(fw.bias.size(), 0.0);
  double sv = 0.0, mv = 0.0;
  for (const RowSums& r : rows) {
    sv += r.sv;
    mv += r.mv;
    for (std::size_t i = 0; i < res.grad_w.size(); ++i)
      res.grad_w[i] += r.grad_w[i];
    for (std::size_t i = 0; i < res.grad_bias.size(); ++i)
      res.grad_bias[i] += r.grad_bias[i];
  }
  res.sv = sv / n_present;
  res.mv = mv;
  res.total = cfg.alpha * res.sv + cfg.beta * res.mv;
  return res;
}

namespace serial {

LossResult total_loss(const ViewStack& stack, const FusionWeights& fw,
                      const GroundTruthWindow& gt, const LossConfig& cfg) {
  if (fw.layout != stack.layout || fw.slots != stack.slots ||
      fw.classes != stack.classes)
    throw InvalidInput("fusion weights do not match the stack");
  check_gt(stack, gt);
  const int n_present = count_present(stack);
  if (n_present == 0) throw InvalidInput("loss over an all-absent stack");

  LossResult res;
  res.grad_data.assign(stack.data.size(), 0.0);
  res.grad_w.assign(fw.w.size(), 0.0);
  res.grad_bias.assign(fw.bias.size(), 0.0);
  double sv = 0.0, mv = 0.0;
  for (int y = 0; y < stack.height; ++y) {
    const RowSums r =
        loss_row(stack, fw, gt, cfg, y, n_present, res.grad_data);
    sv += r.sv;
    mv += r.mv;
    for (std::size_t i = 0; i < res.grad_w.size(); ++i)
      res.grad_w[i] += r.grad_w[i];
    for (std::size_t i = 0; i < res.grad_bias.size(); ++i)
      res.grad_bias[i] += r.grad_bias[i];
  }
  res.sv = sv / n_present;
  res.mv = mv;
  res.total = cfg.alpha * res.sv + cfg.beta * res.mv;
  return res;
}

}  // namespace serial

std::vector<std::vector<std::string>> split_subsets(
    const std::vector<std::string>& ids, int q, std::uint64_t seed) {
  if (q <= 0) throw InvalidInput("subset size must be positive");
  const int n = static_cast<int>(ids.size());
  if (n < q) return {};
  if (n == q) return {ids};

  std::vector<std::string> order = ids;
  Rng rng(seed);
  shuffle(order, rng);

  const int k = (n + q - 1) / q;
  std::vector<std::vector<std::string>> subsets;
  for (int s = 0; s < k; ++s) {
    std::vector<std::string> sub;
    for (int i = s * q; i < std::min((s + 1) * q, n); ++i)
      sub.push_back(order[i]);
    // the short tail tops up from the front of the shuffle
    for (int i = 0; static_cast<int>(sub.size()) < q; ++i)
      sub.push_back(order[i]);
    subsets.push_back(std::move(sub));
  }
  return subsets;
}

VoteResult majority_vote(const std::vector<Grid>& class_maps,
                         const std::vector<Grid>& masks) {
  if (class_maps.empty() || class_maps.size() != masks.size())
    throw InvalidInput("majority_vote: map/mask count mismatch");
  const GridHeader& h = class_maps[0].header();
  for (const auto& g : class_maps)
    if (!g.header().same_layout(h))
      throw InvalidInput("majority_vote: grid layouts differ");
  for (const auto& m : masks)
    if (!m.header().same_layout(h))
      throw InvalidInput("majority_vote: mask layouts differ");

  VoteResult out{Grid(h, 0.0), Grid(h, 0.0), 0};
  for (int r = 0; r < h.nrows; ++r)
    for (int c = 0; c < h.ncols; ++c) {
      int votes[kNumClasses] = {0, 0, 0};
      for (std::size_t v = 0; v < class_maps.size(); ++v) {
        if (masks[v].at(r, c) == 0.0) continue;
        if (!class_maps[v].valid(r, c)) continue;
        const int cls = static_cast<int>(class_maps[v].at(r, c));
        if (cls >= 0 && cls < kNumClasses) ++votes[cls];
      }
      int total = votes[0] + votes[1] + votes[2];
      if (total == 0) {
        out.classes.at(r, c) =
            static_cast<double>(static_cast<int>(LabelClass::BACKGROUND));
        out.flags.at(r, c) = 1.0;
        ++out.flagged;
        continue;
      }
      int best = 0;  // lowest index wins ties
      for (int k = 1; k < kNumClasses; ++k)
        if (votes[k] > votes[best]) best = k;
      out.classes.at(r, c) = static_cast<double>(best);
    }
  return out;
}

IouResult compute_iou(const Grid& pred, const Grid& truth) {
  if (!pred.header().same_layout(truth.header()))
    throw InvalidInput("compute_iou: grid layouts differ");
  std::array<long long, kNumClasses> inter{}, uni{};
  for (int r = 0; r < pred.nrows(); ++r)
    for (int c = 0; c < pred.ncols(); ++c) {
      if (!pred.valid(r, c) || !truth.valid(r, c)) continue;
      const int a = static_cast<int>(pred.at(r, c));
      const int b = static_cast<int>(truth.at(r, c));
      for (int k = 0; k < kNumClasses; ++k) {
        const bool in_a = a == k, in_b = b == k;
        inter[k] += in_a && in_b;
        uni[k] += in_a || in_b;
      }
    }
  IouResult out;
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    out.defined[k] = uni[k] > 0;
    out.iou[k] = out.defined[k]
                     ? static_cast<double>(inter[k]) / uni[k]
                     : 0.0;
    if (out.defined[k]) {
      sum += out.iou[k];
      ++n;
    }
  }
  out.mean_defined = n > 0 ? sum / n : 0.0;
  return out;
}

CheckpointChoice select_checkpoints(const std::vector<EpochRecord>& history,
                                    double slack) {
  if (history.empty()) throw InvalidInput("empty training history");

  CheckpointChoice out;
  const EpochRecord* best_val = &history[0];
  double best_iou = -1.0;
  for (const auto& e : history) best_iou = std::max(best_iou, e.val_iou);

  for (const auto& e : history) {
    if (e.val_loss < best_val->val_loss ||
        (e.val_loss == best_val->val_loss && e.val_iou > best_val->val_iou))
      best_val = &e;
  }
  out.e_min_val = best_val->epoch;

  const EpochRecord* best_train = nullptr;
  for (const auto& e : history) {
    if (e.val_iou < best_iou - slack) continue;
    if (!best_train || e.train_loss < best_train->train_loss) best_train = &e;
  }
  if (best_train) {
    out.e_min_train = best_train->epoch;
  } else {
    out.e_min_train = out.e_min_val;
    out.fell_back = true;
  }
  return out;
}

}  // namespace orthoforge
