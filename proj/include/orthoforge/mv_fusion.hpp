#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "orthoforge/grid.hpp"
#include "orthoforge/vectors.hpp"

namespace orthoforge {

// Raw class scores one view produced over a window, with its occlusion mask.
struct PredictionMap {
  std::string view_id;
  int classes = kNumClasses;
  int height = 0, width = 0;
  std::vector<double> scores;          // [class][y][x]
  std::vector<std::uint8_t> visible;   // [y][x], 1 = this view saw the cell

  double score(int c, int y, int x) const {
    return scores[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& score(int c, int y, int x) {
    return scores[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Fixed-slot tensor the fusion layer consumes. Slot order is the subset
// order; trailing slots beyond the supplied views hold zeros and are marked
// absent. Two flattenings of the same buffer are supported: per-view channel
// blocks (slots * classes channels), and per-class view planes (classes
// batches of slot planes).
struct ViewStack {
  enum class Layout { PER_VIEW_CHANNELS, PER_CLASS_VIEWS };

  Layout layout = Layout::PER_CLASS_VIEWS;
  int slots = 0;
  int classes = 0;
  int height = 0, width = 0;
  std::vector<double> data;            // canonical [slot][class][y][x]
  std::vector<std::uint8_t> present;   // per slot
  std::vector<std::uint8_t> visible;   // [slot][y][x], absent slots all 0
  std::vector<std::string> view_ids;   // empty string for absent slots

  std::size_t canon_index(int v, int c, int y, int x) const {
    return ((static_cast<std::size_t>(v) * classes + c) * height + y) * width +
           x;
  }
  double at(int v, int c, int y, int x) const {
    return data[canon_index(v, c, y, x)];
  }
  bool slot_visible(int v, int y, int x) const {
    return visible[(static_cast<std::size_t>(v) * height + y) * width + x] !=
           0;
  }
  // Position of element (v, c, y, x) in the flattened layout tensor.
  std::size_t flat_index(int v, int c, int y, int x) const;
};

// Throws InvalidInput when views disagree on shape or exceed the slot count.
ViewStack assemble_stack(const std::vector<PredictionMap>& views, int slots,
                         ViewStack::Layout layout);

// Read one slot back out of the stack.
PredictionMap extract_view(const ViewStack& stack, int slot);

// Learnable mixing weights. Per-view-channel layout carries one weight per
// (slot, class) and a bias per class; per-class-views carries one weight per
// slot and a single shared bias.
struct FusionWeights {
  ViewStack::Layout layout = ViewStack::Layout::PER_CLASS_VIEWS;
  int slots = 0;
  int classes = 0;
  std::vector<double> w;
  std::vector<double> bias;

  static FusionWeights uniform(ViewStack::Layout layout, int slots,
                               int classes);
  double weight(int v, int c) const {
    return layout == ViewStack::Layout::PER_VIEW_CHANNELS
               ? w[static_cast<std::size_t>(v) * classes + c]
               : w[v];
  }
};

struct FusedScores {
  int classes = 0, height = 0, width = 0;
  std::vector<double> scores;  // [class][y][x]
  std::vector<double> prob;    // softmax over classes, same shape

  double score(int c, int y, int x) const {
    return scores[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double p(int c, int y, int x) const {
    return prob[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Weighted sum across slots per class plus bias, then softmax per point.
FusedScores fuse(const ViewStack& stack, const FusionWeights& fw);

struct GroundTruthWindow {
  int height = 0, width = 0;
  std::vector<std::uint8_t> labels;  // class index per cell

  int label(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

struct LossConfig {
  double alpha = 1.0;  // single-view term weight
  double beta = 1.0;   // fused term weight
  std::array<double, kNumClasses> class_weights{0.2, 0.4, 0.4};
};

struct LossResult {
  double total = 0.0;
  double sv = 0.0;
  double mv = 0.0;
  // d(total)/d(stack data), canonical stack order; absent slots and
  // occlusion-masked single-view contributions are exactly zero there.
  std::vector<double> grad_data;
  std::vector<double> grad_w;
  std::vector<double> grad_bias;
};

// alpha * mean-over-present-views masked cross entropy on per-view softmax
// + beta * cross entropy on the fused softmax over every labeled point.
LossResult total_loss(const ViewStack& stack, const FusionWeights& fw,
                      const GroundTruthWindow& gt, const LossConfig& cfg,
                      int workers = 0);

namespace serial {
LossResult total_loss(const ViewStack& stack, const FusionWeights& fw,
                      const GroundTruthWindow& gt, const LossConfig& cfg);
}

// Overlapping cover of the id set by subsets of exactly q: a shuffle is
// chunked, and the last chunk tops up from the front of the shuffle. Fewer
// ids than q yields no subsets (the window is skipped).
std::vector<std::vector<std::string>> split_subsets(
    const std::vector<std::string>& ids, int q, std::uint64_t seed);

struct VoteResult {
  Grid classes;    // class index per cell
  Grid flags;      // 1 where no view saw the cell (class falls back)
  int flagged = 0;
};

// Per-cell plurality over the views whose mask admits the cell; ties go to
// the lowest class index, cells nobody saw fall back to background.
VoteResult majority_vote(const std::vector<Grid>& class_maps,
                         const std::vector<Grid>& masks);

struct IouResult {
  std::array<double, kNumClasses> iou{};
  std::array<bool, kNumClasses> defined{};  // union nonempty
  double mean_defined = 0.0;
};

IouResult compute_iou(const Grid& pred, const Grid& truth);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_iou = 0.0;
};

struct CheckpointChoice {
  int e_min_val = 0;
  int e_min_train = 0;
  bool fell_back = false;  // no epoch cleared the iou slack for e_min_train
};

// e_min_val: lowest validation loss, ties broken by higher validation iou,
// then earlier epoch. e_min_train: lowest training loss among epochs whose
// validation iou is within `slack` of the best; falls back to e_min_val.
CheckpointChoice select_checkpoints(const std::vector<EpochRecord>& history,
                                    double slack = 0.05);

}  // namespace orthoforge
