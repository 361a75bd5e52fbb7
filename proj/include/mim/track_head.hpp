#pragma once

// Per-token objectness + box regression head, its training loss, and the
// per-video track state.

#include <filesystem>
#include <string>
#include <vector>

#include "mim/bbox.hpp"
#include "mim/nn.hpp"
#include "mim/tokenizer.hpp"

namespace mim::head {

using ad::Var;

// Columns of the raw head output.
enum Column : std::size_t { kLogit = 0, kCx = 1, kCy = 2, kW = 3, kH = 4, kColumns = 5 };

struct HeadParams {
  nn::LayerNorm norm;
  nn::Mlp mlp;  // D → hidden → 5

  static HeadParams init(std::size_t dim, std::size_t hidden, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList& out) const;
  Var operator()(const Var& tokens) const;  // L×D → L×5
};

struct Prediction {
  BBox box;
  double score = 0.0;
  std::size_t token = 0;
};

// Center = middle of the token's cell + kOffsetSpan·(sigmoid − 0.5) cells.
// Sigmoid of the size columns scales the frame extent.
inline constexpr double kOffsetSpan = 3.0;
BBox decode_token(std::span<const double> raw, std::size_t token, const tok::PatchGeometry& g);
// Winning token = largest logit, lowest index on ties.
Prediction decode(const Tensor& raw, const tok::PatchGeometry& g);
// Winning token = largest sigmoid(logit)·window[token], lowest index on ties.
// The score stays the unweighted sigmoid of the winner's logit.
Prediction decode(const Tensor& raw, const tok::PatchGeometry& g, std::span<const double> window);
// Outer product of two symmetric Hann windows over the token grid, zero on
// the border rows and columns, 1 at the middle of odd-sized grids.
std::vector<double> hann_window(const tok::PatchGeometry& g);
Prediction predict(const HeadParams& head, const Var& tokens, const tok::PatchGeometry& g);

// Cell holding the box center (clamped into the grid).
std::size_t positive_token(const BBox& gt, const tok::PatchGeometry& g);

struct LossWeights {
  double l1 = 5.0;
  double iou = 2.0;
  double objectness = 1.0;
};

struct LossTerms {
  Var total;
  double l1 = 0.0;    // unweighted, summed over the four normalized coordinates
  double iou = 0.0;   // IoU itself, not 1 - IoU
  // l1 and iou are means over the supervised tokens.
  double bce = 0.0;   // positive and negative tokens weighted equally
};

// Tokens whose box regression is supervised: the positive cell and its
// 8-neighborhood clipped to the grid, in index order.
std::vector<std::size_t> regression_tokens(std::size_t positive, const tok::PatchGeometry& g);

// Regression terms are averaged over regression_tokens. Throws DomainError for
// a degenerate gt.
LossTerms loss(const Var& raw, const BBox& gt, const tok::PatchGeometry& g,
               const LossWeights& w = {});

struct TrackState {
  BBox current;
  std::vector<BBox> trajectory;
  std::vector<double> scores;

  std::size_t frames() const { return trajectory.size(); }
};

// Records every box, whatever its score.
TrackState step(TrackState state, const BBox& box, double score);

// One "x,y,w,h" line per box.
void write_trajectory(const std::filesystem::path& path, const std::vector<BBox>& boxes);
std::vector<BBox> read_trajectory(const std::filesystem::path& path);

}  // namespace mim::head
