#pragma once

#include <cstddef>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/frame.hpp"
#include "mim/nn.hpp"
#include "mim/rng.hpp"

namespace mim::tok {

using ad::Var;
using Permutation = std::vector<std::size_t>;

struct PatchGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t patch = 16;

  std::size_t grid_rows() const { return height / patch; }
  std::size_t grid_cols() const { return width / patch; }
  std::size_t count() const { return grid_rows() * grid_cols(); }
  // Throws DomainError unless both sides are positive multiples of the patch size.
  void validate() const;
};

// L × (C·K²) raw patch matrix; patches in row-major grid order, each flattened
// channel-major then row then column.
Tensor extract_patches(const Frame& frame, std::size_t patch);
Frame unpatchify(const Tensor& patches, std::size_t channels, std::size_t height,
                 std::size_t width, std::size_t patch);

// Non-overlapping K×K patches projected to the model width: L × D.
Var patchify(const Frame& frame, std::size_t patch, const nn::Linear& proj);

struct PositionEmbeddings {
  Var spatial;   // L × D
  Var temporal;  // (T+1) × D

  static PositionEmbeddings init(std::size_t tokens, std::size_t frames, std::size_t dim,
                                 Rng& rng, double stddev = 0.02);
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Token tensor for one template plus T search frames, time-major:
// row t·L + s holds spatial slot s of frame t (t = 0 is the template).
struct TokenGrid {
  Var tokens;
  std::size_t frames = 0;  // T + 1
  PatchGeometry geometry;

  std::size_t tokens_per_frame() const { return geometry.count(); }
  std::size_t search_frames() const { return frames - 1; }
  Var frame(std::size_t t) const;
  TokenGrid with_tokens(Var t) const { return {std::move(t), frames, geometry}; }
};

TokenGrid build_grid(const Frame& templ, const std::vector<Frame>& frames, std::size_t patch,
                     const nn::Linear& proj, const PositionEmbeddings& emb);

enum class ScanOrder { kRowMajor, kColumnMajor, kRowMajorReversed, kColumnMajorReversed };

// Layer i scans in order i mod 4 of {row-major, column-major, reversed
// row-major, reversed column-major}.
ScanOrder order_for_layer(std::size_t layer);
Permutation scan_permutation(ScanOrder order, std::size_t grid_rows, std::size_t grid_cols);
Permutation schedule_for_layer(std::size_t layer, const PatchGeometry& g);

void validate_permutation(const Permutation& omega, std::size_t n);
Permutation invert(const Permutation& omega);

// out.row(j) = tokens.row(omega[j]), applied independently to each block of
// omega.size() rows.
Var apply_schedule(const Var& tokens, const Permutation& omega);

}  // namespace mim::tok
