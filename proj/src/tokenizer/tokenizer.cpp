#include "mim/tokenizer.hpp"

#include <algorithm>
#include <string>

#include "mim/error.hpp"
#include "mim/ops.hpp"

namespace mim::tok {

void PatchGeometry::validate() const {
  MIM_CHECK(patch > 0 && height > 0 && width > 0 && height % patch == 0 && width % patch == 0,
            DomainError,
            "frame " + std::to_string(height) + "x" + std::to_string(width) +
                " is not divisible into " + std::to_string(patch) + "px patches");
}

Tensor extract_patches(const Frame& frame, std::size_t patch) {
  const PatchGeometry g{frame.height, frame.width, patch};
  g.validate();
  const std::size_t k2 = patch * patch;
  const std::size_t width = frame.channels * k2;
  Tensor out({g.count(), width});
  for (std::size_t gr = 0; gr < g.grid_rows(); ++gr)
    for (std::size_t gc = 0; gc < g.grid_cols(); ++gc) {
      double* row = out.data() + (gr * g.grid_cols() + gc) * width;
      for (std::size_t c = 0; c < frame.channels; ++c)
        for (std::size_t ky = 0; ky < patch; ++ky)
          for (std::size_t kx = 0; kx < patch; ++kx)
            row[c * k2 + ky * patch + kx] = frame.at(c, gr * patch + ky, gc * patch + kx);
    }
  return out;
}

Frame unpatchify(const Tensor& patches, std::size_t channels, std::size_t height,
                 std::size_t width, std::size_t patch) {
  const PatchGeometry g{height, width, patch};
  g.validate();
  const std::size_t k2 = patch * patch;
  MIM_CHECK(patches.rows() == g.count() && patches.cols() == channels * k2, ShapeError,
            "unpatchify: patch matrix has the wrong shape");
  Frame f(channels, height, width);
  for (std::size_t gr = 0; gr < g.grid_rows(); ++gr)
    for (std::size_t gc = 0; gc < g.grid_cols(); ++gc) {
      const double* row = patches.data() + (gr * g.grid_cols() + gc) * channels * k2;
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < patch; ++ky)
          for (std::size_t kx = 0; kx < patch; ++kx)
            f.at(c, gr * patch + ky, gc * patch + kx) = row[c * k2 + ky * patch + kx];
    }
  return f;
}

Var patchify(const Frame& frame, std::size_t patch, const nn::Linear& proj) {
  return proj(Var::constant(extract_patches(frame, patch)));
}

PositionEmbeddings PositionEmbeddings::init(std::size_t tokens, std::size_t frames,
                                            std::size_t dim, Rng& rng, double stddev) {
  return {nn::normal_param(tokens, dim, stddev, rng), nn::normal_param(frames, dim, stddev, rng)};
}

void PositionEmbeddings::collect(const std::string& prefix, nn::ParamList& out) const {
  out.emplace_back(prefix + ".spatial", spatial);
  out.emplace_back(prefix + ".temporal", temporal);
}

Var TokenGrid::frame(std::size_t t) const {
  MIM_CHECK(t < frames, ShapeError, "TokenGrid::frame index out of range");
  return ad::slice_rows(tokens, t * tokens_per_frame(), tokens_per_frame());
}

TokenGrid build_grid(const Frame& templ, const std::vector<Frame>& frames, std::size_t patch,
                     const nn::Linear& proj, const PositionEmbeddings& emb) {
  const PatchGeometry g{templ.height, templ.width, patch};
  g.validate();
  const std::size_t total = frames.size() + 1;
  const std::size_t L = g.count();
  MIM_CHECK(emb.temporal.rows() == total, ShapeError,
            "build_grid: temporal embedding has " + std::to_string(emb.temporal.rows()) +
                " rows, window needs " + std::to_string(total));
  MIM_CHECK(emb.spatial.rows() == L, ShapeError,
            "build_grid: spatial embedding has " + std::to_string(emb.spatial.rows()) +
                " rows, frames have " + std::to_string(L) + " patches");

  const std::size_t width = templ.channels * patch * patch;
  Tensor raw({total * L, width});
  for (std::size_t t = 0; t < total; ++t) {
    const Frame& f = t == 0 ? templ : frames[t - 1];
    MIM_CHECK(f.same_size(templ), ShapeError, "build_grid: frames differ in size");
    const Tensor p = extract_patches(f, patch);
    std::copy(p.values().begin(), p.values().end(), raw.data() + t * L * width);
  }
  Var tokens = proj(Var::constant(std::move(raw)));

  std::vector<std::size_t> spatial_index(total * L), temporal_index(total * L);
  for (std::size_t t = 0; t < total; ++t)
    for (std::size_t s = 0; s < L; ++s) {
      spatial_index[t * L + s] = s;
      temporal_index[t * L + s] = t;
    }
  tokens = ad::add(tokens, ad::gather_rows(emb.spatial, spatial_index));
  tokens = ad::add(tokens, ad::gather_rows(emb.temporal, temporal_index));
  return {tokens, total, g};
}

ScanOrder order_for_layer(std::size_t layer) {
  static constexpr ScanOrder kCycle[] = {ScanOrder::kRowMajor, ScanOrder::kColumnMajor,
                                         ScanOrder::kRowMajorReversed,
                                         ScanOrder::kColumnMajorReversed};
  return kCycle[layer % 4];
}

Permutation scan_permutation(ScanOrder order, std::size_t grid_rows, std::size_t grid_cols) {
  const std::size_t n = grid_rows * grid_cols;
  Permutation omega;
  omega.reserve(n);
  const bool column = order == ScanOrder::kColumnMajor || order == ScanOrder::kColumnMajorReversed;
  if (column) {
    for (std::size_t c = 0; c < grid_cols; ++c)
      for (std::size_t r = 0; r < grid_rows; ++r) omega.push_back(r * grid_cols + c);
  } else {
    for (std::size_t i = 0; i < n; ++i) omega.push_back(i);
  }
  if (order == ScanOrder::kRowMajorReversed || order == ScanOrder::kColumnMajorReversed)
    std::reverse(omega.begin(), omega.end());
  validate_permutation(omega, n);
  return omega;
}

Permutation schedule_for_layer(std::size_t layer, const PatchGeometry& g) {
  return scan_permutation(order_for_layer(layer), g.grid_rows(), g.grid_cols());
}

void validate_permutation(const Permutation& omega, std::size_t n) {
  MIM_CHECK(omega.size() == n, DomainError, "schedule length does not match token count");
  std::vector<bool> seen(n, false);
  for (auto i : omega) {
    MIM_CHECK(i < n && !seen[i], DomainError, "schedule is not a bijection");
    seen[i] = true;
  }
}

Permutation invert(const Permutation& omega) {
  validate_permutation(omega, omega.size());
  Permutation inv(omega.size());
  for (std::size_t j = 0; j < omega.size(); ++j) inv[omega[j]] = j;
  return inv;
}

Var apply_schedule(const Var& tokens, const Permutation& omega) {
  const std::size_t n = omega.size();
  validate_permutation(omega, n);
  MIM_CHECK(n > 0 && tokens.rows() % n == 0, ShapeError,
            "apply_schedule: token rows are not a multiple of the schedule length");
  std::vector<std::size_t> index(tokens.rows());
  for (std::size_t block = 0; block < tokens.rows() / n; ++block)
    for (std::size_t j = 0; j < n; ++j) index[block * n + j] = block * n + omega[j];
  return ad::gather_rows(tokens, index);
}

}  // namespace mim::tok
