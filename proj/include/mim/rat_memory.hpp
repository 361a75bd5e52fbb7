#pragma once

// Retrieval-augmented tracking memory: crop-and-encode, a deduplicated corpus
// of target embeddings, cosine top-K retrieval, and fusion into the query that
// drives tracking attention.

#include <cstddef>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mim/bbox.hpp"
#include "mim/frame.hpp"
#include "mim/nn.hpp"
#include "mim/ssm.hpp"

namespace mim::rat {

using ad::Var;

struct Crop {
  Frame image;                  // out_size × out_size, zero padded
  BBox region;                  // clamped source region in frame pixels
  std::size_t content_w = 0;    // resampled extent before padding
  std::size_t content_h = 0;
};

// Scales bbox about its center by factor, clamps to the frame, resizes the
// region so its longer side is out_size (bilinear), and pads the remainder
// (bottom/right) with zeros.
Crop crop_and_resize(const Frame& frame, const BBox& bbox, double factor,
                     std::size_t out_size = 64);

// Square window of the given side centered on (cx, cy), resampled to
// out_h × out_w. Pixels outside the frame read as zero.
Frame crop_square(const Frame& frame, double cx, double cy, double side, std::size_t out_h,
                  std::size_t out_w);

// Square window of side factor·max(w, h) centered on bbox, resampled to
// out_h × out_w. Pixels outside the frame read as zero.
Frame crop_context(const Frame& frame, const BBox& bbox, double factor, std::size_t out_h,
                   std::size_t out_w);

struct LightEncoderConfig {
  std::size_t crop = 64;
  std::size_t patch = 16;
  std::size_t width = 16;
  std::size_t state = 8;
  std::size_t embed = 128;
};

// Patch tokens → one bidirectional selective scan (pre-norm residual) →
// mean pooling → linear map to the embedding width.
struct LightEncoder {
  LightEncoderConfig config;
  nn::Linear patch_proj;
  Var position;  // L × width
  nn::LayerNorm norm;
  ssm::SelectiveParams scan;
  nn::Linear out_proj;

  static LightEncoder init(const LightEncoderConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList& out) const;
  Var encode(const Frame& crop) const;  // 1 × embed
};

struct QueryFeature {
  Tensor embedding;  // 1 × embed
  BBox source;
};

// Crop at bbox (enlarged by factor) and encode. Throws DomainError when the
// embedding has zero norm.
QueryFeature make_query(const LightEncoder& enc, const Frame& frame, const BBox& bbox,
                        double factor);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Retrieved {
  std::size_t index;  // position in insertion order among live entries
  double similarity;
  friend bool operator==(const Retrieved&, const Retrieved&) = default;
};

class MemoryCorpus {
 public:
  explicit MemoryCorpus(double tau = 0.8, std::size_t dim = 128, std::size_t capacity = 256);

  // Admits e iff its maximum cosine similarity to every live entry is < tau.
  // At capacity the oldest entry is dropped first. Throws DomainError for a
  // zero-norm, non-finite or wrongly sized embedding.
  bool maybe_insert(std::span<const double> e);
  // Largest cosine similarity to a live entry; -inf for an empty corpus.
  double max_similarity(std::span<const double> e) const;

  // Up to k entries by descending similarity; equal similarities keep
  // insertion order. Empty corpus gives an empty result.
  std::vector<Retrieved> retrieve_top_k(std::span<const double> query, std::size_t k) const;
  // Every entry with its similarity, in insertion order.
  std::vector<Retrieved> score_all(std::span<const double> query) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double tau() const { return tau_; }
  std::size_t dim() const { return dim_; }
  std::size_t capacity() const { return capacity_; }
  std::span<const double> entry(std::size_t i) const { return entries_[i]; }
  Tensor entry_tensor(std::size_t i) const;

  // "MIMMEM v1\n", f64 tau, u64 dim, u64 count, then count·dim f64 values in
  // insertion order; little-endian throughout.
  void save(const std::filesystem::path& path) const;
  static MemoryCorpus load(const std::filesystem::path& path, std::size_t capacity = 256);

  friend bool operator==(const MemoryCorpus& a, const MemoryCorpus& b) {
    return a.tau_ == b.tau_ && a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }

 private:
  void check_embedding(std::span<const double> e) const;
  double similarity_to(std::size_t i, std::span<const double> q, double q_norm_sq) const;

  double tau_;
  std::size_t dim_;
  std::size_t capacity_;
  std::deque<std::vector<double>> entries_;
  std::deque<double> norm_sq_;
};

enum class Fusion { kRetrievalMean, kSimpleMean, kCosineDecay, kRetrievalDecay };

// Entries that feed fusion: the top-K for retrieval modes, the whole corpus otherwise.
std::vector<Retrieved> select_for_fusion(const MemoryCorpus& corpus, std::span<const double> query,
                                         std::size_t k, Fusion mode);

// Mean (or similarity-weighted mean for decay modes) of the features. Decay
// weights are max(sim, 0) normalized to sum 1, uniform if every weight is 0.
Var fuse(const std::vector<Var>& features, const std::vector<double>& similarities, Fusion mode);

// e_a = MLP(fuse(features)); falls back to MLP(cold_start) when features is empty.
Var fuse_and_project(const std::vector<Var>& features, const std::vector<double>& similarities,
                     Fusion mode, const nn::Mlp& mlp, const Var& cold_start);

}  // namespace mim::rat
