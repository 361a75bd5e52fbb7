#include <algorithm>

#include "mim/error.hpp"
#include "mim/ops.hpp"
#include "mim/rat_memory.hpp"

namespace mim::rat {

std::vector<Retrieved> select_for_fusion(const MemoryCorpus& corpus, std::span<const double> query,
                                         std::size_t k, Fusion mode) {
  if (corpus.empty()) return {};
  switch (mode) {
    case Fusion::kRetrievalMean:
    case Fusion::kRetrievalDecay:
      return corpus.retrieve_top_k(query, k);
    case Fusion::kSimpleMean:
    case Fusion::kCosineDecay:
      return corpus.score_all(query);
  }
  throw DomainError("unknown fusion mode");
}

Var fuse(const std::vector<Var>& features, const std::vector<double>& similarities, Fusion mode) {
  MIM_CHECK(!features.empty(), DomainError, "fuse: no features");
  MIM_CHECK(similarities.size() == features.size(), ShapeError,
            "fuse: one similarity per feature required");
  std::vector<double> w(features.size(), 1.0 / static_cast<double>(features.size()));
  if (mode == Fusion::kCosineDecay || mode == Fusion::kRetrievalDecay) {
    double total = 0.0;
    for (double s : similarities) total += std::max(s, 0.0);
    if (total > 0.0)
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(similarities[i], 0.0) / total;
  }
  Var acc = ad::scale(features[0], w[0]);
  for (std::size_t i = 1; i < features.size(); ++i)
    acc = ad::add(acc, ad::scale(features[i], w[i]));
  return acc;
}

Var fuse_and_project(const std::vector<Var>& features, const std::vector<double>& similarities,
                     Fusion mode, const nn::Mlp& mlp, const Var& cold_start) {
  if (features.empty()) return mlp(cold_start);
  return mlp(fuse(features, similarities, mode));
}

}  // namespace mim::rat
