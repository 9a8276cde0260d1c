#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "convo_anon/embeddings.hpp"
#include "convo_anon/rttm.hpp"
#include "convo_anon/stream.hpp"

namespace convo_anon {

struct ClusteringResult {
  std::vector<int> labels;  // one per active window, in [0, k)
  std::size_t k = 0;
  std::vector<double> eigenvalues;  // Laplacian spectrum, ascending
};

/// Cosine affinity between active windows, pruned to the top `keep_fraction`
/// of each row, max-symmetrised, unit diagonal.
SimilarityMatrix affinity(const WindowedEmbeddingStream& stream, double keep_fraction = 0.5);

/// Normalised-Laplacian spectral clustering. The speaker count is `k_fixed`
/// when given, otherwise the largest eigengap over k in [1, k_max].
ClusteringResult spectral_cluster(const SimilarityMatrix& affinity, std::size_t k_max,
                                  std::optional<std::size_t> k_fixed, std::uint64_t seed);

/// Frame-level relabelling: each 10 ms frame takes the label of the covering
/// active window with the nearest centre; runs shorter than two frames are
/// dropped.
RttmDocument labels_to_rttm(const WindowedEmbeddingStream& stream, const ClusteringResult& result);

struct DiarizeOptions {
  std::size_t k_max = 10;
  std::optional<std::size_t> k_fixed;
  std::uint64_t seed = 0;
  double keep_fraction = 0.5;
};

RttmDocument diarize(const WindowedEmbeddingStream& stream, const DiarizeOptions& options);

}  // namespace convo_anon
