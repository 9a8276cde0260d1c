#pragma once

// Data-parallel inner loops. Every kernel has an OpenMP version used by the
// library and a serial reference kept for tests and the benchmark; both
// produce bit-identical results because no floating-point reduction crosses
// a thread boundary.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace convo_anon::kernels {

/// Row-major block of `rows` vectors of dimension `dim`.
struct RowBlock {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const double> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

std::vector<double> row_norms(const RowBlock& block);

/// Cosine of every row pair; norms must be precomputed and nonzero.
std::vector<double> cosine_matrix_serial(const RowBlock& a, std::span<const double> norms_a,
                                         const RowBlock& b, std::span<const double> norms_b);
std::vector<double> cosine_matrix_parallel(const RowBlock& a, std::span<const double> norms_a,
                                           const RowBlock& b, std::span<const double> norms_b);

enum class PairLoss { aggregated, differential };

/// One step of the pruned beam search. The beam holds `paths.size() / depth`
/// partial assignments over "slots" (indices into a candidate table); each is
/// extended with every slot in `next_slots`.
struct BeamStep {
  std::span<const std::uint32_t> paths;  // beam_size x depth, row-major
  std::span<const double> scores;        // beam_size
  std::size_t depth = 0;                 // speakers already assigned
  std::span<const std::uint32_t> next_slots;
  std::span<const std::uint32_t> slot_identity;  // pool index of each slot
  std::span<const double> slot_similarity;       // slot x slot cosine table
  std::size_t slot_count = 0;
  std::span<const double> original_row;  // S_oo[depth, 0..depth)
  std::span<const double> privacy;       // per next slot, added when non-empty
  PairLoss loss = PairLoss::aggregated;
};

struct Extension {
  double score;
  std::uint32_t parent;
  std::uint32_t slot_rank;  // position within next_slots
};

/// Extensions in generation order (parent-major). Extensions that would reuse
/// a pool index already on the path are omitted.
std::vector<Extension> extend_beam_serial(const BeamStep& step);
std::vector<Extension> extend_beam_parallel(const BeamStep& step);

}  // namespace convo_anon::kernels
