#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convo_anon/embeddings.hpp"

namespace convo_anon {

enum class LossKind {
  differential,  // DS: keep pairwise relations of the original speakers
  aggregated,    // AS: make pseudo-speakers mutually dissimilar
  baseline,      // speaker-level farthest-K averaging
  resynthesis,   // identity mapping, the no-anonymization reference
};

std::string_view loss_kind_name(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct SearchConfig {
  std::size_t l_far = 200;
  std::size_t l_prune = 10000;
  LossKind loss = LossKind::aggregated;
  bool include_privacy_term_in_score = false;
};

struct Assignment {
  std::size_t speaker = 0;                // position in the original list
  std::optional<std::size_t> pool_index;  // empty for averaged/identity vectors
  SpeakerVector vector;                   // x_a
  double privacy = 0.0;                   // cosine(x_o, x_a)
};

struct AnonymizationPlan {
  std::vector<Assignment> assignments;  // one per original speaker, in order
  double privacy_term = 0.0;            // sum of per-speaker privacy
  double utility_term = 0.0;            // DS or AS sum over same-gender pairs
  LossKind loss_kind = LossKind::aggregated;

  std::vector<SpeakerVector> anonymized_vectors() const;
};

/// Row i: the `l_far` column indices with the smallest entries of row i,
/// ascending by similarity, ties to the lower index. `l_far` larger than the
/// column count is clamped.
std::vector<std::vector<std::size_t>> farthest_candidates(const SimilarityMatrix& similarity,
                                                          std::size_t l_far);

/// Gender-dependent greedy pruned search over the farthest candidates.
AnonymizationPlan plan_conversation(std::span<const SpeakerVector> originals, const Pool& pool,
                                    const SearchConfig& cfg);

/// Exhaustive minimiser over all duplicate-free candidate tuples. Among equal
/// optima the lexicographically smallest tuple of candidate ranks wins.
AnonymizationPlan brute_force_plan(std::span<const SpeakerVector> originals, const Pool& pool,
                                   const SearchConfig& cfg,
                                   std::uint64_t max_tuples = 1'000'000);

/// Mean of `k_avg` vectors drawn (seeded, without replacement) from the
/// `k_far` same-gender pool vectors least similar to `original`.
SpeakerVector baseline_select(const SpeakerVector& original, const Pool& pool,
                              std::size_t k_far = 200, std::size_t k_avg = 10,
                              std::uint64_t seed = 0);

AnonymizationPlan baseline_plan(std::span<const SpeakerVector> originals, const Pool& pool,
                                std::size_t k_far, std::size_t k_avg, std::uint64_t seed);

/// Maps every speaker to itself.
AnonymizationPlan resynthesis_plan(std::span<const SpeakerVector> originals);

/// Sum of cosine over all unordered pairs; N >= 2.
double distinctiveness_sums(std::span<const SpeakerVector> vectors);

/// Sum over i < j of |cos(a_i, a_j) - cos(o_i, o_j)|.
double differential_sum(std::span<const SpeakerVector> originals,
                         std::span<const SpeakerVector> anonymized);

/// Plan file: `<speaker_id> <pool_id|-> <privacy_i>` per line.
void write_plan(std::ostream& out, std::span<const SpeakerVector> originals,
                const AnonymizationPlan& plan, const Pool& pool);

struct PlanEntry {
  std::string speaker_id;
  std::string pool_id;  // "-" when the vector is not a pool member
  double privacy = 0.0;
};
std::vector<PlanEntry> read_plan(std::istream& in);

}  // namespace convo_anon
