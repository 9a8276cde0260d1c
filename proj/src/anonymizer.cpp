#include "convo_anon/anonymizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "convo_anon/errors.hpp"
#include "convo_anon/kernels.hpp"
#include "convo_anon/random.hpp"

namespace convo_anon {

namespace {

constexpr Gender kGenderOrder[] = {Gender::female, Gender::male, Gender::unknown};

// Speakers of one gender together with the same-gender part of the pool.
struct GenderGroup {
  Gender gender = Gender::unknown;
  std::vector<std::size_t> speakers;  // positions in the original list
  std::vector<std::size_t> members;   // global pool indices
  std::vector<SpeakerVector> originals;
  std::vector<SpeakerVector> pool_vectors;
  SimilarityMatrix original_to_pool;
  SimilarityMatrix original_self;
  std::vector<std::vector<std::size_t>> candidates;  // local member indices
};

void check_inputs(std::span<const SpeakerVector> originals, const Pool& pool) {
  if (originals.empty()) throw EmptyCollectionError("conversation without speakers");
  validate_collection(originals);
  validate_pool(pool);
  if (originals.front().dim() != pool.vectors.front().dim()) {
    throw ContractError("speaker and pool vectors differ in dimension");
  }
}

std::vector<GenderGroup> build_groups(std::span<const SpeakerVector> originals,
                                      const Pool& pool, std::size_t l_far) {
  if (l_far == 0) throw ContractError("l_far must be at least 1");
  check_inputs(originals, pool);
  std::vector<GenderGroup> groups;
  for (Gender g : kGenderOrder) {
    GenderGroup group;
    group.gender = g;
    for (std::size_t i = 0; i < originals.size(); ++i) {
      if (originals[i].gender == g) {
        group.speakers.push_back(i);
        group.originals.push_back(originals[i]);
      }
    }
    if (group.speakers.empty()) continue;
    group.members = pool.subgroup(g);
    if (group.members.empty()) {
      throw NoCandidatesError(std::string("pool has no vectors of gender ") + gender_code(g));
    }
    if (group.speakers.size() > group.members.size()) {
      throw InfeasibleError("gender subgroup has fewer pool vectors than speakers");
    }
    for (std::size_t m : group.members) group.pool_vectors.push_back(pool.vectors[m]);
    if (l_far > group.members.size()) {
      spdlog::warn("l_far {} exceeds the {} pool vectors of gender {}; clamping", l_far,
                   group.members.size(), gender_code(g));
    }
    group.original_to_pool = similarity_matrix(group.originals, group.pool_vectors);
    group.original_self = similarity_matrix(group.originals);
    group.candidates = farthest_candidates(group.original_to_pool, l_far);
    groups.push_back(std::move(group));
  }
  return groups;
}

double privacy_sum(std::span<const Assignment> assignments) {
  double total = 0.0;
  for (const auto& a : assignments) total += a.privacy;
  return total;
}

AnonymizationPlan assemble(std::span<const SpeakerVector> originals, const Pool& pool,
                           const std::vector<GenderGroup>& groups,
                           const std::vector<std::vector<std::size_t>>& chosen_local,
                           const std::vector<double>& group_utility, LossKind loss) {
  AnonymizationPlan plan;
  plan.loss_kind = loss;
  plan.assignments.resize(originals.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    for (std::size_t s = 0; s < group.speakers.size(); ++s) {
      const std::size_t local = chosen_local[g][s];
      Assignment& a = plan.assignments[group.speakers[s]];
      a.speaker = group.speakers[s];
      a.pool_index = group.members[local];
      a.vector = pool.vectors[group.members[local]];
      a.privacy = group.original_to_pool(s, local);
    }
    plan.utility_term += group_utility[g];
  }
  plan.privacy_term = privacy_sum(plan.assignments);
  return plan;
}

// Utility of one group's assignment, accumulated speaker by speaker in the
// same order as the search so that equal assignments give equal bits.
template <typename PoolSimilarity>
double group_utility(const GenderGroup& group, const std::vector<std::size_t>& chosen,
                     LossKind loss, PoolSimilarity pool_sim) {
  double s = 0.0;
  for (std::size_t i = 1; i < chosen.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double aa = pool_sim(chosen[i], chosen[k]);
      s = s + (loss == LossKind::aggregated ? aa : std::abs(aa - group.original_self(i, k)));
    }
  }
  return s;
}

kernels::PairLoss pair_loss(LossKind loss) {
  switch (loss) {
    case LossKind::aggregated: return kernels::PairLoss::aggregated;
    case LossKind::differential: return kernels::PairLoss::differential;
    default: break;
  }
  throw ContractError("search requires the DS or AS loss");
}

struct GroupSearchResult {
  std::vector<std::size_t> chosen;  // local member index per speaker
  double utility = 0.0;
};

GroupSearchResult greedy_search(const GenderGroup& group, const SearchConfig& cfg) {
  const kernels::PairLoss loss = pair_loss(cfg.loss);
  const std::size_t n = group.speakers.size();

  // Slot table: union of every speaker's candidates.
  std::vector<std::size_t> slot_members;
  for (const auto& row : group.candidates) slot_members.insert(slot_members.end(), row.begin(), row.end());
  std::sort(slot_members.begin(), slot_members.end());
  slot_members.erase(std::unique(slot_members.begin(), slot_members.end()), slot_members.end());
  std::vector<SpeakerVector> slot_vectors;
  slot_vectors.reserve(slot_members.size());
  for (std::size_t m : slot_members) slot_vectors.push_back(group.pool_vectors[m]);
  const SimilarityMatrix slot_similarity = similarity_matrix(slot_vectors);
  std::vector<std::uint32_t> slot_identity(slot_members.begin(), slot_members.end());

  auto slot_of = [&](std::size_t member) {
    return static_cast<std::uint32_t>(
        std::lower_bound(slot_members.begin(), slot_members.end(), member) - slot_members.begin());
  };
  std::vector<std::vector<std::uint32_t>> next_slots(n);
  std::vector<std::vector<double>> privacy(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m : group.candidates[i]) {
      next_slots[i].push_back(slot_of(m));
      privacy[i].push_back(group.original_to_pool(i, m));
    }
  }

  std::vector<std::uint32_t> paths(next_slots[0].begin(), next_slots[0].end());
  std::vector<double> scores(paths.size(), 0.0);
  if (cfg.include_privacy_term_in_score) {
    for (std::size_t r = 0; r < scores.size(); ++r) scores[r] = scores[r] + privacy[0][r];
  }

  for (std::size_t depth = 1; depth < n; ++depth) {
    std::vector<double> original_row(depth);
    for (std::size_t k = 0; k < depth; ++k) original_row[k] = group.original_self(depth, k);
    kernels::BeamStep step;
    step.paths = paths;
    step.scores = scores;
    step.depth = depth;
    step.next_slots = next_slots[depth];
    step.slot_identity = slot_identity;
    step.slot_similarity = slot_similarity.entries();
    step.slot_count = slot_members.size();
    step.original_row = original_row;
    if (cfg.include_privacy_term_in_score) step.privacy = privacy[depth];
    step.loss = loss;

    const auto ext = kernels::extend_beam_parallel(step);
    if (ext.empty()) throw InfeasibleError("no duplicate-free assignment among the candidates");

    std::vector<std::uint32_t> order(ext.size());
    std::iota(order.begin(), order.end(), 0U);
    auto before = [&](std::uint32_t a, std::uint32_t b) {
      if (ext[a].score != ext[b].score) return ext[a].score < ext[b].score;
      return a < b;
    };
    const std::size_t keep = std::min(cfg.l_prune, ext.size());
    if (keep < order.size()) {
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                       order.end(), before);
      order.resize(keep);
    }
    std::sort(order.begin(), order.end(), before);

    std::vector<std::uint32_t> next_paths;
    next_paths.reserve(keep * (depth + 1));
    std::vector<double> next_scores;
    next_scores.reserve(keep);
    for (std::uint32_t o : order) {
      const auto& e = ext[o];
      const auto parent = paths.begin() + static_cast<std::ptrdiff_t>(e.parent * depth);
      next_paths.insert(next_paths.end(), parent, parent + static_cast<std::ptrdiff_t>(depth));
      next_paths.push_back(next_slots[depth][e.slot_rank]);
      next_scores.push_back(e.score);
    }
    paths = std::move(next_paths);
    scores = std::move(next_scores);
  }

  GroupSearchResult result;
  for (std::size_t i = 0; i < n; ++i) result.chosen.push_back(slot_members[paths[i]]);
  result.utility = group_utility(group, result.chosen, cfg.loss, [&](std::size_t a, std::size_t b) {
    return slot_similarity(slot_of(a), slot_of(b));
  });
  return result;
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::differential: return "ds";
    case LossKind::aggregated: return "as";
    case LossKind::baseline: return "baseline";
    case LossKind::resynthesis: return "resyn";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ds" || name == "DS") return LossKind::differential;
  if (name == "as" || name == "AS") return LossKind::aggregated;
  if (name == "baseline" || name == "select") return LossKind::baseline;
  if (name == "resyn" || name == "identity") return LossKind::resynthesis;
  throw ConfigError("unknown anonymizer '" + std::string(name) + "'");
}

std::vector<SpeakerVector> AnonymizationPlan::anonymized_vectors() const {
  std::vector<SpeakerVector> out;
  out.reserve(assignments.size());
  for (const auto& a : assignments) out.push_back(a.vector);
  return out;
}

std::vector<std::vector<std::size_t>> farthest_candidates(const SimilarityMatrix& similarity,
                                                          std::size_t l_far) {
  if (similarity.cols() == 0) throw NoCandidatesError("empty pool subgroup");
  const std::size_t take = std::min(l_far, similarity.cols());
  std::vector<std::vector<std::size_t>> out(similarity.rows());
  for (std::size_t i = 0; i < similarity.rows(); ++i) {
    std::vector<std::size_t> idx(similarity.cols());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto row = similarity.row(i);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] < row[b];
                        return a < b;
                      });
    idx.resize(take);
    out[i] = std::move(idx);
  }
  return out;
}

AnonymizationPlan plan_conversation(std::span<const SpeakerVector> originals, const Pool& pool,
                                    const SearchConfig& cfg) {
  if (cfg.l_prune == 0) throw ContractError("l_prune must be at least 1");
  const auto groups = build_groups(originals, pool, cfg.l_far);
  std::vector<std::vector<std::size_t>> chosen;
  std::vector<double> utility;
  for (const auto& group : groups) {
    auto r = greedy_search(group, cfg);
    chosen.push_back(std::move(r.chosen));
    utility.push_back(r.utility);
  }
  return assemble(originals, pool, groups, chosen, utility, cfg.loss);
}

AnonymizationPlan brute_force_plan(std::span<const SpeakerVector> originals, const Pool& pool,
                                   const SearchConfig& cfg, std::uint64_t max_tuples) {
  pair_loss(cfg.loss);
  const auto groups = build_groups(originals, pool, cfg.l_far);
  std::vector<std::vector<std::size_t>> chosen;
  std::vector<double> utility;
  for (const auto& group : groups) {
    double tuples = 1.0;
    for (const auto& row : group.candidates) tuples *= static_cast<double>(row.size());
    if (tuples > static_cast<double>(max_tuples)) {
      throw CombinatorialLimitError("brute force over " + std::to_string(tuples) +
                                    " tuples exceeds the limit");
    }
    const SimilarityMatrix pool_self = similarity_matrix(group.pool_vectors);
    const std::size_t n = group.speakers.size();

    std::vector<std::size_t> current(n);
    std::vector<std::size_t> best;
    double best_score = std::numeric_limits<double>::infinity();
    // Depth-first in lexicographic rank order; strict improvement keeps the
    // first optimum found.
    auto recurse = [&](auto&& self, std::size_t i, double score) -> void {
      if (i == n) {
        if (score < best_score) {
          best_score = score;
          best = current;
        }
        return;
      }
      for (std::size_t m : group.candidates[i]) {
        if (std::find(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(i), m) !=
            current.begin() + static_cast<std::ptrdiff_t>(i)) {
          continue;
        }
        current[i] = m;
        double s = score;
        if (cfg.include_privacy_term_in_score) s = s + group.original_to_pool(i, m);
        for (std::size_t k = 0; k < i; ++k) {
          const double aa = pool_self(m, current[k]);
          s = s + (cfg.loss == LossKind::aggregated ? aa
                                                    : std::abs(aa - group.original_self(i, k)));
        }
        self(self, i + 1, s);
      }
    };
    recurse(recurse, 0, 0.0);
    if (best.empty()) throw InfeasibleError("no duplicate-free assignment among the candidates");
    utility.push_back(group_utility(group, best, cfg.loss,
                                    [&](std::size_t a, std::size_t b) { return pool_self(a, b); }));
    chosen.push_back(std::move(best));
  }
  return assemble(originals, pool, groups, chosen, utility, cfg.loss);
}

SpeakerVector baseline_select(const SpeakerVector& original, const Pool& pool, std::size_t k_far,
                              std::size_t k_avg, std::uint64_t seed) {
  if (k_avg == 0) throw ContractError("k_avg must be at least 1");
  if (k_avg > k_far) throw ContractError("k_avg must not exceed k_far");
  const SpeakerVector one[] = {original};
  check_inputs(one, pool);
  const auto members = pool.subgroup(original.gender);
  if (members.empty()) {
    throw NoCandidatesError(std::string("pool has no vectors of gender ") +
                            gender_code(original.gender));
  }
  if (members.size() < k_avg) throw InfeasibleError("gender subgroup smaller than k_avg");

  std::vector<SpeakerVector> group;
  group.reserve(members.size());
  for (std::size_t m : members) group.push_back(pool.vectors[m]);
  const auto far = farthest_candidates(similarity_matrix(one, group), k_far).front();

  std::vector<std::size_t> picked(far.begin(), far.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < k_avg; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, picked.size() - 1);
    std::swap(picked[i], picked[pick(rng)]);
  }
  picked.resize(k_avg);
  std::sort(picked.begin(), picked.end());

  SpeakerVector out;
  out.id = original.id + "_select";
  out.gender = original.gender;
  out.values = mean_of(group, picked);
  return out;
}

AnonymizationPlan baseline_plan(std::span<const SpeakerVector> originals, const Pool& pool,
                                std::size_t k_far, std::size_t k_avg, std::uint64_t seed) {
  check_inputs(originals, pool);
  AnonymizationPlan plan;
  plan.loss_kind = LossKind::baseline;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    Assignment a;
    a.speaker = i;
    a.vector = baseline_select(originals[i], pool, k_far, k_avg, derive_seed(seed, i));
    a.privacy = cosine(originals[i], a.vector);
    plan.assignments.push_back(std::move(a));
  }
  for (std::size_t i = 1; i < originals.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (originals[i].gender == originals[k].gender) {
        plan.utility_term += cosine(plan.assignments[i].vector, plan.assignments[k].vector);
      }
    }
  }
  plan.privacy_term = privacy_sum(plan.assignments);
  return plan;
}

AnonymizationPlan resynthesis_plan(std::span<const SpeakerVector> originals) {
  validate_collection(originals);
  AnonymizationPlan plan;
  plan.loss_kind = LossKind::resynthesis;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    plan.assignments.push_back({i, std::nullopt, originals[i], 1.0});
  }
  for (std::size_t i = 1; i < originals.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (originals[i].gender == originals[k].gender) {
        plan.utility_term += cosine(originals[i], originals[k]);
      }
    }
  }
  plan.privacy_term = privacy_sum(plan.assignments);
  return plan;
}

double distinctiveness_sums(std::span<const SpeakerVector> vectors) {
  if (vectors.size() < 2) throw EmptyCollectionError("distinctiveness needs two speakers");
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) total += cosine(vectors[i], vectors[j]);
  }
  return total;
}

double differential_sum(std::span<const SpeakerVector> originals,
                        std::span<const SpeakerVector> anonymized) {
  if (originals.size() != anonymized.size()) {
    throw ContractError("original and anonymized speaker counts differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    for (std::size_t j = i + 1; j < originals.size(); ++j) {
      total += std::abs(cosine(anonymized[i], anonymized[j]) - cosine(originals[i], originals[j]));
    }
  }
  return total;
}

void write_plan(std::ostream& out, std::span<const SpeakerVector> originals,
                const AnonymizationPlan& plan, const Pool& pool) {
  for (const auto& a : plan.assignments) {
    out << originals[a.speaker].id << ' '
        << (a.pool_index ? pool.vectors[*a.pool_index].id : std::string("-")) << ' '
        << format_real(a.privacy) << '\n';
  }
}

std::vector<PlanEntry> read_plan(std::istream& in) {
  std::vector<PlanEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    PlanEntry e;
    std::string privacy;
    if (!(fields >> e.speaker_id >> e.pool_id >> privacy)) {
      throw ParseError("plan line needs three fields", line_no);
    }
    try {
      std::size_t used = 0;
      e.privacy = std::stod(privacy, &used);
      if (used != privacy.size()) throw std::invalid_argument(privacy);
    } catch (const std::exception&) {
      throw ParseError("bad privacy value '" + privacy + "'", line_no);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace convo_anon
