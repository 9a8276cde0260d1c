#include "convo_anon/kernels.hpp"

#include <cmath>

namespace convo_anon::kernels {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) acc += a[d] * b[d];
  return acc;
}

double clamp_unit(double c) {
  if (c > 1.0) return 1.0;
  if (c < -1.0) return -1.0;
  return c;
}

void cosine_row(const RowBlock& a, std::span<const double> norms_a, const RowBlock& b,
                std::span<const double> norms_b, std::size_t i, double* out) {
  const auto ai = a.row(i);
  for (std::size_t j = 0; j < b.rows; ++j) {
    out[j] = clamp_unit(dot(ai, b.row(j)) / (norms_a[i] * norms_b[j]));
  }
}

// Returns false when the candidate repeats a pool index already on the path.
bool extend_one(const BeamStep& step, std::size_t parent, std::size_t rank, double& score) {
  const std::uint32_t slot = step.next_slots[rank];
  const std::uint32_t identity = step.slot_identity[slot];
  const std::uint32_t* path = step.paths.data() + parent * step.depth;
  for (std::size_t k = 0; k < step.depth; ++k) {
    if (step.slot_identity[path[k]] == identity) return false;
  }
  double s = step.scores[parent];
  if (!step.privacy.empty()) s = s + step.privacy[rank];
  const double* sim_row = step.slot_similarity.data() + std::size_t{slot} * step.slot_count;
  if (step.loss == PairLoss::aggregated) {
    for (std::size_t k = 0; k < step.depth; ++k) s = s + sim_row[path[k]];
  } else {
    for (std::size_t k = 0; k < step.depth; ++k) {
      s = s + std::abs(sim_row[path[k]] - step.original_row[k]);
    }
  }
  score = s;
  return true;
}

}  // namespace

std::vector<double> row_norms(const RowBlock& block) {
  std::vector<double> norms(block.rows);
  for (std::size_t i = 0; i < block.rows; ++i) {
    const auto r = block.row(i);
    norms[i] = std::sqrt(dot(r, r));
  }
  return norms;
}

std::vector<double> cosine_matrix_serial(const RowBlock& a, std::span<const double> norms_a,
                                         const RowBlock& b, std::span<const double> norms_b) {
  std::vector<double> out(a.rows * b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    cosine_row(a, norms_a, b, norms_b, i, out.data() + i * b.rows);
  }
  return out;
}

std::vector<double> cosine_matrix_parallel(const RowBlock& a, std::span<const double> norms_a,
                                           const RowBlock& b, std::span<const double> norms_b) {
  std::vector<double> out(a.rows * b.rows);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    cosine_row(a, norms_a, b, norms_b, static_cast<std::size_t>(i),
               out.data() + static_cast<std::size_t>(i) * b.rows);
  }
  return out;
}

std::vector<Extension> extend_beam_serial(const BeamStep& step) {
  std::vector<Extension> out;
  const std::size_t beam = step.scores.size();
  const std::size_t width = step.next_slots.size();
  out.reserve(beam * width);
  for (std::size_t p = 0; p < beam; ++p) {
    for (std::size_t r = 0; r < width; ++r) {
      double score = 0.0;
      if (extend_one(step, p, r, score)) {
        out.push_back({score, static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(r)});
      }
    }
  }
  return out;
}

std::vector<Extension> extend_beam_parallel(const BeamStep& step) {
  const std::size_t beam = step.scores.size();
  const std::size_t width = step.next_slots.size();
  std::vector<Extension> grid(beam * width);
  std::vector<unsigned char> valid(beam * width, 0);
  const auto parents = static_cast<std::ptrdiff_t>(beam);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < parents; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    for (std::size_t r = 0; r < width; ++r) {
      double score = 0.0;
      if (extend_one(step, p, r, score)) {
        grid[p * width + r] = {score, static_cast<std::uint32_t>(p),
                               static_cast<std::uint32_t>(r)};
        valid[p * width + r] = 1;
      }
    }
  }
  std::size_t kept = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (valid[i]) grid[kept++] = grid[i];
  }
  grid.resize(kept);
  return grid;
}

}  // namespace convo_anon::kernels
