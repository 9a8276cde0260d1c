#include "convo_anon/diarizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "convo_anon/errors.hpp"
#include "convo_anon/kernels.hpp"
#include "convo_anon/random.hpp"

namespace convo_anon {

namespace {

constexpr int kRestarts = 10;
constexpr int kMaxIterations = 300;

using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansRun {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

double squared_distance(const Points& x, Eigen::Index i, const Points& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

KMeansRun kmeans_once(const Points& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Points centers(k, x.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x, i, centers, c - 1));
      total += nearest[i];
    }
    Eigen::Index chosen = n - 1;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    centers.row(c) = x.row(chosen);
  }

  KMeansRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    bool changed = false;
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(x, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(x, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      run.inertia += best_d;
      if (run.labels[i] != best) {
        run.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Points sums = Points::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.labels[i]) += x.row(i);
      ++counts[run.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return run;
}

// Renumbers labels by order of first appearance.
std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> map;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (static_cast<std::size_t>(l) >= map.size()) map.resize(static_cast<std::size_t>(l) + 1, -1);
    if (map[l] < 0) map[l] = *std::max_element(map.begin(), map.end()) + 1;
    out[i] = map[l];
  }
  return out;
}

}  // namespace

SimilarityMatrix affinity(const WindowedEmbeddingStream& stream, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ContractError("keep_fraction must lie in (0, 1]");
  }
  stream.validate();
  std::vector<double> flat;
  std::size_t n = 0;
  for (const auto& w : stream.windows) {
    if (!w.active) continue;
    flat.insert(flat.end(), w.vector.begin(), w.vector.end());
    ++n;
  }
  if (n == 0) throw EmptyCollectionError("stream has no active windows");
  const kernels::RowBlock block{flat, n, stream.dim};
  const auto norms = kernels::row_norms(block);
  const auto cos = kernels::cosine_matrix_parallel(block, norms, block, norms);

  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-12)), 1, n);
  std::vector<double> pruned(n * n, 0.0);
  std::vector<unsigned char> kept(n * n, 0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = cos.data() + i * n;
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    for (std::size_t r = 0; r < keep; ++r) {
      pruned[i * n + idx[r]] = row[idx[r]];
      kept[i * n + idx[r]] = 1;
    }
  }
  // Max over the retained entries, so a kept negative cosine survives.
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t a = i * n + j, b = j * n + i;
      if (i == j) {
        out[a] = 1.0;
      } else if (kept[a] && kept[b]) {
        out[a] = std::max(pruned[a], pruned[b]);
      } else if (kept[a] || kept[b]) {
        out[a] = kept[a] ? pruned[a] : pruned[b];
      }
    }
  }
  return {n, n, std::move(out)};
}

ClusteringResult spectral_cluster(const SimilarityMatrix& affinity, std::size_t k_max,
                                  std::optional<std::size_t> k_fixed, std::uint64_t seed) {
  if (!affinity.is_square()) throw ContractError("affinity matrix is not square");
  if (!affinity.is_symmetric()) throw ContractError("affinity matrix is not symmetric");
  const std::size_t n = affinity.rows();
  if (n == 0) throw EmptyCollectionError("empty affinity matrix");
  if (k_max == 0) throw ContractError("k_max must be at least 1");
  if (k_fixed && (*k_fixed == 0 || *k_fixed > n)) {
    throw ContractError("fixed speaker count outside [1, window count]");
  }

  // Negative cosines carry no affinity.
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = std::max(0.0, affinity(i, j));
  }
  const Eigen::VectorXd degree = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  const Eigen::MatrixXd laplacian =
      Eigen::MatrixXd::Identity(n, n) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
  if (solver.info() != Eigen::Success) throw ContractError("eigendecomposition failed");

  ClusteringResult result;
  result.eigenvalues.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + n);

  std::size_t k = 1;
  if (k_fixed) {
    k = *k_fixed;
  } else {
    const std::size_t upper = std::min(k_max, n - 1);
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c <= upper; ++c) {
      const double gap = result.eigenvalues[c] - result.eigenvalues[c - 1];
      if (gap > best_gap) {
        best_gap = gap;
        k = c;
      }
    }
  }
  result.k = k;
  if (k == 1) {
    result.labels.assign(n, 0);
    return result;
  }

  Points x = solver.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm > 0.0) x.row(i) /= norm;
  }
  Rng rng(seed);
  KMeansRun best;
  for (int r = 0; r < kRestarts; ++r) {
    auto run = kmeans_once(x, static_cast<int>(k), rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  result.labels = canonical_labels(best.labels);
  return result;
}

RttmDocument labels_to_rttm(const WindowedEmbeddingStream& stream, const ClusteringResult& result) {
  std::vector<std::size_t> active;
  for (std::size_t w = 0; w < stream.windows.size(); ++w) {
    if (stream.windows[w].active) active.push_back(w);
  }
  if (result.labels.size() != active.size()) {
    throw ContractError("label count does not match the active window count");
  }
  RttmDocument doc(stream.file_id);
  if (active.empty()) return doc;

  auto to_frame = [](double t) { return static_cast<long>(std::llround(t / kFrameSeconds)); };
  long frame_count = 0;
  for (const auto& w : stream.windows) {
    frame_count = std::max(frame_count, to_frame(w.onset + stream.window_length));
  }
  std::vector<int> label_of(stream.windows.size(), -1);
  for (std::size_t a = 0; a < active.size(); ++a) label_of[active[a]] = result.labels[a];

  // Every window competes for the frames it covers; inactive ones claim silence.
  std::vector<int> owner(static_cast<std::size_t>(frame_count), -1);
  std::vector<double> distance(owner.size(), std::numeric_limits<double>::infinity());
  for (std::size_t w = 0; w < stream.windows.size(); ++w) {
    const double center = stream.center(w);
    const long lo = std::max(0L, to_frame(stream.windows[w].onset));
    const long hi = to_frame(stream.windows[w].onset + stream.window_length);
    for (long f = lo; f < hi; ++f) {
      const double d = std::abs((static_cast<double>(f) + 0.5) * kFrameSeconds - center);
      if (d < distance[f] - 1e-9) {
        distance[f] = d;
        owner[f] = label_of[w];
      }
    }
  }

  long f = 0;
  while (f < frame_count) {
    const int label = owner[f];
    long g = f;
    while (g < frame_count && owner[g] == label) ++g;
    if (label >= 0 && g - f >= 2) {
      doc.add({round_to_ms(static_cast<double>(f) * kFrameSeconds),
               round_to_ms(static_cast<double>(g - f) * kFrameSeconds),
               "spk" + std::to_string(label)});
    }
    f = g;
  }
  return doc;
}

RttmDocument diarize(const WindowedEmbeddingStream& stream, const DiarizeOptions& options) {
  if (stream.active_count() == 0) return RttmDocument(stream.file_id);
  const auto result = spectral_cluster(affinity(stream, options.keep_fraction), options.k_max,
                                       options.k_fixed, options.seed);
  return labels_to_rttm(stream, result);
}

}  // namespace convo_anon
