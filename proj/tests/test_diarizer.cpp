#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "convo_anon/diarizer.hpp"
#include "convo_anon/errors.hpp"
#include "convo_anon/metrics.hpp"
#include "convo_anon/simulator.hpp"
#include "support.hpp"

using namespace convo_anon;

namespace {

WindowedEmbeddingStream stream_of(const std::vector<std::vector<double>>& vectors,
                                  std::vector<bool> active = {}) {
  WindowedEmbeddingStream s;
  s.file_id = "f";
  s.dim = vectors.front().size();
  for (std::size_t w = 0; w < vectors.size(); ++w) {
    s.windows.push_back({0.75 * static_cast<double>(w), active.empty() || active[w], vectors[w]});
  }
  return s;
}

SimilarityMatrix square(std::size_t n, std::vector<double> v) { return {n, n, std::move(v)}; }

// Two labelings describe the same partition.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("affinity examples") {
  const auto twins = affinity(stream_of({{1, 2}, {1, 2}}));
  CHECK(twins(0, 0) == 1.0);
  CHECK(twins(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(twins(1, 0) == twins(0, 1));
  const auto ortho = affinity(stream_of({{1, 0}, {0, 1}}), 1.0);
  CHECK(ortho(0, 1) == 0.0);
  CHECK(ortho(1, 1) == 1.0);
  CHECK_THROWS_AS(affinity(stream_of({{1, 0}}, {false})), EmptyCollectionError);
  CHECK_THROWS_AS(affinity(stream_of({{1, 0}}), 0.0), ContractError);
}

TEST_CASE("affinity matches a pruning oracle on random streams") {
  std::mt19937_64 rng(40);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 6;
    std::vector<std::vector<double>> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(test::random_vector(rng, 4));
    const double q = t % 2 ? 0.5 : 0.34;
    const auto a = affinity(stream_of(v), q);
    const auto keep = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
    // Pruned entries are absent rather than zero when taking the max.
    const double absent = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> kept(n, std::vector<double>(n, absent));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, std::size_t>> row;
      for (std::size_t j = 0; j < n; ++j) row.push_back({-test::naive_cosine(v[i], v[j]), j});
      std::sort(row.begin(), row.end());
      for (std::size_t r = 0; r < keep; ++r) kept[i][row[r].second] = -row[r].first;
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t nonzero = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double m = std::max(kept[i][j], kept[j][i]);
        const double want = i == j ? 1.0 : (m == absent ? 0.0 : m);
        CHECK(a(i, j) == doctest::Approx(want).epsilon(1e-12));
        CHECK(a(i, j) == a(j, i));
        nonzero += a(i, j) != 0.0;
      }
      CHECK(nonzero >= keep);
    }
  }
}

TEST_CASE("spectral_cluster on analytic matrices") {
  std::vector<double> block(36, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) block[i * 6 + j] = (i < 3) == (j < 3) ? 1.0 : 0.0;
  }
  const auto two = spectral_cluster(square(6, block), 5, std::nullopt, 1);
  CHECK(two.k == 2);
  CHECK(two.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(two.eigenvalues[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(two.eigenvalues[2] == doctest::Approx(1.0).epsilon(1e-9));

  const auto one = spectral_cluster(square(4, std::vector<double>(16, 1.0)), 3, std::nullopt, 1);
  CHECK(one.k == 1);
  CHECK(one.labels == std::vector<int>(4, 0));

  CHECK(spectral_cluster(square(6, block), 5, 3, 1).k == 3);
  CHECK(spectral_cluster(square(1, {1.0}), 10, std::nullopt, 1).k == 1);
  CHECK_THROWS_AS(spectral_cluster(square(2, {1, 0.5, 0.2, 1}), 2, std::nullopt, 0), ContractError);
  CHECK_THROWS_AS(spectral_cluster(SimilarityMatrix(2, 3, std::vector<double>(6, 0.0)), 2, std::nullopt, 0),
                  ContractError);
  CHECK_THROWS_AS(spectral_cluster(square(6, block), 5, 7, 1), ContractError);
}

TEST_CASE("three separated speakers are recovered exactly") {
  SimulationConfig cfg;
  cfg.n_speakers = 3;
  cfg.embedding_dim = 32;
  cfg.window_noise_sigma = 0.05;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto gt = simulate_conversation(cfg, 0);
    // Ground-truth labels of windows that lie wholly inside one speaker's turn.
    std::vector<std::size_t> clean;
    std::vector<int> truth;
    std::size_t a = 0;
    for (std::size_t w = 0; w < gt.stream.windows.size(); ++w) {
      if (!gt.stream.windows[w].active) continue;
      const double lo = gt.stream.windows[w].onset;
      const double hi = lo + gt.stream.window_length;
      for (const auto& s : gt.rttm.segments()) {
        if (s.onset <= lo && s.end() >= hi) {
          clean.push_back(a);
          truth.push_back(s.speaker.back() - '0');
          break;
        }
      }
      ++a;
    }
    const auto result = spectral_cluster(affinity(gt.stream), 10, std::nullopt, seed);
    CHECK(result.k == 3);
    std::vector<int> got;
    for (std::size_t i : clean) got.push_back(result.labels[i]);
    CHECK(same_partition(got, truth));
  }
}

TEST_CASE("labels_to_rttm examples") {
  const std::vector<std::vector<double>> v(4, {1.0, 0.0});
  const auto s = stream_of(v);
  ClusteringResult same{{0, 0, 0, 0}, 1, {}};
  const auto one = labels_to_rttm(s, same);
  REQUIRE(one.segments().size() == 1);
  CHECK(one.segments()[0] == Segment{0.0, 3.75, "spk0"});

  // Centres 0.75, 1.5, 2.25, 3.0; frames switch owner half way between centres,
  // a tie staying with the earlier window.
  const auto two = labels_to_rttm(s, {{0, 0, 1, 1}, 2, {}});
  REQUIRE(two.segments().size() == 2);
  CHECK(two.segments()[0] == Segment{0.0, 1.88, "spk0"});
  CHECK(two.segments()[1] == Segment{1.88, 1.87, "spk1"});

  const auto alt = labels_to_rttm(s, {{0, 1, 0, 1}, 2, {}});
  REQUIRE(alt.segments().size() == 4);
  CHECK(alt.segments()[1] == Segment{1.13, 0.75, "spk1"});
  CHECK(alt.segments()[2] == Segment{1.88, 0.75, "spk0"});

  const auto gap = labels_to_rttm(stream_of(v, {true, true, false, true}), {{0, 0, 1}, 2, {}});
  REQUIRE(gap.segments().size() == 2);
  CHECK(gap.segments()[0] == Segment{0.0, 1.88, "spk0"});
  CHECK(gap.segments()[1] == Segment{2.63, 1.12, "spk1"});

  const auto silent = stream_of(v, {false, false, false, false});
  CHECK(labels_to_rttm(silent, {{}, 0, {}}).empty());
  CHECK(diarize(silent, {}).empty());
  CHECK_THROWS_AS(labels_to_rttm(s, {{0, 1}, 2, {}}), ContractError);
}

TEST_CASE("rasterization is invariant under cluster renaming") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> pick(0, 2);
  const auto s = stream_of(std::vector<std::vector<double>>(20, {1.0, 0.0}));
  for (int t = 0; t < 20; ++t) {
    std::vector<int> labels(20), renamed(20);
    for (std::size_t i = 0; i < 20; ++i) {
      labels[i] = pick(rng);
      renamed[i] = (labels[i] + 1) % 3;
    }
    const auto a = labels_to_rttm(s, {labels, 3, {}});
    const auto b = labels_to_rttm(s, {renamed, 3, {}});
    CHECK(der(a, b).der == 0.0);
    CHECK(a.segments().size() == b.segments().size());
  }
}

TEST_CASE("diarize is deterministic and respects a fixed speaker count") {
  SimulationConfig cfg;
  cfg.n_speakers = 4;
  cfg.seed = 9;
  const auto gt = simulate_conversation(cfg, 1);
  DiarizeOptions opt;
  opt.seed = 3;
  CHECK(diarize(gt.stream, opt) == diarize(gt.stream, opt));
  opt.k_fixed = 4;
  const auto fixed = diarize(gt.stream, opt);
  CHECK(fixed.speakers().size() == 4);
  CHECK(der(gt.rttm, fixed).der < 0.1);
}
