#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <sstream>

#include "convo_anon/errors.hpp"
#include "convo_anon/metrics.hpp"
#include "convo_anon/simulator.hpp"
#include "support.hpp"

using namespace convo_anon;

namespace {

// Windows lying wholly inside one speaker's segment, per speaker id.
std::map<std::string, std::vector<std::size_t>> clean_windows(const GroundTruth& gt) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t w = 0; w < gt.stream.windows.size(); ++w) {
    const auto& win = gt.stream.windows[w];
    if (!win.active) continue;
    const double lo = win.onset, hi = win.onset + gt.stream.window_length;
    std::vector<std::string> touching;
    for (const auto& s : gt.rttm.segments()) {
      if (s.onset < hi && s.end() > lo) touching.push_back(s.speaker);
    }
    if (touching.size() == 1) {
      for (const auto& s : gt.rttm.segments()) {
        if (s.onset <= lo && s.end() >= hi) out[s.speaker].push_back(w);
      }
    }
  }
  return out;
}

std::vector<double> unit(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

GroundTruth two_turns(double sigma) {
  GroundTruth gt;
  gt.rttm = RttmDocument("t", {{0, 2, "A"}, {1, 2, "B"}});
  gt.speaker_vectors = {{"A", Gender::female, {1, 0, 0}}, {"B", Gender::male, {0, 1, 0}}};
  gt.transcript = {{{0, 2, "A"}, {"a1", "a2", "a3", "a4"}}, {{1, 2, "B"}, {"b1", "b2", "b3", "b4"}}};
  gt.overlaps = {{1, 1, "A", "B", 0.5}};
  gt.duration = 3;
  gt.noise_sigma = sigma;
  gt.stream = render_stream("t", 3, gt.rttm.segments(),
                            {{"A", gt.speaker_vectors[0].values}, {"B", gt.speaker_vectors[1].values}},
                            gt.overlaps, sigma, 1.5, 0.75, 1);
  return gt;
}

}  // namespace

TEST_CASE("no overlaps without overlap injection") {
  SimulationConfig cfg;
  cfg.n_speakers = 4;
  cfg.n_conversations = 20;
  for (const auto& gt : simulate(cfg)) {
    CHECK(find_overlaps(gt.rttm).empty());
    CHECK(gt.overlaps.empty());
  }
}

TEST_CASE("zero noise reproduces the centroids exactly") {
  SimulationConfig cfg;
  cfg.window_noise_sigma = 0.0;
  cfg.n_conversations = 5;
  for (const auto& gt : simulate(cfg)) {
    std::size_t checked = 0;
    for (const auto& [speaker, windows] : clean_windows(gt)) {
      const auto it = std::find_if(gt.speaker_vectors.begin(), gt.speaker_vectors.end(),
                                   [&](const SpeakerVector& v) { return v.id == speaker; });
      REQUIRE(it != gt.speaker_vectors.end());
      for (std::size_t w : windows) {
        CHECK(gt.stream.windows[w].vector == it->values);
        ++checked;
      }
    }
    CHECK(checked > 10);
  }
}

TEST_CASE("speech ratio tracks its target") {
  SimulationConfig cfg;
  cfg.n_conversations = 100;
  cfg.n_speakers = 3;
  cfg.target_speech_ratio = 0.93;
  double total = 0;
  for (const auto& gt : simulate(cfg)) total += gt.speech_ratio();
  CHECK(std::abs(total / 100 - 0.93) <= 0.05);
}

TEST_CASE("generated conversations respect the configured ranges") {
  SimulationConfig cfg;
  cfg.n_conversations = 30;
  cfg.n_speakers = 5;
  cfg.duration_range = {20, 40};
  cfg.overlap_probability = 0.3;
  const double max_cos = std::cos(cfg.centroid_min_angle * std::numbers::pi / 180);
  for (const auto& gt : simulate(cfg)) {
    CHECK(gt.duration >= 20);
    CHECK(gt.duration <= 40);
    CHECK(gt.rttm.span_end() <= gt.duration + 1e-9);
    CHECK(gt.rttm.speakers().size() == 5);
    CHECK(gt.speaker_vectors.size() == 5);
    CHECK(gt.speech_ratio() > 0);
    CHECK(gt.speech_ratio() <= 1);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(gt.speaker_vectors[i].gender == (i % 2 ? Gender::male : Gender::female));
      for (std::size_t j = 0; j < i; ++j) {
        CHECK(test::naive_cosine(gt.speaker_vectors[i].values, gt.speaker_vectors[j].values) <= max_cos + 1e-9);
      }
    }
    for (const auto& m : gt.overlaps) {
      CHECK(m.alpha >= 0.3);
      CHECK(m.alpha <= 0.7);
      CHECK(m.first != m.second);
    }
    CHECK(gt.transcript.size() == gt.rttm.segments().size());
    gt.stream.validate();
  }
}

TEST_CASE("simulation is deterministic") {
  SimulationConfig cfg;
  cfg.n_conversations = 4;
  cfg.overlap_probability = 0.4;
  cfg.seed = 77;
  const auto a = simulate(cfg);
  const auto b = simulate(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rttm == b[i].rttm);
    CHECK(a[i].stream == b[i].stream);
    CHECK(a[i].words() == b[i].words());
  }
  cfg.seed = 78;
  CHECK_FALSE(simulate(cfg)[0].stream == a[0].stream);
}

TEST_CASE("impossible centroid spacing is a config error") {
  SimulationConfig cfg;
  cfg.n_speakers = 5;
  cfg.embedding_dim = 2;
  cfg.centroid_min_angle = 100;
  CHECK_THROWS_AS(simulate_conversation(cfg, 0), ConfigError);
}

TEST_CASE("apply_plan keeps the timeline and moves the voices") {
  SimulationConfig cfg;
  cfg.n_speakers = 3;
  cfg.window_noise_sigma = 0.05;
  cfg.duration_range = {80, 90};
  const auto gt = simulate_conversation(cfg, 0);
  const Pool pool = make_pool(60, cfg.embedding_dim, 5);
  const auto plan = plan_conversation(gt.speaker_vectors, pool, {20, 100, LossKind::aggregated, false});
  const auto anon = apply_plan(gt, plan);
  CHECK(anon.rttm == gt.rttm);
  CHECK(anon.words() == gt.words());
  REQUIRE(anon.stream.windows.size() == gt.stream.windows.size());
  for (std::size_t w = 0; w < gt.stream.windows.size(); ++w) {
    CHECK(anon.stream.windows[w].onset == gt.stream.windows[w].onset);
    CHECK(anon.stream.windows[w].active == gt.stream.windows[w].active);
  }
  const double sigma = cfg.window_noise_sigma;
  const double dim = static_cast<double>(cfg.embedding_dim);
  for (const auto& [speaker, windows] : clean_windows(anon)) {
    const std::size_t i = static_cast<std::size_t>(speaker.back() - '0');
    std::vector<double> mean(cfg.embedding_dim, 0.0);
    for (std::size_t w : windows) {
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += anon.stream.windows[w].vector[d];
    }
    const auto m = unit(mean);
    const auto target = unit(plan.assignments[i].vector.values);
    double dist = 0;
    for (std::size_t d = 0; d < m.size(); ++d) dist += (m[d] - target[d]) * (m[d] - target[d]);
    // Per-component 3 sigma / sqrt(n), summed over the dimensions.
    CHECK(std::sqrt(dist) <= 3 * sigma * std::sqrt(dim / static_cast<double>(windows.size())));
  }

  auto short_plan = plan;
  short_plan.assignments.pop_back();
  CHECK_THROWS_AS(apply_plan(gt, short_plan), NotFoundError);
  auto bad = plan;
  bad.assignments[0].speaker = 9;
  CHECK_THROWS_AS(apply_plan(gt, bad), NotFoundError);
}

TEST_CASE("identity plan at zero noise changes nothing") {
  SimulationConfig cfg;
  cfg.window_noise_sigma = 0.0;
  cfg.overlap_probability = 0.5;
  const auto gt = simulate_conversation(cfg, 2);
  const auto same = apply_plan(gt, resynthesis_plan(gt.speaker_vectors));
  CHECK(same.stream == gt.stream);
}

TEST_CASE("apply_plan_with_segmentation") {
  SimulationConfig cfg;
  cfg.window_noise_sigma = 0.0;
  const auto gt = simulate_conversation(cfg, 0);
  std::vector<Segment> relabeled;
  for (auto s : gt.rttm.segments()) {
    s.speaker = "p" + s.speaker;
    relabeled.push_back(s);
  }
  std::map<std::string, std::vector<double>> pseudo;
  for (const auto& v : gt.speaker_vectors) pseudo["p" + v.id] = {v.values.rbegin(), v.values.rend()};
  const auto anon = apply_plan_with_segmentation(gt, RttmDocument(gt.rttm.file_id(), relabeled), pseudo);
  CHECK(anon.rttm == gt.rttm);
  for (const auto& [speaker, windows] : clean_windows(gt)) {
    for (std::size_t w : windows) CHECK(anon.stream.windows[w].vector == pseudo.at("p" + speaker));
  }
  // An empty segmentation leaves every voice in place.
  const auto kept = apply_plan_with_segmentation(gt, RttmDocument(gt.rttm.file_id()), {});
  CHECK(kept.stream == gt.stream);
  CHECK_THROWS_AS(apply_plan_with_segmentation(gt, RttmDocument("x", {{0, 1, "q"}}), pseudo), NotFoundError);
  std::map<std::string, std::vector<double>> clash{{gt.speaker_vectors[0].id, gt.speaker_vectors[0].values}};
  CHECK_THROWS_AS(apply_plan_with_segmentation(gt, RttmDocument("x"), clash), ContractError);
}

TEST_CASE("window noise lowers overlap-to-speaker similarity") {
  // Mean cosine between overlap windows and the first speaker's centroid.
  auto mean_similarity = [](double sigma) {
    SimulationConfig cfg;
    cfg.n_speakers = 3;
    cfg.n_conversations = 20;
    cfg.overlap_probability = 0.5;
    cfg.window_noise_sigma = sigma;
    cfg.seed = 31;
    double total = 0;
    std::size_t count = 0;
    for (const auto& gt : simulate(cfg)) {
      for (const auto& m : gt.overlaps) {
        const auto& c = std::find_if(gt.speaker_vectors.begin(), gt.speaker_vectors.end(),
                                     [&](const SpeakerVector& v) { return v.id == m.first; })->values;
        for (std::size_t w = 0; w < gt.stream.windows.size(); ++w) {
          const double t = gt.stream.center(w);
          if (!gt.stream.windows[w].active || t < m.onset || t >= m.onset + m.duration) continue;
          total += cosine(gt.stream.windows[w].vector, c);
          ++count;
        }
      }
    }
    REQUIRE(count > 0);
    return total / static_cast<double>(count);
  };
  const double low = mean_similarity(0.02), mid = mean_similarity(0.1), high = mean_similarity(0.4);
  CHECK(low > mid);
  CHECK(mid > high);
}

TEST_CASE("remove_overlaps example") {
  const auto gt = two_turns(0.0);
  const auto cut = remove_overlaps(gt);
  REQUIRE(cut.rttm.segments().size() == 2);
  CHECK(cut.rttm.segments()[0] == Segment{0, 1, "A"});
  CHECK(cut.rttm.segments()[1] == Segment{1, 1, "B"});
  CHECK(cut.duration == 2);
  CHECK(cut.overlaps.empty());
  CHECK(find_overlaps(cut.rttm).empty());
  CHECK(cut.words() == std::vector<std::string>{"a1", "a2", "b3", "b4"});

  GroundTruth plain = gt;
  plain.rttm = RttmDocument("t", {{0, 1, "A"}, {2, 1, "B"}});
  plain.overlaps.clear();
  const auto same = remove_overlaps(plain);
  CHECK(same.rttm == plain.rttm);
  CHECK(same.stream == plain.stream);
}

TEST_CASE("remove_overlaps leaves no overlap on simulated data") {
  SimulationConfig cfg;
  cfg.overlap_probability = 0.6;
  cfg.n_speakers = 3;
  cfg.n_conversations = 10;
  for (const auto& gt : simulate(cfg)) {
    double overlap = 0;
    for (const auto& r : find_overlaps(gt.rttm)) overlap += r.duration;
    const auto cut = remove_overlaps(gt);
    CHECK(find_overlaps(cut.rttm).empty());
    CHECK(cut.duration == doctest::Approx(gt.duration - overlap).epsilon(1e-6));
    CHECK(cut.rttm.speakers().size() == gt.rttm.speakers().size());
    cut.stream.validate();
  }
}

TEST_CASE("shuffle_overlap_windows") {
  std::vector<double> ramp(100);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  // Sample rate 10 Hz: the region [2, 6) s spans samples 20..59.
  const OverlapRegion region{2, 4, {"A", "B"}};
  CHECK(shuffle_overlap_windows(ramp, region, 5.0, 10, 1) == ramp);

  bool moved = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = shuffle_overlap_windows(ramp, region, 1.0, 10, seed);
    for (std::size_t i = 0; i < 100; ++i) {
      if (i < 20 || i >= 60) CHECK(out[i] == ramp[i]);
    }
    std::vector<double> inside(out.begin() + 20, out.begin() + 60);
    std::sort(inside.begin(), inside.end());
    CHECK(std::equal(inside.begin(), inside.end(), ramp.begin() + 20));
    // Four quarters, each an intact ramp block.
    std::vector<int> quarters;
    for (int q = 0; q < 4; ++q) {
      const double first = out[20 + 10 * q];
      CHECK(std::fmod(first - 20, 10) == 0.0);
      for (int k = 0; k < 10; ++k) CHECK(out[20 + 10 * q + k] == first + k);
      quarters.push_back(static_cast<int>(first - 20) / 10);
    }
    std::sort(quarters.begin(), quarters.end());
    CHECK(quarters == std::vector<int>{0, 1, 2, 3});
    moved = moved || out != ramp;
  }
  CHECK(moved);

  // A trailing partial block stays in place.
  const auto partial = shuffle_overlap_windows(ramp, {2, 3.5, {}}, 1.0, 10, 4);
  for (std::size_t i = 50; i < 55; ++i) CHECK(partial[i] == ramp[i]);
  CHECK(shuffle_overlap_windows(ramp, region, 1.0, 10, 4) == shuffle_overlap_windows(ramp, region, 1.0, 10, 4));
  CHECK_THROWS_AS(shuffle_overlap_windows(ramp, {9, 2, {}}, 1.0, 10, 0), BoundsError);
  CHECK_THROWS_AS(shuffle_overlap_windows(ramp, {-1, 2, {}}, 1.0, 10, 0), BoundsError);
}

TEST_CASE("simulation config text") {
  std::istringstream in("# demo\nn_speakers = 4\nduration_min = 10\nduration_max = 20\nnoise_sigma = 0.02\n");
  const auto cfg = parse_simulation_config(in);
  CHECK(cfg.n_speakers == 4);
  CHECK(cfg.duration_range == Range{10, 20});
  CHECK(cfg.window_noise_sigma == 0.02);
  std::ostringstream out;
  write_simulation_config(out, cfg);
  std::istringstream back(out.str());
  std::ostringstream again;
  write_simulation_config(again, parse_simulation_config(back));
  CHECK(again.str() == out.str());

  auto parse = [](const std::string& text) {
    std::istringstream s(text);
    return parse_simulation_config(s);
  };
  CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("duration_min = 50\nduration_max = 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("speech_ratio = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("overlap_probability = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("genders = FX\n"), ConfigError);
  CHECK_THROWS_AS(parse("n_speakers = 0\n"), ConfigError);
}

TEST_CASE("make_pool") {
  const auto pool = make_pool(6, 5, 3);
  REQUIRE(pool.size() == 6);
  CHECK(pool.vectors[0].id == "pool0000");
  CHECK(pool.vectors[5].id == "pool0005");
  CHECK(pool.vectors[1].gender == Gender::male);
  CHECK(pool.vectors[2].gender == Gender::female);
  for (const auto& v : pool.vectors) {
    double n = 0;
    for (double x : v.values) n += x * x;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(make_pool(6, 5, 3).vectors[4].values == pool.vectors[4].values);
}

TEST_CASE("ground truth files round trip") {
  SimulationConfig cfg;
  cfg.overlap_probability = 0.5;
  cfg.n_speakers = 3;
  const auto gt = simulate_conversation(cfg, 4);
  const auto dir = std::filesystem::temp_directory_path() / "convo_anon_gt_test";
  std::filesystem::create_directories(dir);
  write_ground_truth(dir.string(), gt);
  const auto first = read_ground_truth(dir.string(), gt.rttm.file_id());
  write_ground_truth(dir.string(), first);
  const auto second = read_ground_truth(dir.string(), gt.rttm.file_id());
  CHECK(first.rttm == gt.rttm);
  CHECK(second.stream == first.stream);
  CHECK(second.words() == gt.words());
  CHECK(second.overlaps.size() == gt.overlaps.size());
  CHECK(second.duration == gt.duration);
  CHECK(second.seed == gt.seed);
  REQUIRE(second.speaker_vectors.size() == 3);
  CHECK(second.speaker_vectors[1].gender == Gender::male);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_ground_truth(dir.string(), "missing"));
}
