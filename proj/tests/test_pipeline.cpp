#include <doctest.h>

#include <filesystem>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "convo_anon/pipeline.hpp"

using namespace convo_anon;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(std::size_t conversations) {
  PipelineConfig cfg;
  cfg.simulation.n_conversations = conversations;
  cfg.simulation.n_speakers = 3;
  cfg.pool_size = 300;
  cfg.search.l_far = 40;
  cfg.search.l_prune = 500;
  cfg.k_far = 40;
  cfg.seed = 11;
  cfg.simulation.seed = 11;
  return cfg;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = s.str();
  }
  return out;
}

}  // namespace

TEST_CASE("summarize examples") {
  EvalReport one;
  one.der = DerResult{0.25, 0.1, 0.05, 0.1, 10};
  const auto text = summarize(std::vector<EvalReport>{one});
  CHECK(text.find("der                        1   0.2500   0.2500   0.2500\n") != std::string::npos);

  EvalReport a, b;
  a.der = DerResult{0.1, 0.1, 0, 0, 1};
  b.der = DerResult{0.3, 0.3, 0, 0, 1};
  CHECK(summarize(std::vector<EvalReport>{a, b}).find("der                        2   0.2000   0.1000   0.3000\n") !=
        std::string::npos);
  CHECK_THROWS_AS(summarize(std::vector<EvalReport>{}), EmptyCollectionError);
}

TEST_CASE("summarize matches an independent accumulation") {
  std::mt19937_64 rng(60);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<EvalReport> reports(50);
  double sum = 0, lo = 1, hi = 0;
  for (auto& r : reports) {
    r.far = u(rng);
    sum += *r.far;
    lo = std::min(lo, *r.far);
    hi = std::max(hi, *r.far);
  }
  char want[128];
  std::snprintf(want, sizeof want, "far                       50 %8.4f %8.4f %8.4f\n", sum / 50, lo, hi);
  const auto text = summarize(reports);
  CHECK(text.substr(text.find('\n') + 1) == want);
}

TEST_CASE("empty conversation directory is a no-op") {
  const auto dir = fs::temp_directory_path() / "convo_anon_empty_dir";
  fs::create_directories(dir);
  PipelineConfig cfg;
  cfg.conversation_dir = dir.string();
  const auto result = run_pipeline(cfg);
  CHECK(result.conversations.empty());
  CHECK(result.set_reports.empty());
  fs::remove_all(dir);
}

TEST_CASE("identity plans leak, AS and DS plans do not") {
  auto cfg = small_config(10);
  cfg.use_real_rttm = true;
  const auto result = run_pipeline(cfg);
  REQUIRE(result.conversations.size() == 10);
  REQUIRE(result.original_eer);
  CHECK(*result.set_reports.at(LossKind::resynthesis).far >= 0.95);
  CHECK(*result.set_reports.at(LossKind::aggregated).far <= 0.05);
  CHECK(*result.set_reports.at(LossKind::differential).far <= 0.05);
  CHECK(result.summary.find("[as]") != std::string::npos);
  for (const auto& c : result.conversations) {
    CHECK(c.segmentation == c.segmentation);
    CHECK(c.anonymized.at(LossKind::aggregated).der.has_value());
  }
}

TEST_CASE("real segmentation never loses to predicted on average") {
  auto cfg = small_config(20);
  cfg.anonymizers = {LossKind::aggregated};
  cfg.use_real_rttm = true;
  const auto real = run_pipeline(cfg);
  cfg.use_real_rttm = false;
  const auto predicted = run_pipeline(cfg);
  double real_der = 0, predicted_der = 0;
  for (const auto& c : real.conversations) real_der += c.anonymized.at(LossKind::aggregated).der->der;
  for (const auto& c : predicted.conversations) {
    predicted_der += c.anonymized.at(LossKind::aggregated).der->der;
  }
  CHECK(real_der <= predicted_der);
}

TEST_CASE("pipeline output is byte reproducible") {
  const auto root = fs::temp_directory_path() / "convo_anon_repro";
  fs::remove_all(root);
  auto cfg = small_config(4);
  cfg.simulation.overlap_probability = 0.3;
  cfg.remove_overlaps = true;
  cfg.out_dir = (root / "a").string();
  run_pipeline(cfg);
  cfg.out_dir = (root / "b").string();
  cfg.jobs = 2;
  run_pipeline(cfg);
  const auto a = tree(root / "a");
  const auto b = tree(root / "b");
  CHECK(a.size() > 10);
  CHECK(a == b);
  CHECK(a.count("summary.txt") == 1);
  CHECK(a.count("as/set.report") == 1);
  fs::remove_all(root);
}

TEST_CASE("pipeline config keys") {
  std::istringstream in("seed = 5\nanonymizers = as, baseline\nl_far = 30\nuse_real_rttm = true\nn_speakers = 4\n");
  auto kv = KeyValues::parse(in);
  const auto cfg = take_pipeline_config(kv);
  CHECK(cfg.seed == 5);
  CHECK(cfg.simulation.seed == 5);
  CHECK(cfg.anonymizers == std::vector<LossKind>{LossKind::aggregated, LossKind::baseline});
  CHECK(cfg.search.l_far == 30);
  CHECK(cfg.use_real_rttm);
  CHECK(cfg.simulation.n_speakers == 4);

  std::istringstream bad("anonymizers = nope\n");
  auto kv_bad = KeyValues::parse(bad);
  CHECK_THROWS_AS(take_pipeline_config(kv_bad), ConfigError);
  std::istringstream unknown("frobnicate = 1\n");
  auto kv_unknown = KeyValues::parse(unknown);
  take_pipeline_config(kv_unknown);
  CHECK_THROWS_AS(kv_unknown.expect_consumed(), ConfigError);
}

TEST_CASE("a missing pool file is a tagged stage error") {
  auto cfg = small_config(2);
  cfg.pool_path = "/nonexistent/pool.spk";
  try {
    run_pipeline(cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "pool");
  }
}
