#include "convo_anon/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "convo_anon/random.hpp"

namespace convo_anon {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPoolStream = 0x706f6f6c;
constexpr std::uint64_t kBaselineStream = 0x62617365;

struct Work {
  ConversationOutcome outcome;
  ConversationSpans original_spans;
  std::map<LossKind, ConversationSpans> anonymized_spans;
};

std::vector<LossKind> parse_anonymizers(const std::string& text) {
  std::vector<LossKind> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty()) continue;
    LossKind kind;
    try {
      kind = parse_loss_kind(item);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (std::find(out.begin(), out.end(), kind) == out.end()) out.push_back(kind);
  }
  if (out.empty()) throw ConfigError("no anonymizer configured");
  return out;
}

double overlap_seconds(const RttmDocument& doc, const std::string& a, const RttmDocument& ref,
                       const std::string& b) {
  double total = 0.0;
  for (const auto& s : doc.segments()) {
    if (s.speaker != a) continue;
    for (const auto& r : ref.segments()) {
      if (r.speaker != b) continue;
      total += std::max(0.0, std::min(s.end(), r.end()) - std::max(s.onset, r.onset));
    }
  }
  return total;
}

Gender gender_of(const GroundTruth& gt, const RttmDocument& segmentation, const std::string& label) {
  for (const auto& v : gt.speaker_vectors) {
    if (v.id == label) return v.gender;
  }
  // Predicted label: the reference speaker it overlaps most.
  Gender best = Gender::unknown;
  double best_overlap = 0.0;
  for (const auto& v : gt.speaker_vectors) {
    const double o = overlap_seconds(segmentation, label, gt.rttm, v.id);
    if (o > best_overlap) {
      best_overlap = o;
      best = v.gender;
    }
  }
  return best;
}

std::vector<SpeakerVector> originals_from(const GroundTruth& gt, const RttmDocument& segmentation) {
  const auto spans = collect_spans(gt.stream, segmentation);
  const auto labels = segmentation.speakers();
  std::vector<SpeakerVector> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back({labels[i], gender_of(gt, segmentation, labels[i]), pooled_embedding(spans[i])});
  }
  return out;
}

AnonymizationPlan make_plan(LossKind kind, std::span<const SpeakerVector> originals,
                            const Pool& pool, const PipelineConfig& cfg, std::size_t index) {
  switch (kind) {
    case LossKind::baseline:
      return baseline_plan(originals, pool, cfg.k_far, cfg.k_avg,
                           derive_seed(derive_seed(cfg.seed, kBaselineStream), index));
    case LossKind::resynthesis:
      return resynthesis_plan(originals);
    default: {
      SearchConfig search = cfg.search;
      search.loss = kind;
      return plan_conversation(originals, pool, search);
    }
  }
}

GroundTruth anonymize(const GroundTruth& gt, const RttmDocument& segmentation,
                      std::span<const SpeakerVector> originals, const AnonymizationPlan& plan,
                      bool real_rttm) {
  if (real_rttm) {
    AnonymizationPlan by_reference = plan;
    for (auto& a : by_reference.assignments) {
      const auto& label = originals[a.speaker].id;
      auto it = std::find_if(gt.speaker_vectors.begin(), gt.speaker_vectors.end(),
                             [&](const SpeakerVector& v) { return v.id == label; });
      if (it == gt.speaker_vectors.end()) throw NotFoundError("no reference speaker '" + label + "'");
      a.speaker = static_cast<std::size_t>(it - gt.speaker_vectors.begin());
    }
    return apply_plan(gt, by_reference);
  }
  std::map<std::string, std::vector<double>> pseudo;
  for (const auto& a : plan.assignments) pseudo[originals[a.speaker].id] = a.vector.values;
  return apply_plan_with_segmentation(gt, segmentation, pseudo);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream out;
  write_report(out, report);
  return out.str();
}

Work process(const GroundTruth& input, std::size_t index, const Pool& pool,
             const PipelineConfig& cfg) {
  std::string stage = "prepare";
  const std::string& id = input.rttm.file_id();
  try {
    Work work;
    work.outcome.id = id;
    const GroundTruth gt = cfg.remove_overlaps ? remove_overlaps(input) : input;
    const auto ref_words = input.words();
    const auto hyp_words = gt.words();
    std::optional<WerResult> word_errors;
    if (!ref_words.empty()) word_errors = wer(ref_words, hyp_words);

    stage = "diarize";
    DiarizeOptions opts = cfg.diarize;
    opts.seed = derive_seed(cfg.seed, index);
    const RttmDocument predicted = diarize(gt.stream, opts);
    work.outcome.original.der = der(gt.rttm, predicted, cfg.collar);
    work.outcome.original.wer = word_errors;
    work.outcome.segmentation = cfg.use_real_rttm ? gt.rttm : predicted;
    if (work.outcome.segmentation.empty()) throw Error("segmentation has no speech");

    stage = "aggregate";
    const auto originals = originals_from(gt, work.outcome.segmentation);
    work.original_spans = collect_spans(gt.stream, gt.rttm);

    const fs::path out_dir(cfg.out_dir);
    if (!cfg.out_dir.empty()) {
      stage = "write";
      write_rttm_file((out_dir / "original" / (id + ".rttm")).string(), predicted);
    }

    for (LossKind kind : cfg.anonymizers) {
      const std::string name(loss_kind_name(kind));
      stage = "plan:" + name;
      const AnonymizationPlan plan = make_plan(kind, originals, pool, cfg, index);
      stage = "apply:" + name;
      const GroundTruth anon =
          anonymize(gt, work.outcome.segmentation, originals, plan, cfg.use_real_rttm);
      stage = "evaluate:" + name;
      const RttmDocument hyp = diarize(anon.stream, opts);
      EvalReport report;
      report.der = der(gt.rttm, hyp, cfg.collar);
      report.wer = word_errors;
      const auto anonymized = plan.anonymized_vectors();
      if (originals.size() >= 2) {
        report.distinctiveness_original = distinctiveness_sums(originals);
        report.distinctiveness_anonymized = distinctiveness_sums(anonymized);
      }
      work.anonymized_spans[kind] = collect_spans(anon.stream, gt.rttm);
      if (!cfg.out_dir.empty()) {
        stage = "write:" + name;
        const fs::path dir = out_dir / name;
        std::ostringstream plan_text;
        write_plan(plan_text, originals, plan, pool);
        write_text(dir / (id + ".plan"), plan_text.str());
        write_embedding_table_file((dir / (id + ".anon.spk")).string(), anonymized);
        write_rttm_file((dir / (id + ".rttm")).string(), hyp);
        write_text(dir / (id + ".report"), report_text(report));
      }
      work.outcome.anonymized[kind] = std::move(report);
    }
    return work;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, id, e.what());
  }
}

std::vector<GroundTruth> load_conversations(const PipelineConfig& cfg) {
  if (cfg.conversation_dir.empty()) {
    try {
      return simulate(cfg.simulation);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("simulate", "-", e.what());
    }
  }
  if (!fs::is_directory(cfg.conversation_dir)) {
    throw ConfigError("conversation directory '" + cfg.conversation_dir + "' does not exist");
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(cfg.conversation_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".rttm") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  std::vector<GroundTruth> out;
  for (const auto& id : ids) {
    try {
      out.push_back(read_ground_truth(cfg.conversation_dir, id));
    } catch (const std::exception& e) {
      throw StageError("load", id, e.what());
    }
  }
  return out;
}

Pool load_pool(const PipelineConfig& cfg, std::size_t dim) {
  Pool pool;
  try {
    if (cfg.pool_path.empty()) {
      pool = make_pool(cfg.pool_size, dim, derive_seed(cfg.seed, kPoolStream));
    } else {
      pool.vectors = read_embedding_table_file(cfg.pool_path);
      pool.provenance = cfg.pool_path;
    }
    validate_pool(pool);
    if (!pool.vectors.empty() && pool.vectors.front().dim() != dim) {
      throw ContractError("pool dimension " + std::to_string(pool.vectors.front().dim()) +
                          " differs from stream dimension " + std::to_string(dim));
    }
    return cfg.protect_pool ? protect_pool(pool) : pool;
  } catch (const std::exception& e) {
    throw StageError("pool", cfg.pool_path.empty() ? "-" : cfg.pool_path, e.what());
  }
}

}  // namespace

PipelineConfig take_pipeline_config(KeyValues& kv, PipelineConfig cfg) {
  if (auto v = kv.take_count("seed")) {
    cfg.seed = *v;
    cfg.simulation.seed = *v;
  }
  if (auto v = kv.take_string("conversations")) cfg.conversation_dir = *v;
  if (auto v = kv.take_string("pool")) cfg.pool_path = *v;
  if (auto v = kv.take_count("pool_size")) cfg.pool_size = *v;
  if (auto v = kv.take_flag("protect_pool")) cfg.protect_pool = *v;
  if (auto v = kv.take_string("anonymizers")) cfg.anonymizers = parse_anonymizers(*v);
  if (auto v = kv.take_count("l_far")) cfg.search.l_far = *v;
  if (auto v = kv.take_count("l_prune")) cfg.search.l_prune = *v;
  if (auto v = kv.take_flag("privacy_in_score")) cfg.search.include_privacy_term_in_score = *v;
  if (auto v = kv.take_count("k_far")) cfg.k_far = *v;
  if (auto v = kv.take_count("k_avg")) cfg.k_avg = *v;
  if (auto v = kv.take_flag("use_real_rttm")) cfg.use_real_rttm = *v;
  if (auto v = kv.take_count("k_max")) cfg.diarize.k_max = *v;
  if (auto v = kv.take_count("k")) cfg.diarize.k_fixed = *v;
  if (auto v = kv.take_real("keep_fraction")) cfg.diarize.keep_fraction = *v;
  if (auto v = kv.take_real("collar")) cfg.collar = *v;
  if (auto v = kv.take_flag("remove_overlaps")) cfg.remove_overlaps = *v;
  if (auto v = kv.take_string("out_dir")) cfg.out_dir = *v;
  if (auto v = kv.take_count("jobs")) cfg.jobs = *v;
  cfg.simulation = take_simulation_config(kv, cfg.simulation);
  if (cfg.search.l_far == 0 || cfg.search.l_prune == 0) {
    throw ConfigError("l_far and l_prune must be positive");
  }
  if (cfg.k_avg == 0 || cfg.k_avg > cfg.k_far) throw ConfigError("need 0 < k_avg <= k_far");
  if (cfg.collar < 0.0) throw ConfigError("collar must be non-negative");
  if (cfg.jobs == 0) cfg.jobs = 1;
  return cfg;
}

PipelineConfig read_pipeline_config_file(const std::string& path, PipelineConfig base) {
  KeyValues kv = KeyValues::read_file(path);
  auto cfg = take_pipeline_config(kv, std::move(base));
  kv.expect_consumed();
  return cfg;
}

std::string summarize(std::span<const EvalReport> reports) {
  if (reports.empty()) throw EmptyCollectionError("nothing to summarize");
  std::vector<std::string> keys;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : reports) {
    for (const auto& [key, value] : r.metrics()) {
      if (!values.count(key)) keys.push_back(key);
      values[key].push_back(value);
    }
  }
  std::string out = "metric                 count     mean      min      max\n";
  char line[128];
  for (const auto& key : keys) {
    const auto& v = values[key];
    double sum = 0.0;
    for (double x : v) sum += x;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::snprintf(line, sizeof line, "%-22s %5zu %8.4f %8.4f %8.4f\n", key.c_str(), v.size(),
                  sum / static_cast<double>(v.size()), *lo, *hi);
    out += line;
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult result;
  const auto conversations = load_conversations(cfg);
  if (conversations.empty()) {
    spdlog::warn("no conversations to process");
    return result;
  }
  const Pool pool = load_pool(cfg, conversations.front().stream.dim);

  if (!cfg.out_dir.empty()) {
    fs::create_directories(fs::path(cfg.out_dir) / "original");
    for (LossKind kind : cfg.anonymizers) {
      fs::create_directories(fs::path(cfg.out_dir) / std::string(loss_kind_name(kind)));
    }
  }

  const auto count = static_cast<std::ptrdiff_t>(conversations.size());
  std::vector<Work> work(conversations.size());
  std::vector<std::exception_ptr> failures(conversations.size());
  spdlog::info("processing {} conversations with {} jobs", count, cfg.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(cfg.jobs))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      work[i] = process(conversations[i], static_cast<std::size_t>(i), pool, cfg);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<ConversationSpans> originals;
  for (const auto& w : work) originals.push_back(w.original_spans);

  std::string summary;
  std::vector<EvalReport> original_reports;
  for (const auto& w : work) original_reports.push_back(w.outcome.original);
  summary += "[original]\n" + summarize(original_reports);

  for (LossKind kind : cfg.anonymizers) {
    const std::string name(loss_kind_name(kind));
    std::vector<ConversationSpans> anonymized;
    std::vector<EvalReport> reports;
    for (const auto& w : work) {
      anonymized.push_back(w.anonymized_spans.at(kind));
      reports.push_back(w.outcome.anonymized.at(kind));
    }
    EvalReport set;
    try {
      const auto pairs = build_pairs(originals, anonymized);
      set.positives = pairs.positives.size();
      set.negatives = pairs.negatives.size();
      set.oa_pairs = pairs.oa_pairs.size();
      if (!pairs.positives.empty() && !pairs.negatives.empty()) {
        const auto eer = eer_threshold(score_pairs(pairs.positives), score_pairs(pairs.negatives));
        set.eer = eer;
        set.far = far_at_threshold(score_pairs(pairs.oa_pairs), eer.threshold);
        result.original_eer = eer;
      } else {
        spdlog::warn("{}: too few trials for an EER threshold", name);
      }
    } catch (const std::exception& e) {
      throw StageError("evaluate:" + name, "set", e.what());
    }
    summary += "\n[" + name + "]\n";
    if (set.far) {
      char line[96];
      std::snprintf(line, sizeof line, "eer = %.4f\nfar = %.4f\n", set.eer->eer, *set.far);
      summary += line;
    }
    summary += summarize(reports);
    if (!cfg.out_dir.empty()) {
      write_text(fs::path(cfg.out_dir) / name / "set.report", report_text(set));
    }
    result.set_reports[kind] = std::move(set);
  }
  if (!cfg.out_dir.empty()) write_text(fs::path(cfg.out_dir) / "summary.txt", summary);

  for (auto& w : work) result.conversations.push_back(std::move(w.outcome));
  result.summary = std::move(summary);
  return result;
}

}  // namespace convo_anon
