#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "convo_anon/anonymizer.hpp"
#include "convo_anon/diarizer.hpp"
#include "convo_anon/embeddings.hpp"
#include "convo_anon/errors.hpp"
#include "convo_anon/metrics.hpp"
#include "convo_anon/pipeline.hpp"
#include "convo_anon/random.hpp"
#include "convo_anon/rttm.hpp"
#include "convo_anon/simulator.hpp"
#include "convo_anon/stream.hpp"

namespace ca = convo_anon;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool verbose = false;
};

void setup_logging(bool verbose) {
  auto logger = spdlog::stderr_color_mt("convo-anon");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("CONVO_ANON_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ca::Error("cannot write '" + path + "'");
  return out;
}

std::vector<std::string> read_words(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ca::NotFoundError("cannot open '" + path + "'");
  return ca::transcript_words(ca::read_transcript(in));
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::size_t pool_size = 0;
};

void run_simulate(const SimulateArgs& args, const Globals& g) {
  ca::SimulationConfig cfg;
  if (!args.config.empty()) cfg = ca::read_simulation_config_file(args.config);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  const auto conversations = ca::simulate(cfg);
  for (const auto& gt : conversations) ca::write_ground_truth(args.out_dir, gt);
  if (args.pool_size > 0) {
    const auto pool = ca::make_pool(args.pool_size, cfg.embedding_dim,
                                    ca::derive_seed(cfg.seed, args.pool_size));
    ca::write_embedding_table_file(args.out_dir + "/pool.spk", pool.vectors);
  }
  spdlog::info("wrote {} conversations to {}", conversations.size(), args.out_dir);
}

// --- diarize ----------------------------------------------------------------

struct DiarizeArgs {
  std::string stream;
  std::string out_rttm;
  std::size_t k_max = 10;
  std::optional<std::size_t> k;
};

void run_diarize(const DiarizeArgs& args, const Globals& g) {
  const auto stream = ca::read_stream_file(args.stream);
  ca::DiarizeOptions opts;
  opts.k_max = args.k_max;
  opts.k_fixed = args.k;
  opts.seed = g.seed.value_or(0);
  const auto doc = ca::diarize(stream, opts);
  ca::write_rttm_file(args.out_rttm, doc);
  spdlog::info("{}: {} speakers, {} segments", stream.file_id, doc.speakers().size(),
               doc.segments().size());
}

// --- anonymize --------------------------------------------------------------

struct AnonymizeArgs {
  std::string embeddings;
  std::string pool;
  std::string loss = "as";
  std::size_t l_far = 200;
  std::size_t l_prune = 10000;
  std::size_t k_far = 200;
  std::size_t k_avg = 10;
  bool protect = false;
  bool privacy_in_score = false;
  std::string out_plan;
  std::string out_emb;
};

void run_anonymize(const AnonymizeArgs& args, const Globals& g) {
  const auto originals = ca::read_embedding_table_file(args.embeddings);
  ca::Pool pool{ca::read_embedding_table_file(args.pool), args.pool};
  ca::validate_pool(pool);
  if (args.protect) pool = ca::protect_pool(pool);
  const auto kind = ca::parse_loss_kind(args.loss);
  ca::AnonymizationPlan plan;
  switch (kind) {
    case ca::LossKind::baseline:
      plan = ca::baseline_plan(originals, pool, args.k_far, args.k_avg, g.seed.value_or(0));
      break;
    case ca::LossKind::resynthesis:
      plan = ca::resynthesis_plan(originals);
      break;
    default:
      plan = ca::plan_conversation(originals, pool,
                                   {args.l_far, args.l_prune, kind, args.privacy_in_score});
  }
  auto out = open_out(args.out_plan);
  ca::write_plan(out, originals, plan, pool);
  if (!args.out_emb.empty()) ca::write_embedding_table_file(args.out_emb, plan.anonymized_vectors());
  spdlog::info("privacy term {:.6f}, utility term {:.6f}", plan.privacy_term, plan.utility_term);
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string ref_rttm;
  std::string hyp_rttm;
  std::string orig_emb;
  std::string anon_emb;
  std::string ref_text;
  std::string hyp_text;
  double collar = 0.0;
  std::string out_report;
};

void run_evaluate(const EvaluateArgs& args) {
  const auto ref = ca::read_rttm_file(args.ref_rttm);
  ca::EvalReport report;
  if (!args.hyp_rttm.empty()) report.der = ca::der(ref, ca::read_rttm_file(args.hyp_rttm), args.collar);
  if (!args.orig_emb.empty() && !args.anon_emb.empty()) {
    const auto orig = ca::read_stream_file(args.orig_emb);
    const auto anon = ca::read_stream_file(args.anon_emb);
    const std::vector<ca::ConversationSpans> o{ca::collect_spans(orig, ref)};
    const std::vector<ca::ConversationSpans> a{ca::collect_spans(anon, ref)};
    const auto pairs = ca::build_pairs(o, a);
    report.positives = pairs.positives.size();
    report.negatives = pairs.negatives.size();
    report.oa_pairs = pairs.oa_pairs.size();
    if (!pairs.negatives.empty()) {
      report.eer = ca::eer_threshold(ca::score_pairs(pairs.positives),
                                     ca::score_pairs(pairs.negatives));
      report.far = ca::far_at_threshold(ca::score_pairs(pairs.oa_pairs), report.eer->threshold);
    } else {
      spdlog::warn("single-speaker reference: no negative trials, FAR not computed");
    }
    if (o.front().size() >= 2) {
      std::vector<ca::SpeakerVector> ov, av;
      const auto labels = ref.speakers();
      for (std::size_t i = 0; i < labels.size(); ++i) {
        ov.push_back({labels[i], ca::Gender::unknown, ca::pooled_embedding(o.front()[i])});
        av.push_back({labels[i], ca::Gender::unknown, ca::pooled_embedding(a.front()[i])});
      }
      report.distinctiveness_original = ca::distinctiveness_sums(ov);
      report.distinctiveness_anonymized = ca::distinctiveness_sums(av);
    }
  }
  if (!args.ref_text.empty() && !args.hyp_text.empty()) {
    report.wer = ca::wer(read_words(args.ref_text), read_words(args.hyp_text));
  }
  auto out = open_out(args.out_report);
  ca::write_report(out, report);
}

// --- pipeline ---------------------------------------------------------------

struct PipelineArgs {
  std::string config;
  std::string conversations;
  std::string pool;
  std::string out_dir;
  std::string anonymizers;
  bool use_real_rttm = false;
  bool remove_overlaps = false;
};

void run_pipeline_command(const PipelineArgs& args, const Globals& g) {
  ca::KeyValues kv;
  if (!args.config.empty()) kv = ca::KeyValues::read_file(args.config);
  if (!args.conversations.empty()) kv.set("conversations", args.conversations);
  if (!args.pool.empty()) kv.set("pool", args.pool);
  if (!args.out_dir.empty()) kv.set("out_dir", args.out_dir);
  if (!args.anonymizers.empty()) kv.set("anonymizers", args.anonymizers);
  if (args.use_real_rttm) kv.set("use_real_rttm", "1");
  if (args.remove_overlaps) kv.set("remove_overlaps", "1");
  if (g.seed) kv.set("seed", std::to_string(*g.seed));
  ca::PipelineConfig base;
  base.jobs = g.jobs;
  auto cfg = ca::take_pipeline_config(kv, base);
  kv.expect_consumed();
  const auto result = ca::run_pipeline(cfg);
  std::cout << result.summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversation-level speaker anonymization on embedding timelines"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base seed for every random stream");
  app.add_option("--jobs", g.jobs, "Conversations processed concurrently")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.fallthrough();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic conversations");
  simulate->add_option("--config", sim.config, "key = value simulation config");
  simulate->add_option("--out-dir", sim.out_dir)->required();
  simulate->add_option("--pool-size", sim.pool_size, "Also write a random pool.spk of this size");

  DiarizeArgs dia;
  auto* diarize = app.add_subcommand("diarize", "Spectral-clustering diarization of a stream");
  diarize->add_option("--stream", dia.stream)->required();
  diarize->add_option("--k-max", dia.k_max)->check(CLI::PositiveNumber);
  diarize->add_option("--k", dia.k, "Fixed speaker count")->check(CLI::PositiveNumber);
  diarize->add_option("--out-rttm", dia.out_rttm)->required();

  AnonymizeArgs anon;
  auto* anonymize = app.add_subcommand("anonymize", "Plan pseudo-speakers for one conversation");
  anonymize->add_option("--embeddings", anon.embeddings)->required();
  anonymize->add_option("--pool", anon.pool)->required();
  anonymize->add_option("--loss", anon.loss)->check(CLI::IsMember({"ds", "as", "baseline", "resyn"}));
  anonymize->add_option("--l-far", anon.l_far)->check(CLI::PositiveNumber);
  anonymize->add_option("--l-prune", anon.l_prune)->check(CLI::PositiveNumber);
  anonymize->add_option("--k-far", anon.k_far)->check(CLI::PositiveNumber);
  anonymize->add_option("--k-avg", anon.k_avg)->check(CLI::PositiveNumber);
  anonymize->add_flag("--protect-pool", anon.protect, "Average each pool vector with its neighbours first");
  anonymize->add_flag("--privacy-in-score", anon.privacy_in_score);
  anonymize->add_option("--out-plan", anon.out_plan)->required();
  anonymize->add_option("--out-emb", anon.out_emb, "Anonymized embedding table");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score one conversation");
  evaluate->add_option("--ref-rttm", ev.ref_rttm)->required();
  evaluate->add_option("--hyp-rttm", ev.hyp_rttm);
  evaluate->add_option("--orig-emb", ev.orig_emb, "Original window stream");
  evaluate->add_option("--anon-emb", ev.anon_emb, "Anonymized window stream");
  evaluate->add_option("--ref-text", ev.ref_text);
  evaluate->add_option("--hyp-text", ev.hyp_text);
  evaluate->add_option("--collar", ev.collar)->check(CLI::NonNegativeNumber);
  evaluate->add_option("--out-report", ev.out_report)->required();

  PipelineArgs pipe;
  auto* pipeline = app.add_subcommand("pipeline", "Simulate or load, diarize, anonymize, evaluate");
  pipeline->add_option("--config", pipe.config);
  pipeline->add_option("--conversations", pipe.conversations, "Directory written by simulate");
  pipeline->add_option("--pool", pipe.pool);
  pipeline->add_option("--out-dir", pipe.out_dir);
  pipeline->add_option("--anonymizers", pipe.anonymizers, "Comma list of as,ds,baseline,resyn");
  pipeline->add_flag("--use-real-rttm", pipe.use_real_rttm);
  pipeline->add_flag("--remove-overlaps", pipe.remove_overlaps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  setup_logging(g.verbose);

  try {
    if (*simulate) run_simulate(sim, g);
    if (*diarize) run_diarize(dia, g);
    if (*anonymize) run_anonymize(anon, g);
    if (*evaluate) run_evaluate(ev);
    if (*pipeline) run_pipeline_command(pipe, g);
  } catch (const ca::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitConfig;
  } catch (const ca::StageError& e) {
    spdlog::error("stage {} failed: {}", e.stage(), e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return 0;
}
