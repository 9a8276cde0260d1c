#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convo_anon/anonymizer.hpp"
#include "convo_anon/config.hpp"
#include "convo_anon/diarizer.hpp"
#include "convo_anon/errors.hpp"
#include "convo_anon/metrics.hpp"
#include "convo_anon/simulator.hpp"

namespace convo_anon {

/// A failure inside one pipeline stage, tagged with the stage and conversation.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string conversation, const std::string& what)
      : Error("[" + stage + "] " + conversation + ": " + what),
        stage_(std::move(stage)),
        conversation_(std::move(conversation)) {}
  const std::string& stage() const { return stage_; }
  const std::string& conversation() const { return conversation_; }

 private:
  std::string stage_;
  std::string conversation_;
};

struct PipelineConfig {
  // Conversations come from `conversation_dir` when set, else from `simulation`.
  SimulationConfig simulation;
  std::string conversation_dir;

  std::string pool_path;  // empty: synthetic pool of `pool_size`
  std::size_t pool_size = 500;
  bool protect_pool = true;

  std::vector<LossKind> anonymizers{LossKind::aggregated, LossKind::differential,
                                    LossKind::baseline, LossKind::resynthesis};
  SearchConfig search;
  std::size_t k_far = 200;
  std::size_t k_avg = 10;

  bool use_real_rttm = false;
  DiarizeOptions diarize;
  double collar = 0.0;
  bool remove_overlaps = false;

  std::string out_dir;  // empty: nothing written
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
};

/// Reads pipeline keys from `kv`; the remaining simulation keys go to
/// `cfg.simulation`. Keys it does not know stay in `kv`.
PipelineConfig take_pipeline_config(KeyValues& kv, PipelineConfig base = {});
PipelineConfig read_pipeline_config_file(const std::string& path, PipelineConfig base = {});

struct ConversationOutcome {
  std::string id;
  RttmDocument segmentation;  // what drove aggregation
  EvalReport original;        // DER of the diarizer on the untouched stream
  std::map<LossKind, EvalReport> anonymized;
};

struct PipelineResult {
  std::vector<ConversationOutcome> conversations;
  std::optional<EerResult> original_eer;  // fitted on all original trials
  std::map<LossKind, EvalReport> set_reports;
  std::string summary;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Per-metric count/mean/min/max rows in first-seen key order.
std::string summarize(std::span<const EvalReport> reports);

}  // namespace convo_anon
