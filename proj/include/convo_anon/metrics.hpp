#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convo_anon/rttm.hpp"
#include "convo_anon/stream.hpp"

namespace convo_anon {

/// An RTTM span together with the embedding extracted from it.
struct SpanEmbedding {
  Segment span;
  std::vector<double> embedding;
};
using SpeakerSpans = std::vector<SpanEmbedding>;
using ConversationSpans = std::vector<SpeakerSpans>;  // one entry per speaker

/// Per speaker (in `doc.speakers()` order), one span per active window whose
/// centre falls inside one of the speaker's segments: the segment clipped to
/// the window's hop-wide ownership cell, carrying the window embedding.
/// Speakers without such a window get the window nearest to their longest
/// segment.
ConversationSpans collect_spans(const WindowedEmbeddingStream& stream, const RttmDocument& doc);

/// Duration-weighted mean of the span embeddings.
std::vector<double> pooled_embedding(const SpeakerSpans& spans);

using TrialPair = std::pair<std::vector<double>, std::vector<double>>;

struct TrialPairSet {
  std::vector<TrialPair> positives;  // halves of each original speaker
  std::vector<TrialPair> negatives;  // ordered pairs of distinct speakers
  std::vector<TrialPair> oa_pairs;   // original vs anonymized, same speaker
};

TrialPairSet build_pairs(std::span<const ConversationSpans> originals,
                         std::span<const ConversationSpans> anonymized);

std::vector<double> score_pairs(std::span<const TrialPair> pairs);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Sweeps the midpoints of the sorted unique scores (plus one threshold below
/// and one above all scores) and returns the lowest threshold minimising
/// |FAR - FRR|. A trial is accepted when its score is >= the threshold.
EerResult eer_threshold(std::span<const double> positives, std::span<const double> negatives);

/// Fraction of scores >= threshold.
double far_at_threshold(std::span<const double> scores, double threshold);

struct DerResult {
  double der = 0.0;
  double missed = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double reference_seconds = 0.0;
};

/// 10 ms frame-level DER under the optimal one-to-one speaker mapping.
DerResult der(const RttmDocument& reference, const RttmDocument& hypothesis,
              double collar = 0.0);

struct WerResult {
  double wer = 0.0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_words = 0;
};

/// Minimal S + D + I; among minimal alignments the one with the most
/// substitutions fixes the breakdown.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// Row -> column assignment maximising the total weight; -1 for unmatched
/// rows when there are more rows than columns.
std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weight);

struct EvalReport {
  std::optional<EerResult> eer;
  std::optional<double> far;
  std::optional<DerResult> der;
  std::optional<WerResult> wer;
  std::optional<double> distinctiveness_original;
  std::optional<double> distinctiveness_anonymized;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t oa_pairs = 0;

  /// Present numeric fields as (key, value), fixed key order.
  std::vector<std::pair<std::string, double>> metrics() const;
};

/// `key = value` lines; rates with four decimals.
void write_report(std::ostream& out, const EvalReport& report);

}  // namespace convo_anon
