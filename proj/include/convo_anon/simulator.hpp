#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convo_anon/anonymizer.hpp"
#include "convo_anon/config.hpp"
#include "convo_anon/embeddings.hpp"
#include "convo_anon/rttm.hpp"
#include "convo_anon/stream.hpp"

namespace convo_anon {

using Range = std::pair<double, double>;

struct SimulationConfig {
  std::size_t n_speakers = 2;
  std::size_t n_conversations = 10;
  Range duration_range{30.0, 90.0};        // seconds per conversation
  Range turn_duration_range{5.0, 15.0};    // seconds per turn before rescaling
  double target_speech_ratio = 0.93;
  Range gap_range{0.0, 3.0};
  double overlap_probability = 0.0;
  Range overlap_duration_range{0.5, 2.0};
  Range overlap_mix_weight_range{0.3, 0.7};
  std::size_t embedding_dim = 64;
  double centroid_min_angle = 78.463;  // degrees; cos = 0.2
  double window_noise_sigma = 0.05;
  double window_length = 1.5;
  double hop = 0.75;
  std::string genders = "FM";  // cycled over speaker index
  double words_per_second = 2.5;
  std::size_t vocabulary = 1000;
  std::string id_prefix = "conv";
  std::uint64_t seed = 0;

  /// Throws ConfigError for empty or out-of-domain settings.
  void validate() const;
};

/// Takes the simulation keys out of `kv`, starting from `base`.
SimulationConfig take_simulation_config(KeyValues& kv, SimulationConfig base = {});
/// Flat `key = value` text with `#` comments; unknown keys are errors.
SimulationConfig parse_simulation_config(std::istream& in, SimulationConfig base = {});
SimulationConfig read_simulation_config_file(const std::string& path, SimulationConfig base = {});
void write_simulation_config(std::ostream& out, const SimulationConfig& cfg);

/// Region where two turns overlap; windows centred inside carry
/// alpha * first + (1 - alpha) * second.
struct OverlapMix {
  double onset = 0.0;
  double duration = 0.0;
  std::string first;
  std::string second;
  double alpha = 0.5;
};

struct TranscriptLine {
  Segment segment;
  std::vector<std::string> words;
};

struct GroundTruth {
  RttmDocument rttm;
  std::vector<SpeakerVector> speaker_vectors;  // one per RTTM speaker, in speaker order
  WindowedEmbeddingStream stream;
  std::vector<TranscriptLine> transcript;  // one per segment
  std::vector<OverlapMix> overlaps;
  double duration = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  double speech_ratio() const;
  /// All transcript words in segment order.
  std::vector<std::string> words() const;
};

std::vector<GroundTruth> simulate(const SimulationConfig& cfg);
GroundTruth simulate_conversation(const SimulationConfig& cfg, std::size_t index);

/// Renders the window stream of a timeline. `voices` maps every segment
/// speaker to its vector. When `activity` is non-empty it fixes the active
/// flags (one per window) instead of deriving them from the segments.
WindowedEmbeddingStream render_stream(const std::string& file_id, double duration,
                                      const std::vector<Segment>& segments,
                                      const std::map<std::string, std::vector<double>>& voices,
                                      const std::vector<OverlapMix>& mixes, double noise_sigma,
                                      double window_length, double hop, std::uint64_t seed,
                                      const std::vector<bool>& activity = {});

/// Rebuilds every speaker's windows from the assigned vectors with fresh
/// noise; the timeline and overlap weights are unchanged.
GroundTruth apply_plan(const GroundTruth& gt, const AnonymizationPlan& plan);

/// Anonymization driven by a (possibly wrong) segmentation: speech inside
/// `segmentation` takes the pseudo-voice of its segment's speaker, true speech
/// outside it keeps the original voice.
GroundTruth apply_plan_with_segmentation(const GroundTruth& gt, const RttmDocument& segmentation,
                                         const std::map<std::string, std::vector<double>>& pseudo);

/// Cuts every overlap region out of the timeline, words and stream.
GroundTruth remove_overlaps(const GroundTruth& gt);

/// Permutes the whole `window`-second blocks of `region` with a seeded
/// shuffle; a trailing partial block stays in place.
std::vector<double> shuffle_overlap_windows(std::span<const double> samples,
                                            const OverlapRegion& region, double window,
                                            double sample_rate, std::uint64_t seed);

/// Random unit vectors with genders cycling F/M, ids `pool<k>`.
Pool make_pool(std::size_t size, std::size_t dim, std::uint64_t seed);

/// Files written by the `simulate` command for one conversation.
void write_ground_truth(const std::string& dir, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::string& dir, const std::string& id);

/// Transcript file: `<onset> <duration> <speaker> <word>...` per line.
void write_transcript(std::ostream& out, const std::vector<TranscriptLine>& lines);
std::vector<TranscriptLine> read_transcript(std::istream& in);
std::vector<std::string> transcript_words(const std::vector<TranscriptLine>& lines);

}  // namespace convo_anon
