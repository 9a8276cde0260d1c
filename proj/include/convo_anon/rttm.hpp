#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace convo_anon {

struct Segment {
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds, > 0
  std::string speaker;

  double end() const { return onset + duration; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Speaker turns of one recording, kept sorted by (onset, speaker).
class RttmDocument {
 public:
  RttmDocument() = default;
  explicit RttmDocument(std::string file_id, std::vector<Segment> segments = {});

  const std::string& file_id() const { return file_id_; }
  const std::vector<Segment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }

  void add(Segment segment);

  /// Speaker labels in order of first appearance.
  std::vector<std::string> speakers() const;
  /// Sum of segment durations (overlapping speech counted per speaker).
  double total_duration() const;
  /// End of the last segment.
  double span_end() const;

  friend bool operator==(const RttmDocument&, const RttmDocument&) = default;

 private:
  std::string file_id_;
  std::vector<Segment> segments_;
};

struct OverlapRegion {
  double onset = 0.0;
  double duration = 0.0;
  std::set<std::string> speakers;

  double end() const { return onset + duration; }
};

RttmDocument parse_rttm(std::istream& in);
RttmDocument parse_rttm(std::string_view text);
RttmDocument read_rttm_file(const std::string& path);

std::string write_rttm(const RttmDocument& doc);
void write_rttm_file(const std::string& path, const RttmDocument& doc);

/// All segments of `speaker` in temporal order; NotFoundError if absent.
std::vector<Segment> aggregate_speaker(const RttmDocument& doc, const std::string& speaker);

/// Maximal intervals where at least two distinct speakers are active, with
/// the union of speakers active inside each interval.
std::vector<OverlapRegion> find_overlaps(const RttmDocument& doc);

/// Splits temporally ordered spans into two halves of equal total duration,
/// cutting the span that straddles the midpoint.
std::pair<std::vector<Segment>, std::vector<Segment>> split_half_by_duration(
    const std::vector<Segment>& spans);

/// Rounds a time to the canonical millisecond grid.
double round_to_ms(double seconds);

}  // namespace convo_anon
