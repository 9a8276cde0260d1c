#include "convo_anon/rttm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "convo_anon/errors.hpp"

namespace convo_anon {

namespace {

bool segment_order(const Segment& a, const Segment& b) {
  if (a.onset != b.onset) return a.onset < b.onset;
  if (a.speaker != b.speaker) return a.speaker < b.speaker;
  return a.duration < b.duration;
}

double parse_time(const std::string& tok, std::size_t line, const char* field) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(x)) {
    throw ParseError(std::string("malformed ") + field + " '" + tok + "'", line);
  }
  return x;
}

}  // namespace

RttmDocument::RttmDocument(std::string file_id, std::vector<Segment> segments)
    : file_id_(std::move(file_id)), segments_(std::move(segments)) {
  for (const auto& s : segments_) {
    if (!(s.duration > 0.0) || !std::isfinite(s.onset)) {
      throw ContractError("segment of '" + s.speaker + "' has non-positive duration");
    }
  }
  std::stable_sort(segments_.begin(), segments_.end(), segment_order);
}

void RttmDocument::add(Segment segment) {
  if (!(segment.duration > 0.0) || !std::isfinite(segment.onset)) {
    throw ContractError("segment of '" + segment.speaker + "' has non-positive duration");
  }
  auto pos = std::upper_bound(segments_.begin(), segments_.end(), segment, segment_order);
  segments_.insert(pos, std::move(segment));
}

std::vector<std::string> RttmDocument::speakers() const {
  std::vector<std::string> out;
  for (const auto& s : segments_) {
    if (std::find(out.begin(), out.end(), s.speaker) == out.end()) out.push_back(s.speaker);
  }
  return out;
}

double RttmDocument::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments_) total += s.duration;
  return total;
}

double RttmDocument::span_end() const {
  double end = 0.0;
  for (const auto& s : segments_) end = std::max(end, s.end());
  return end;
}

RttmDocument parse_rttm(std::istream& in) {
  std::string file_id;
  std::vector<Segment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty() || tok[0] != "SPEAKER") continue;
    if (tok.size() < 8) throw ParseError("SPEAKER line has fewer than 8 fields", line_no);
    if (file_id.empty()) {
      file_id = tok[1];
    } else if (tok[1] != file_id) {
      throw ParseError("mixed file ids '" + file_id + "' and '" + tok[1] + "'", line_no);
    }
    const double onset = parse_time(tok[3], line_no, "onset");
    const double duration = parse_time(tok[4], line_no, "duration");
    if (onset < 0.0) throw ParseError("negative onset", line_no);
    if (!(duration > 0.0)) throw ParseError("non-positive duration", line_no);
    segments.push_back({onset, duration, tok[7]});
  }
  return RttmDocument(file_id, std::move(segments));
}

RttmDocument parse_rttm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_rttm(in);
}

RttmDocument read_rttm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open RTTM '" + path + "'");
  return parse_rttm(in);
}

std::string write_rttm(const RttmDocument& doc) {
  std::string out;
  char buf[64];
  for (const auto& s : doc.segments()) {
    std::snprintf(buf, sizeof buf, " 1 %.3f %.3f <NA> <NA> ", s.onset, s.duration);
    out += "SPEAKER ";
    out += doc.file_id();
    out += buf;
    out += s.speaker;
    out += " <NA> <NA>\n";
  }
  return out;
}

void write_rttm_file(const std::string& path, const RttmDocument& doc) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write RTTM '" + path + "'");
  out << write_rttm(doc);
}

std::vector<Segment> aggregate_speaker(const RttmDocument& doc, const std::string& speaker) {
  std::vector<Segment> out;
  for (const auto& s : doc.segments()) {
    if (s.speaker == speaker) out.push_back(s);
  }
  if (out.empty()) throw NotFoundError("speaker '" + speaker + "' not in " + doc.file_id());
  return out;
}

std::vector<OverlapRegion> find_overlaps(const RttmDocument& doc) {
  // Boundary sweep; ends sort before starts at the same instant so touching
  // turns do not overlap.
  struct Event {
    double time;
    int delta;
    const std::string* speaker;
  };
  // Events on the millisecond grid: onset + duration may miss the next
  // onset by an ulp.
  std::vector<Event> events;
  for (const auto& s : doc.segments()) {
    events.push_back({round_to_ms(s.onset), +1, &s.speaker});
    events.push_back({round_to_ms(s.end()), -1, &s.speaker});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.delta < b.delta;
  });

  std::vector<OverlapRegion> out;
  std::map<std::string, int> active;
  std::size_t distinct = 0;
  bool open = false;
  OverlapRegion current;
  std::size_t i = 0;
  while (i < events.size()) {
    const double t = events[i].time;
    for (; i < events.size() && events[i].time == t; ++i) {
      int& count = active[*events[i].speaker];
      if (events[i].delta > 0 && count++ == 0) ++distinct;
      if (events[i].delta < 0 && --count == 0) --distinct;
    }
    if (distinct >= 2) {
      if (!open) {
        open = true;
        current = OverlapRegion{t, 0.0, {}};
      }
      for (const auto& [spk, c] : active) {
        if (c > 0) current.speakers.insert(spk);
      }
    } else if (open) {
      open = false;
      current.duration = round_to_ms(t - current.onset);
      if (current.duration > 0.0) out.push_back(std::move(current));
    }
  }
  return out;
}

std::pair<std::vector<Segment>, std::vector<Segment>> split_half_by_duration(
    const std::vector<Segment>& spans) {
  if (spans.empty()) throw EmptyCollectionError("split of empty span list");
  double total = 0.0;
  for (const auto& s : spans) total += s.duration;
  const double half = total / 2.0;

  std::vector<Segment> first, second;
  double cumulative = 0.0;
  for (const auto& s : spans) {
    if (cumulative >= half) {
      second.push_back(s);
    } else if (cumulative + s.duration <= half) {
      first.push_back(s);
    } else {
      const double head = half - cumulative;
      first.push_back({s.onset, head, s.speaker});
      second.push_back({s.onset + head, s.duration - head, s.speaker});
    }
    cumulative += s.duration;
  }
  return {std::move(first), std::move(second)};
}

double round_to_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

}  // namespace convo_anon
