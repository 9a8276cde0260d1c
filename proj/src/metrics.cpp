#include "convo_anon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "convo_anon/embeddings.hpp"
#include "convo_anon/errors.hpp"

namespace convo_anon {

namespace {

struct FrameSets {
  std::vector<std::string> speakers;
  std::vector<std::vector<unsigned char>> active;  // speaker x frame
};

long long to_ms(double seconds) { return std::llround(seconds * 1000.0); }

// A frame belongs to a segment when its centre lies in [onset, end).
long long first_frame_at_or_after(long long ms) {
  const long long x = ms - 5;
  return x <= 0 ? 0 : (x + 9) / 10;
}

FrameSets rasterize(const RttmDocument& doc, long long frames) {
  FrameSets out;
  out.speakers = doc.speakers();
  out.active.assign(out.speakers.size(), std::vector<unsigned char>(frames, 0));
  for (const auto& s : doc.segments()) {
    const auto idx = static_cast<std::size_t>(
        std::find(out.speakers.begin(), out.speakers.end(), s.speaker) - out.speakers.begin());
    const long long lo = first_frame_at_or_after(to_ms(s.onset));
    const long long hi = std::min(frames, first_frame_at_or_after(to_ms(s.end())));
    for (long long f = lo; f < hi; ++f) out.active[idx][f] = 1;
  }
  return out;
}

std::vector<double> mean_vector(const std::vector<std::vector<double>>& rows,
                                const std::vector<double>& weights) {
  std::vector<double> out(rows.front().size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += weights[i] * rows[i][d];
    total += weights[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::string rate(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

ConversationSpans collect_spans(const WindowedEmbeddingStream& stream, const RttmDocument& doc) {
  ConversationSpans out;
  const double half_cell = stream.hop / 2;
  for (const auto& speaker : doc.speakers()) {
    SpeakerSpans spans;
    const auto segments = aggregate_speaker(doc, speaker);
    for (std::size_t w = 0; w < stream.windows.size(); ++w) {
      if (!stream.windows[w].active) continue;
      const double c = stream.center(w);
      for (const auto& s : segments) {
        if (c < s.onset || c >= s.end()) continue;
        const double lo = std::max(s.onset, c - half_cell);
        const double hi = std::min(s.end(), c + half_cell);
        if (hi > lo) spans.push_back({{lo, hi - lo, speaker}, stream.windows[w].vector});
      }
    }
    if (spans.empty()) {
      const auto longest = *std::max_element(
          segments.begin(), segments.end(),
          [](const Segment& a, const Segment& b) { return a.duration < b.duration; });
      const double mid = longest.onset + longest.duration / 2;
      std::size_t best = stream.windows.size();
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t w = 0; w < stream.windows.size(); ++w) {
        const double d = std::abs(stream.center(w) - mid);
        if (stream.windows[w].active && d < best_d) {
          best_d = d;
          best = w;
        }
      }
      if (best == stream.windows.size()) {
        throw EmptyCollectionError("no active window for speaker '" + speaker + "'");
      }
      spans.push_back({longest, stream.windows[best].vector});
    }
    out.push_back(std::move(spans));
  }
  return out;
}

std::vector<double> pooled_embedding(const SpeakerSpans& spans) {
  if (spans.empty()) throw EmptyCollectionError("no spans to pool");
  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
  for (const auto& s : spans) {
    rows.push_back(s.embedding);
    weights.push_back(s.span.duration);
  }
  return mean_vector(rows, weights);
}

TrialPairSet build_pairs(std::span<const ConversationSpans> originals,
                         std::span<const ConversationSpans> anonymized) {
  if (originals.empty()) throw EmptyCollectionError("no conversations to pair");
  if (originals.size() != anonymized.size()) {
    throw ContractError("original and anonymized conversation counts differ");
  }
  TrialPairSet out;
  for (std::size_t m = 0; m < originals.size(); ++m) {
    const auto& conv = originals[m];
    if (conv.size() != anonymized[m].size()) {
      throw ContractError("conversation " + std::to_string(m) + " differs in speaker count");
    }
    std::vector<std::vector<double>> pooled;
    for (const auto& spans : conv) {
      std::vector<Segment> segs;
      for (const auto& s : spans) segs.push_back(s.span);
      const auto [first, second] = split_half_by_duration(segs);
      const bool cut = first.size() + second.size() > spans.size();
      const std::size_t offset = first.size() - (cut ? 1 : 0);
      SpeakerSpans a, b;
      for (std::size_t i = 0; i < first.size(); ++i) a.push_back({first[i], spans[i].embedding});
      for (std::size_t j = 0; j < second.size(); ++j) {
        b.push_back({second[j], spans[offset + j].embedding});
      }
      out.positives.emplace_back(pooled_embedding(a), pooled_embedding(b));
      pooled.push_back(pooled_embedding(spans));
    }
    for (std::size_t n = 0; n < pooled.size(); ++n) {
      for (std::size_t k = 0; k < pooled.size(); ++k) {
        if (k != n) out.negatives.emplace_back(pooled[n], pooled[k]);
      }
    }
    for (std::size_t n = 0; n < pooled.size(); ++n) {
      out.oa_pairs.emplace_back(pooled[n], pooled_embedding(anonymized[m][n]));
    }
  }
  return out;
}

std::vector<double> score_pairs(std::span<const TrialPair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back(cosine(a, b));
  return out;
}

EerResult eer_threshold(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw EmptyCollectionError("EER needs positive and negative scores");
  }
  std::vector<double> pos(positives.begin(), positives.end());
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> all(pos);
  all.insert(all.end(), neg.begin(), neg.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds{all.front() - 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) thresholds.push_back((all[i] + all[i + 1]) / 2);
  thresholds.push_back(all.back() + 1.0);

  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : thresholds) {
    const auto rejected = std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
    const auto accepted = neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    const double frr = static_cast<double>(rejected) / np;
    const double far = static_cast<double>(accepted) / nn;
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {(far + frr) / 2, t};
    }
  }
  return best;
}

double far_at_threshold(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw EmptyCollectionError("FAR of no scores");
  const auto accepted = std::count_if(scores.begin(), scores.end(),
                                      [&](double s) { return s >= threshold; });
  return static_cast<double>(accepted) / static_cast<double>(scores.size());
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight.front().size() : 0;
  const std::size_t n = std::max(rows, cols);
  std::vector<int> match(rows, -1);
  if (n == 0) return match;
  auto cost = [&](std::size_t i, std::size_t j) -> long long {
    return (i < rows && j < cols) ? -weight[i][j] : 0;
  };
  // Shortest augmenting path with potentials, 1-based.
  constexpr long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<long long> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      long long delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i - 1 < rows && j - 1 < cols) match[i - 1] = static_cast<int>(j - 1);
  }
  return match;
}

DerResult der(const RttmDocument& reference, const RttmDocument& hypothesis, double collar) {
  if (collar < 0.0) throw ContractError("collar must be non-negative");
  const long long end_ms = std::max(to_ms(reference.span_end()), to_ms(hypothesis.span_end()));
  const long long frames = first_frame_at_or_after(end_ms) + 1;
  const FrameSets ref = rasterize(reference, frames);
  const FrameSets hyp = rasterize(hypothesis, frames);

  std::vector<unsigned char> scored(static_cast<std::size_t>(frames), 1);
  if (collar > 0.0) {
    const long long collar_ms = to_ms(collar);
    for (const auto& s : reference.segments()) {
      for (long long b : {to_ms(s.onset), to_ms(s.end())}) {
        for (long long f = first_frame_at_or_after(b - collar_ms + 1);
             f < frames && f * 10 + 5 < b + collar_ms; ++f) {
          scored[f] = 0;
        }
      }
    }
  }

  std::vector<std::vector<long long>> overlap(ref.speakers.size(),
                                              std::vector<long long>(hyp.speakers.size(), 0));
  for (std::size_t r = 0; r < ref.speakers.size(); ++r) {
    for (std::size_t h = 0; h < hyp.speakers.size(); ++h) {
      long long count = 0;
      for (long long f = 0; f < frames; ++f) {
        count += scored[f] && ref.active[r][f] && hyp.active[h][f];
      }
      overlap[r][h] = count;
    }
  }
  const auto mapping = max_weight_assignment(overlap);

  long long missed = 0, false_alarm = 0, confusion = 0, total = 0;
  for (long long f = 0; f < frames; ++f) {
    if (!scored[f]) continue;
    long long n_ref = 0, n_hyp = 0, correct = 0;
    for (const auto& a : ref.active) n_ref += a[f];
    for (const auto& a : hyp.active) n_hyp += a[f];
    for (std::size_t r = 0; r < mapping.size(); ++r) {
      if (mapping[r] >= 0 && ref.active[r][f] && hyp.active[mapping[r]][f]) ++correct;
    }
    total += n_ref;
    missed += std::max(0LL, n_ref - n_hyp);
    false_alarm += std::max(0LL, n_hyp - n_ref);
    confusion += std::min(n_ref, n_hyp) - correct;
  }
  if (total == 0) throw UndefinedRateError("reference has no scored speech");
  DerResult out;
  const double denom = static_cast<double>(total);
  out.missed = static_cast<double>(missed) / denom;
  out.false_alarm = static_cast<double>(false_alarm) / denom;
  out.confusion = static_cast<double>(confusion) / denom;
  out.der = out.missed + out.false_alarm + out.confusion;
  out.reference_seconds = denom * kFrameSeconds;
  return out;
}

WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw UndefinedRateError("WER of an empty reference");
  const std::size_t m = reference.size();
  const std::size_t n = hypothesis.size();
  // (edits, -substitutions), compared lexicographically
  using Cell = std::pair<long, long>;
  std::vector<Cell> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = {static_cast<long>(j), 0};
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = {static_cast<long>(i), 0};
    for (std::size_t j = 1; j <= n; ++j) {
      Cell diag = prev[j - 1];
      if (reference[i - 1] != hypothesis[j - 1]) diag = {diag.first + 1, diag.second - 1};
      const Cell del{prev[j].first + 1, prev[j].second};
      const Cell ins{cur[j - 1].first + 1, cur[j - 1].second};
      cur[j] = std::min({diag, del, ins});
    }
    std::swap(prev, cur);
  }
  const long edits = prev[n].first;
  const long subs = -prev[n].second;
  const long diff = static_cast<long>(m) - static_cast<long>(n);  // deletions - insertions
  WerResult out;
  out.substitutions = static_cast<std::size_t>(subs);
  out.deletions = static_cast<std::size_t>((edits - subs + diff) / 2);
  out.insertions = static_cast<std::size_t>((edits - subs - diff) / 2);
  out.reference_words = m;
  out.wer = static_cast<double>(edits) / static_cast<double>(m);
  return out;
}

std::vector<std::pair<std::string, double>> EvalReport::metrics() const {
  std::vector<std::pair<std::string, double>> out;
  if (eer) {
    out.emplace_back("eer", eer->eer);
    out.emplace_back("threshold", eer->threshold);
  }
  if (far) out.emplace_back("far", *far);
  if (der) {
    out.emplace_back("der", der->der);
    out.emplace_back("der_missed", der->missed);
    out.emplace_back("der_false_alarm", der->false_alarm);
    out.emplace_back("der_confusion", der->confusion);
  }
  if (wer) {
    out.emplace_back("wer", wer->wer);
    out.emplace_back("wer_substitutions", static_cast<double>(wer->substitutions));
    out.emplace_back("wer_deletions", static_cast<double>(wer->deletions));
    out.emplace_back("wer_insertions", static_cast<double>(wer->insertions));
  }
  if (distinctiveness_original) out.emplace_back("distinct_original", *distinctiveness_original);
  if (distinctiveness_anonymized) {
    out.emplace_back("distinct_anonymized", *distinctiveness_anonymized);
  }
  return out;
}

void write_report(std::ostream& out, const EvalReport& report) {
  if (report.eer) {
    out << "eer = " << rate(report.eer->eer) << '\n';
    out << "threshold = " << format_real(report.eer->threshold) << '\n';
  }
  if (report.far) out << "far = " << rate(*report.far) << '\n';
  if (report.der) {
    out << "der = " << rate(report.der->der) << '\n';
    out << "der_missed = " << rate(report.der->missed) << '\n';
    out << "der_false_alarm = " << rate(report.der->false_alarm) << '\n';
    out << "der_confusion = " << rate(report.der->confusion) << '\n';
    out << "der_reference_seconds = " << format_real(report.der->reference_seconds) << '\n';
  }
  if (report.wer) {
    out << "wer = " << rate(report.wer->wer) << '\n';
    out << "wer_substitutions = " << report.wer->substitutions << '\n';
    out << "wer_deletions = " << report.wer->deletions << '\n';
    out << "wer_insertions = " << report.wer->insertions << '\n';
    out << "wer_reference_words = " << report.wer->reference_words << '\n';
  }
  if (report.distinctiveness_original) {
    out << "distinct_original = " << format_real(*report.distinctiveness_original) << '\n';
  }
  if (report.distinctiveness_anonymized) {
    out << "distinct_anonymized = " << format_real(*report.distinctiveness_anonymized) << '\n';
  }
  if (report.positives + report.negatives + report.oa_pairs > 0) {
    out << "pairs_positive = " << report.positives << '\n';
    out << "pairs_negative = " << report.negatives << '\n';
    out << "pairs_oa = " << report.oa_pairs << '\n';
  }
}

}  // namespace convo_anon
