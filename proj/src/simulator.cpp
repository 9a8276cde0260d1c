#include "convo_anon/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "convo_anon/errors.hpp"
#include "convo_anon/random.hpp"

namespace convo_anon {

namespace {

constexpr int kMaxCentroidDraws = 10'000;
constexpr std::uint64_t kStreamNoise = 1;
constexpr std::uint64_t kPlanNoise = 2;
constexpr std::uint64_t kCutNoise = 3;

struct Interval {
  double lo;
  double hi;
};

std::vector<double> unit(std::vector<double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return v;
}

std::vector<double> gaussian_unit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  do {
    for (double& x : v) x = normal(rng);
  } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  return unit(std::move(v));
}

double uniform(Rng& rng, Range r) {
  if (r.first == r.second) return r.first;
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

std::vector<Interval> union_of(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, i.hi);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

double covered(const std::vector<Interval>& sorted_union, double lo, double hi) {
  double total = 0.0;
  for (const auto& i : sorted_union) {
    if (i.lo >= hi) break;
    total += std::max(0.0, std::min(hi, i.hi) - std::max(lo, i.lo));
  }
  return total;
}

// Parts of [lo, hi) outside the sorted disjoint `cut`.
std::vector<Interval> subtract(double lo, double hi, const std::vector<Interval>& cut) {
  std::vector<Interval> out;
  double at = lo;
  for (const auto& c : cut) {
    if (c.hi <= at) continue;
    if (c.lo >= hi) break;
    if (c.lo > at) out.push_back({at, c.lo});
    at = std::max(at, c.hi);
  }
  if (at < hi) out.push_back({at, hi});
  return out;
}

std::string conversation_id(const SimulationConfig& cfg, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", index);
  return cfg.id_prefix + buf;
}

std::map<std::string, std::vector<double>> voices_of(const std::vector<SpeakerVector>& vectors) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& v : vectors) out[v.id] = v.values;
  return out;
}

std::vector<bool> activity_of(const WindowedEmbeddingStream& stream) {
  std::vector<bool> out;
  for (const auto& w : stream.windows) out.push_back(w.active);
  return out;
}

void check_range(const Range& r, const char* name, double lo, double hi) {
  if (!(r.first <= r.second) || r.first < lo || r.second > hi) {
    throw ConfigError(std::string(name) + " is empty or outside its domain");
  }
}

}  // namespace

void SimulationConfig::validate() const {
  if (n_speakers == 0) throw ConfigError("n_speakers must be at least 1");
  if (n_conversations == 0) throw ConfigError("n_conversations must be at least 1");
  check_range(duration_range, "duration range", 1e-3, 1e6);
  check_range(turn_duration_range, "turn duration range", 1e-3, 1e6);
  check_range(gap_range, "gap range", 0.0, 1e6);
  check_range(overlap_duration_range, "overlap duration range", 0.0, 1e6);
  check_range(overlap_mix_weight_range, "overlap mix weight range", 0.0, 1.0);
  if (!(target_speech_ratio > 0.0 && target_speech_ratio <= 1.0)) {
    throw ConfigError("speech ratio must lie in (0, 1]");
  }
  if (!(overlap_probability >= 0.0 && overlap_probability <= 1.0)) {
    throw ConfigError("overlap probability must lie in [0, 1]");
  }
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be at least 1");
  if (!(centroid_min_angle >= 0.0 && centroid_min_angle <= 180.0)) {
    throw ConfigError("centroid_min_angle must lie in [0, 180] degrees");
  }
  if (!(window_noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (!(hop > 0.0) || window_length < hop) throw ConfigError("need 0 < hop <= window_length");
  if (genders.empty() || genders.find_first_not_of("FMU") != std::string::npos) {
    throw ConfigError("genders must be a non-empty string over F, M, U");
  }
  if (!(words_per_second > 0.0) || vocabulary == 0) throw ConfigError("bad transcript settings");
}

SimulationConfig take_simulation_config(KeyValues& kv, SimulationConfig cfg) {
  auto count = [&](const char* key, std::size_t& field) {
    if (auto v = kv.take_count(key)) field = static_cast<std::size_t>(*v);
  };
  auto real = [&](const char* key, double& field) {
    if (auto v = kv.take_real(key)) field = *v;
  };
  count("n_speakers", cfg.n_speakers);
  count("n_conversations", cfg.n_conversations);
  real("duration_min", cfg.duration_range.first);
  real("duration_max", cfg.duration_range.second);
  real("turn_min", cfg.turn_duration_range.first);
  real("turn_max", cfg.turn_duration_range.second);
  real("speech_ratio", cfg.target_speech_ratio);
  real("gap_min", cfg.gap_range.first);
  real("gap_max", cfg.gap_range.second);
  real("overlap_probability", cfg.overlap_probability);
  real("overlap_min", cfg.overlap_duration_range.first);
  real("overlap_max", cfg.overlap_duration_range.second);
  real("mix_weight_min", cfg.overlap_mix_weight_range.first);
  real("mix_weight_max", cfg.overlap_mix_weight_range.second);
  count("embedding_dim", cfg.embedding_dim);
  real("centroid_min_angle", cfg.centroid_min_angle);
  real("noise_sigma", cfg.window_noise_sigma);
  real("window_length", cfg.window_length);
  real("hop", cfg.hop);
  if (auto v = kv.take_string("genders")) cfg.genders = *v;
  real("words_per_second", cfg.words_per_second);
  count("vocabulary", cfg.vocabulary);
  if (auto v = kv.take_string("id_prefix")) cfg.id_prefix = *v;
  if (auto v = kv.take_count("seed")) cfg.seed = *v;
  cfg.validate();
  return cfg;
}

SimulationConfig parse_simulation_config(std::istream& in, SimulationConfig base) {
  KeyValues kv = KeyValues::parse(in);
  auto cfg = take_simulation_config(kv, std::move(base));
  kv.expect_consumed();
  return cfg;
}

SimulationConfig read_simulation_config_file(const std::string& path, SimulationConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_simulation_config(in, std::move(base));
}

void write_simulation_config(std::ostream& out, const SimulationConfig& cfg) {
  out << "n_speakers = " << cfg.n_speakers << '\n'
      << "n_conversations = " << cfg.n_conversations << '\n'
      << "duration_min = " << format_real(cfg.duration_range.first) << '\n'
      << "duration_max = " << format_real(cfg.duration_range.second) << '\n'
      << "turn_min = " << format_real(cfg.turn_duration_range.first) << '\n'
      << "turn_max = " << format_real(cfg.turn_duration_range.second) << '\n'
      << "speech_ratio = " << format_real(cfg.target_speech_ratio) << '\n'
      << "gap_min = " << format_real(cfg.gap_range.first) << '\n'
      << "gap_max = " << format_real(cfg.gap_range.second) << '\n'
      << "overlap_probability = " << format_real(cfg.overlap_probability) << '\n'
      << "overlap_min = " << format_real(cfg.overlap_duration_range.first) << '\n'
      << "overlap_max = " << format_real(cfg.overlap_duration_range.second) << '\n'
      << "mix_weight_min = " << format_real(cfg.overlap_mix_weight_range.first) << '\n'
      << "mix_weight_max = " << format_real(cfg.overlap_mix_weight_range.second) << '\n'
      << "embedding_dim = " << cfg.embedding_dim << '\n'
      << "centroid_min_angle = " << format_real(cfg.centroid_min_angle) << '\n'
      << "noise_sigma = " << format_real(cfg.window_noise_sigma) << '\n'
      << "window_length = " << format_real(cfg.window_length) << '\n'
      << "hop = " << format_real(cfg.hop) << '\n'
      << "genders = " << cfg.genders << '\n'
      << "words_per_second = " << format_real(cfg.words_per_second) << '\n'
      << "vocabulary = " << cfg.vocabulary << '\n'
      << "id_prefix = " << cfg.id_prefix << '\n'
      << "seed = " << cfg.seed << '\n';
}

double GroundTruth::speech_ratio() const {
  std::vector<Interval> spans;
  for (const auto& s : rttm.segments()) spans.push_back({s.onset, s.end()});
  const auto u = union_of(spans);
  return duration > 0.0 ? covered(u, 0.0, duration) / duration : 0.0;
}

std::vector<std::string> GroundTruth::words() const { return transcript_words(transcript); }

WindowedEmbeddingStream render_stream(const std::string& file_id, double duration,
                                      const std::vector<Segment>& segments,
                                      const std::map<std::string, std::vector<double>>& voices,
                                      const std::vector<OverlapMix>& mixes, double noise_sigma,
                                      double window_length, double hop, std::uint64_t seed,
                                      const std::vector<bool>& activity) {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> unit_voices;
  for (const auto& [name, v] : voices) {
    dim = v.size();
    unit_voices[name] = unit(v);
  }
  std::map<std::string, std::vector<Interval>> by_speaker;
  std::vector<Interval> all;
  for (const auto& s : segments) {
    if (!voices.count(s.speaker)) throw NotFoundError("no voice for speaker '" + s.speaker + "'");
    by_speaker[s.speaker].push_back({s.onset, s.end()});
    all.push_back({s.onset, s.end()});
  }
  for (auto& [name, spans] : by_speaker) spans = union_of(std::move(spans));
  const auto speech = union_of(all);

  WindowedEmbeddingStream stream;
  stream.file_id = file_id;
  stream.window_length = window_length;
  stream.hop = hop;
  stream.dim = dim;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

  // Full windows only, as a sliding extractor would emit; always at least one.
  const auto window_count = static_cast<std::size_t>(
      std::max(0.0, std::floor((duration - window_length) / hop + 1e-9)) + 1);
  for (std::size_t k = 0; k < window_count; ++k) {
    Window w;
    w.onset = static_cast<double>(k) * hop;
    const double lo = w.onset;
    const double hi = std::min(duration, w.onset + window_length);
    const double center = w.onset + window_length / 2;
    w.vector.assign(dim, 0.0);
    // Activity is judged on the hop-wide cell the window owns once rasterized.
    const double cell_lo = std::max(0.0, center - hop / 2);
    const double cell_hi = std::min(duration, center + hop / 2);
    w.active = activity.empty() ? covered(speech, cell_lo, cell_hi) >= 0.5 * (cell_hi - cell_lo)
                                : activity.at(k);

    const OverlapMix* mix = nullptr;
    for (const auto& m : mixes) {
      if (center >= m.onset && center < m.onset + m.duration && unit_voices.count(m.first) &&
          unit_voices.count(m.second)) {
        mix = &m;
        break;
      }
    }
    std::vector<std::pair<const std::string*, double>> weights;
    if (mix) {
      weights = {{&mix->first, mix->alpha}, {&mix->second, 1.0 - mix->alpha}};
    } else {
      for (const auto& [name, spans] : by_speaker) {
        const double c = covered(spans, lo, hi);
        if (c > 0.0) weights.emplace_back(&name, c);
      }
    }
    if (!w.active || weights.empty()) {
      w.active = false;
      stream.windows.push_back(std::move(w));
      continue;
    }
    if (weights.size() == 1 && noise_sigma == 0.0) {
      w.vector = voices.at(*weights.front().first);
    } else {
      for (const auto& [name, weight] : weights) {
        const auto& v = unit_voices.at(*name);
        for (std::size_t d = 0; d < dim; ++d) w.vector[d] += weight * v[d];
      }
      w.vector = unit(std::move(w.vector));
      if (noise_sigma > 0.0) {
        for (double& x : w.vector) x += noise(rng);
        w.vector = unit(std::move(w.vector));
      }
    }
    stream.windows.push_back(std::move(w));
  }
  return stream;
}

GroundTruth simulate_conversation(const SimulationConfig& cfg, std::size_t index) {
  cfg.validate();
  GroundTruth gt;
  gt.seed = derive_seed(cfg.seed, index);
  gt.noise_sigma = cfg.window_noise_sigma;
  Rng rng(gt.seed);
  const std::string id = conversation_id(cfg, index);
  const std::size_t n = cfg.n_speakers;

  // Identities with a minimum pairwise angle.
  const double max_cos = std::cos(cfg.centroid_min_angle * std::numbers::pi / 180.0);
  int draws = 0;
  for (std::size_t s = 0; s < n; ++s) {
    while (true) {
      if (++draws > kMaxCentroidDraws) {
        throw ConfigError("cannot place " + std::to_string(n) + " centroids " +
                          std::to_string(cfg.centroid_min_angle) + " degrees apart");
      }
      auto v = gaussian_unit(cfg.embedding_dim, rng);
      const bool ok = std::all_of(gt.speaker_vectors.begin(), gt.speaker_vectors.end(),
                                  [&](const SpeakerVector& o) {
                                    return std::inner_product(v.begin(), v.end(),
                                                              o.values.begin(), 0.0) <=
                                           max_cos + 1e-12;
                                  });
      if (ok) {
        gt.speaker_vectors.push_back({id + "_s" + std::to_string(s),
                                      parse_gender_code(std::string(1, cfg.genders[s % cfg.genders.size()])),
                                      std::move(v)});
        break;
      }
    }
  }

  // Turn sequence: round robin with a fresh permutation per cycle.
  const double target = round_to_ms(uniform(rng, cfg.duration_range));
  const double mean_turn = (cfg.turn_duration_range.first + cfg.turn_duration_range.second) / 2;
  const double mean_gap = mean_turn * (1.0 - cfg.target_speech_ratio) / cfg.target_speech_ratio;
  struct Turn {
    std::size_t speaker;
    double onset;
    double end;
  };
  std::vector<Turn> turns;
  std::vector<std::size_t> cycle(n);
  bool first_cycle_done = false;
  while (!first_cycle_done || turns.back().end < target) {
    std::iota(cycle.begin(), cycle.end(), std::size_t{0});
    std::shuffle(cycle.begin(), cycle.end(), rng);
    if (n > 1 && !turns.empty() && cycle.front() == turns.back().speaker) {
      std::rotate(cycle.begin(), cycle.begin() + 1, cycle.end());
    }
    for (std::size_t s : cycle) {
      const double d = uniform(rng, cfg.turn_duration_range);
      double onset = 0.0;
      if (!turns.empty()) {
        const Turn& prev = turns.back();
        const bool overlap = cfg.overlap_probability > 0.0 &&
                             std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
                                 cfg.overlap_probability;
        if (overlap) {
          const double o = std::min(uniform(rng, cfg.overlap_duration_range),
                                    0.5 * std::min(prev.end - prev.onset, d));
          onset = prev.end - o;
        } else {
          const double g = mean_gap > 0.0 ? std::uniform_real_distribution<double>(
                                                0.0, 2.0 * mean_gap)(rng)
                                          : 0.0;
          onset = prev.end + std::clamp(g, cfg.gap_range.first, cfg.gap_range.second);
        }
      }
      turns.push_back({s, onset, onset + d});
      if (first_cycle_done && turns.back().end >= target) break;
    }
    first_cycle_done = true;
  }

  // Stretch to the drawn duration and snap to milliseconds.
  const double scale = target / turns.back().end;
  std::vector<Segment> segments;
  for (const auto& t : turns) {
    const double onset = round_to_ms(t.onset * scale);
    const double end = round_to_ms(t.end * scale);
    if (end > onset) {
      segments.push_back({onset, round_to_ms(end - onset), gt.speaker_vectors[t.speaker].id});
    }
  }
  gt.duration = target;
  gt.rttm = RttmDocument(id, segments);

  for (const auto& region : find_overlaps(gt.rttm)) {
    OverlapMix mix;
    mix.onset = region.onset;
    mix.duration = region.duration;
    double first_onset = 0.0;
    bool have_first = false;
    for (const auto& s : gt.rttm.segments()) {
      if (s.onset < region.end() && s.end() > region.onset) {
        if (!have_first || s.onset < first_onset) {
          mix.second = have_first ? mix.first : mix.second;
          mix.first = s.speaker;
          first_onset = s.onset;
          have_first = true;
        } else if (mix.second.empty() && s.speaker != mix.first) {
          mix.second = s.speaker;
        }
      }
    }
    mix.alpha = uniform(rng, cfg.overlap_mix_weight_range);
    gt.overlaps.push_back(std::move(mix));
  }

  std::uniform_int_distribution<std::size_t> vocab(0, cfg.vocabulary - 1);
  for (const auto& s : gt.rttm.segments()) {
    TranscriptLine line{s, {}};
    const auto count = std::max<long long>(1, std::llround(s.duration * cfg.words_per_second));
    for (long long w = 0; w < count; ++w) line.words.push_back("w" + std::to_string(vocab(rng)));
    gt.transcript.push_back(std::move(line));
  }

  gt.stream = render_stream(id, gt.duration, gt.rttm.segments(), voices_of(gt.speaker_vectors),
                            gt.overlaps, cfg.window_noise_sigma, cfg.window_length, cfg.hop,
                            derive_seed(gt.seed, kStreamNoise));
  return gt;
}

std::vector<GroundTruth> simulate(const SimulationConfig& cfg) {
  cfg.validate();
  std::vector<GroundTruth> out(cfg.n_conversations);
  const auto count = static_cast<std::ptrdiff_t>(cfg.n_conversations);
  std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[i] = simulate_conversation(cfg, static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw ConfigError(e);
  }
  return out;
}

GroundTruth apply_plan(const GroundTruth& gt, const AnonymizationPlan& plan) {
  if (plan.assignments.size() != gt.speaker_vectors.size()) {
    throw NotFoundError("plan covers " + std::to_string(plan.assignments.size()) + " of " +
                        std::to_string(gt.speaker_vectors.size()) + " speakers");
  }
  GroundTruth out = gt;
  for (const auto& a : plan.assignments) {
    if (a.speaker >= out.speaker_vectors.size()) throw NotFoundError("plan speaker out of range");
    out.speaker_vectors[a.speaker].values = a.vector.values;
  }
  out.stream = render_stream(gt.rttm.file_id(), gt.duration, gt.rttm.segments(),
                             voices_of(out.speaker_vectors), gt.overlaps, gt.noise_sigma,
                             gt.stream.window_length, gt.stream.hop,
                             derive_seed(gt.seed, kPlanNoise), activity_of(gt.stream));
  return out;
}

GroundTruth apply_plan_with_segmentation(const GroundTruth& gt, const RttmDocument& segmentation,
                                         const std::map<std::string, std::vector<double>>& pseudo) {
  std::vector<Interval> seg_spans;
  std::vector<Segment> segments;
  for (const auto& s : segmentation.segments()) {
    if (!pseudo.count(s.speaker)) throw NotFoundError("no pseudo-voice for '" + s.speaker + "'");
    seg_spans.push_back({s.onset, s.end()});
    segments.push_back(s);
  }
  const auto covered_by_segmentation = union_of(seg_spans);
  for (const auto& s : gt.rttm.segments()) {
    for (const auto& part : subtract(s.onset, s.end(), covered_by_segmentation)) {
      segments.push_back({part.lo, part.hi - part.lo, s.speaker});
    }
  }
  auto voices = voices_of(gt.speaker_vectors);
  for (const auto& [name, v] : pseudo) {
    if (voices.count(name)) throw ContractError("pseudo speaker label clashes with '" + name + "'");
    voices[name] = v;
  }
  GroundTruth out = gt;
  out.stream = render_stream(gt.rttm.file_id(), gt.duration, segments, voices, {},
                             gt.noise_sigma, gt.stream.window_length, gt.stream.hop,
                             derive_seed(gt.seed, kPlanNoise), activity_of(gt.stream));
  return out;
}

GroundTruth remove_overlaps(const GroundTruth& gt) {
  const auto regions = find_overlaps(gt.rttm);
  if (regions.empty()) return gt;
  std::vector<Interval> cut;
  for (const auto& r : regions) cut.push_back({r.onset, r.end()});

  // Time after removing every cut region before t (regions collapse to a point).
  auto shift = [&](double t) {
    double removed = 0.0;
    for (const auto& c : cut) {
      if (c.lo >= t) break;
      removed += std::min(t, c.hi) - c.lo;
    }
    return round_to_ms(t - removed);
  };
  auto inside_cut = [&](double t) {
    return std::any_of(cut.begin(), cut.end(), [&](const Interval& c) { return t >= c.lo && t < c.hi; });
  };

  GroundTruth out = gt;
  out.overlaps.clear();
  std::vector<Segment> segments;
  out.transcript.clear();
  for (const auto& line : gt.transcript) {
    const Segment& s = line.segment;
    const double onset = shift(s.onset);
    const double end = shift(s.end());
    if (!(end > onset)) continue;
    TranscriptLine kept{{onset, round_to_ms(end - onset), s.speaker}, {}};
    const double step = s.duration / static_cast<double>(line.words.size());
    for (std::size_t w = 0; w < line.words.size(); ++w) {
      if (!inside_cut(s.onset + (static_cast<double>(w) + 0.5) * step)) kept.words.push_back(line.words[w]);
    }
    segments.push_back(kept.segment);
    out.transcript.push_back(std::move(kept));
  }
  out.rttm = RttmDocument(gt.rttm.file_id(), segments);
  std::stable_sort(out.transcript.begin(), out.transcript.end(),
                   [](const TranscriptLine& a, const TranscriptLine& b) {
                     if (a.segment.onset != b.segment.onset) return a.segment.onset < b.segment.onset;
                     return a.segment.speaker < b.segment.speaker;
                   });
  out.duration = shift(gt.duration);
  out.stream = render_stream(gt.rttm.file_id(), out.duration, segments,
                             voices_of(gt.speaker_vectors), {}, gt.noise_sigma,
                             gt.stream.window_length, gt.stream.hop,
                             derive_seed(gt.seed, kCutNoise));
  return out;
}

std::vector<double> shuffle_overlap_windows(std::span<const double> samples,
                                            const OverlapRegion& region, double window,
                                            double sample_rate, std::uint64_t seed) {
  if (!(sample_rate > 0.0) || !(window > 0.0)) {
    throw ContractError("window and sample rate must be positive");
  }
  const long long start = std::llround(region.onset * sample_rate);
  const long long stop = std::llround(region.end() * sample_rate);
  if (start < 0 || stop < start || stop > static_cast<long long>(samples.size())) {
    throw BoundsError("overlap region lies outside the sample buffer");
  }
  std::vector<double> out(samples.begin(), samples.end());
  const long long block = std::max(1LL, std::llround(window * sample_rate));
  const auto blocks = static_cast<std::size_t>((stop - start) / block);
  if (blocks < 2) return out;
  std::vector<std::size_t> order(blocks);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto src = samples.begin() + start + static_cast<long long>(order[b]) * block;
    std::copy(src, src + block, out.begin() + start + static_cast<long long>(b) * block);
  }
  return out;
}

Pool make_pool(std::size_t size, std::size_t dim, std::uint64_t seed) {
  Pool pool;
  pool.provenance = "synthetic:seed=" + std::to_string(seed);
  Rng rng(seed);
  for (std::size_t k = 0; k < size; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pool%04zu", k);
    pool.vectors.push_back({buf, k % 2 == 0 ? Gender::female : Gender::male,
                            gaussian_unit(dim, rng)});
  }
  return pool;
}

void write_transcript(std::ostream& out, const std::vector<TranscriptLine>& lines) {
  char buf[64];
  for (const auto& line : lines) {
    std::snprintf(buf, sizeof buf, "%.3f %.3f ", line.segment.onset, line.segment.duration);
    out << buf << line.segment.speaker;
    for (const auto& w : line.words) out << ' ' << w;
    out << '\n';
  }
}

std::vector<TranscriptLine> read_transcript(std::istream& in) {
  std::vector<TranscriptLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    TranscriptLine t;
    if (!(fields >> t.segment.onset >> t.segment.duration >> t.segment.speaker)) {
      throw ParseError("transcript line needs onset, duration and speaker", line_no);
    }
    for (std::string w; fields >> w;) t.words.push_back(w);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> transcript_words(const std::vector<TranscriptLine>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.insert(out.end(), l.words.begin(), l.words.end());
  return out;
}

void write_ground_truth(const std::string& dir, const GroundTruth& gt) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string base = (fs::path(dir) / gt.rttm.file_id()).string();
  write_rttm_file(base + ".rttm", gt.rttm);
  write_stream_file(base + ".stream", gt.stream);
  write_embedding_table_file(base + ".spk", gt.speaker_vectors);
  {
    std::ofstream out(base + ".txt");
    write_transcript(out, gt.transcript);
  }
  std::ofstream meta(base + ".meta");
  meta << "duration = " << format_real(gt.duration) << '\n'
       << "noise_sigma = " << format_real(gt.noise_sigma) << '\n'
       << "seed = " << gt.seed << '\n';
  for (std::size_t i = 0; i < gt.overlaps.size(); ++i) {
    const auto& m = gt.overlaps[i];
    meta << "overlap" << i << " = " << format_real(m.onset) << ' ' << format_real(m.duration)
         << ' ' << m.first << ' ' << m.second << ' ' << format_real(m.alpha) << '\n';
  }
}

GroundTruth read_ground_truth(const std::string& dir, const std::string& id) {
  namespace fs = std::filesystem;
  const std::string base = (fs::path(dir) / id).string();
  GroundTruth gt;
  gt.rttm = read_rttm_file(base + ".rttm");
  gt.stream = read_stream_file(base + ".stream");
  gt.speaker_vectors = read_embedding_table_file(base + ".spk");
  {
    std::ifstream in(base + ".txt");
    if (!in) throw NotFoundError("missing transcript for '" + id + "'");
    gt.transcript = read_transcript(in);
  }
  KeyValues meta = KeyValues::read_file(base + ".meta");
  gt.duration = meta.take_real("duration").value_or(gt.rttm.span_end());
  gt.noise_sigma = meta.take_real("noise_sigma").value_or(0.0);
  gt.seed = meta.take_count("seed").value_or(0);
  for (std::size_t i = 0;; ++i) {
    auto text = meta.take_string("overlap" + std::to_string(i));
    if (!text) break;
    std::istringstream fields(*text);
    OverlapMix m;
    if (!(fields >> m.onset >> m.duration >> m.first >> m.second >> m.alpha)) {
      throw ParseError("bad overlap record in '" + id + ".meta'", i + 1);
    }
    gt.overlaps.push_back(std::move(m));
  }
  meta.expect_consumed();
  return gt;
}

}  // namespace convo_anon
