#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace convo_anon {

/// Frame resolution shared by every rasterisation (diarizer output, DER).
inline constexpr double kFrameSeconds = 0.01;

struct Window {
  double onset = 0.0;
  bool active = false;
  std::vector<double> vector;

  friend bool operator==(const Window&, const Window&) = default;
};

/// Sliding-window speaker embeddings of one recording.
struct WindowedEmbeddingStream {
  std::string file_id;
  double window_length = 1.5;
  double hop = 0.75;
  std::size_t dim = 0;
  std::vector<Window> windows;

  std::size_t active_count() const;
  double center(std::size_t window) const { return windows[window].onset + window_length / 2; }
  /// Throws ContractError on an irregular grid, mismatched dimensions, or an
  /// active window with a zero vector.
  void validate() const;

  friend bool operator==(const WindowedEmbeddingStream&, const WindowedEmbeddingStream&) = default;
};

/// Header `<file_id> <window_len> <hop> <D>`, then `<onset> <0|1> <v1> ... <vD>`.
WindowedEmbeddingStream read_stream(std::istream& in);
WindowedEmbeddingStream read_stream_file(const std::string& path);
void write_stream(std::ostream& out, const WindowedEmbeddingStream& stream);
void write_stream_file(const std::string& path, const WindowedEmbeddingStream& stream);

}  // namespace convo_anon
