#include "convo_anon/stream.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "convo_anon/embeddings.hpp"
#include "convo_anon/errors.hpp"

namespace convo_anon {

namespace {

double parse_real(const std::string& tok, std::size_t line) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(x)) {
    throw ParseError("bad real '" + tok + "'", line);
  }
  return x;
}

}  // namespace

std::size_t WindowedEmbeddingStream::active_count() const {
  std::size_t n = 0;
  for (const auto& w : windows) n += w.active ? 1 : 0;
  return n;
}

void WindowedEmbeddingStream::validate() const {
  if (!(hop > 0.0) || window_length < hop) {
    throw ContractError("stream needs 0 < hop <= window_length");
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].vector.size() != dim) {
      throw ContractError("window " + std::to_string(i) + " has the wrong dimension");
    }
    if (i > 0 && std::abs(windows[i].onset - windows[i - 1].onset - hop) > 1e-6) {
      throw ContractError("window onsets are not spaced by the hop");
    }
    if (windows[i].active) {
      double n2 = 0.0;
      for (double v : windows[i].vector) n2 += v * v;
      if (!(n2 > 0.0)) throw ContractError("active window " + std::to_string(i) + " is zero");
    }
  }
}

WindowedEmbeddingStream read_stream(std::istream& in) {
  WindowedEmbeddingStream s;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (!header) {
      if (tok.size() != 4) throw ParseError("stream header needs 4 fields", line_no);
      s.file_id = tok[0];
      s.window_length = parse_real(tok[1], line_no);
      s.hop = parse_real(tok[2], line_no);
      s.dim = static_cast<std::size_t>(parse_real(tok[3], line_no));
      header = true;
      continue;
    }
    if (tok.size() != s.dim + 2) throw ParseError("window line has the wrong field count", line_no);
    Window w;
    w.onset = parse_real(tok[0], line_no);
    if (tok[1] != "0" && tok[1] != "1") throw ParseError("active flag must be 0 or 1", line_no);
    w.active = tok[1] == "1";
    w.vector.reserve(s.dim);
    for (std::size_t d = 0; d < s.dim; ++d) w.vector.push_back(parse_real(tok[d + 2], line_no));
    s.windows.push_back(std::move(w));
  }
  if (!header) throw ParseError("missing stream header", line_no);
  try {
    s.validate();
  } catch (const ContractError& e) {
    throw ParseError(e.what(), line_no);
  }
  return s;
}

WindowedEmbeddingStream read_stream_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open stream '" + path + "'");
  return read_stream(in);
}

void write_stream(std::ostream& out, const WindowedEmbeddingStream& stream) {
  out << stream.file_id << ' ' << format_real(stream.window_length) << ' '
      << format_real(stream.hop) << ' ' << stream.dim << '\n';
  for (const auto& w : stream.windows) {
    out << format_real(w.onset) << ' ' << (w.active ? 1 : 0);
    for (double v : w.vector) out << ' ' << format_real(v);
    out << '\n';
  }
}

void write_stream_file(const std::string& path, const WindowedEmbeddingStream& stream) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write stream '" + path + "'");
  write_stream(out, stream);
}

}  // namespace convo_anon
