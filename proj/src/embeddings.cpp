#include "convo_anon/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "convo_anon/errors.hpp"
#include "convo_anon/kernels.hpp"

namespace convo_anon {

namespace {

constexpr double kSimilaritySlack = 1e-9;

struct Flattened {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t dim = 0;
  kernels::RowBlock block() const { return {data, rows, dim}; }
};

Flattened flatten(std::span<const SpeakerVector> vectors) {
  Flattened f;
  f.rows = vectors.size();
  f.dim = vectors.empty() ? 0 : vectors.front().dim();
  f.data.reserve(f.rows * f.dim);
  for (const auto& v : vectors) f.data.insert(f.data.end(), v.values.begin(), v.values.end());
  return f;
}

}  // namespace

char gender_code(Gender g) {
  switch (g) {
    case Gender::female: return 'F';
    case Gender::male: return 'M';
    case Gender::unknown: return 'U';
  }
  return 'U';
}

Gender parse_gender_code(std::string_view code) {
  if (code == "F" || code == "f") return Gender::female;
  if (code == "M" || code == "m") return Gender::male;
  if (code == "U" || code == "u") return Gender::unknown;
  throw ContractError("unknown gender code '" + std::string(code) + "'");
}

double SpeakerVector::norm() const {
  return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
}

std::vector<std::size_t> Pool::subgroup(Gender g) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].gender == g) idx.push_back(i);
  }
  return idx;
}

void validate_collection(std::span<const SpeakerVector> vectors) {
  if (vectors.empty()) throw EmptyCollectionError("empty vector collection");
  const std::size_t dim = vectors.front().dim();
  if (dim == 0) throw ContractError("vector '" + vectors.front().id + "' has dimension 0");
  for (const auto& v : vectors) {
    if (v.dim() != dim) {
      throw ContractError("vector '" + v.id + "' has dimension " + std::to_string(v.dim()) +
                          ", expected " + std::to_string(dim));
    }
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ContractError("vector '" + v.id + "' has zero or non-finite norm");
    }
  }
}

void validate_pool(const Pool& pool) {
  validate_collection(pool.vectors);
  std::unordered_set<std::string> seen;
  for (const auto& v : pool.vectors) {
    if (!seen.insert(v.id).second) throw ContractError("duplicate pool id '" + v.id + "'");
  }
}

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols,
                                   std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows * cols) {
    throw ContractError("similarity matrix entry count does not match its shape");
  }
  for (double e : entries_) {
    if (!(e >= -1.0 - kSimilaritySlack && e <= 1.0 + kSimilaritySlack)) {
      throw ContractError("similarity entry outside [-1, 1]");
    }
  }
}

bool SimilarityMatrix::is_symmetric(double tol) const {
  if (!is_square()) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (a.empty()) throw ContractError("zero-dimensional vector");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    ab += a[d] * b[d];
    aa += a[d] * a[d];
    bb += b[d] * b[d];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw ContractError("zero-norm vector");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double cosine(const SpeakerVector& a, const SpeakerVector& b) {
  return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

SimilarityMatrix similarity_matrix(std::span<const SpeakerVector> a,
                                   std::span<const SpeakerVector> b) {
  if (a.empty() || b.empty()) throw EmptyCollectionError("similarity matrix of empty input");
  validate_collection(a);
  validate_collection(b);
  if (a.front().dim() != b.front().dim()) {
    throw ContractError("similarity matrix inputs differ in dimension");
  }
  const Flattened fa = flatten(a);
  const Flattened fb = flatten(b);
  const auto na = kernels::row_norms(fa.block());
  const auto nb = kernels::row_norms(fb.block());
  return {a.size(), b.size(), kernels::cosine_matrix_parallel(fa.block(), na, fb.block(), nb)};
}

SimilarityMatrix similarity_matrix(std::span<const SpeakerVector> a) {
  return similarity_matrix(a, a);
}

std::vector<double> mean_of(std::span<const SpeakerVector> vectors,
                            std::span<const std::size_t> indices) {
  if (indices.empty()) throw EmptyCollectionError("mean of no vectors");
  std::vector<double> mean(vectors[indices.front()].dim(), 0.0);
  for (std::size_t idx : indices) {
    const auto& v = vectors[idx].values;
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
  }
  for (double& m : mean) m /= static_cast<double>(indices.size());
  return mean;
}

Pool protect_pool(const Pool& pool, std::size_t k_similar) {
  validate_pool(pool);
  Pool out = pool;
  for (Gender g : {Gender::female, Gender::male, Gender::unknown}) {
    const auto members = pool.subgroup(g);
    if (members.empty()) continue;
    std::vector<SpeakerVector> group;
    group.reserve(members.size());
    for (std::size_t m : members) group.push_back(pool.vectors[m]);
    const SimilarityMatrix sim = similarity_matrix(group);
    const std::size_t take = std::min(k_similar, members.size() - 1);

    for (std::size_t i = 0; i < members.size(); ++i) {
      std::vector<std::size_t> chosen{i};
      std::vector<std::size_t> others;
      others.reserve(members.size() - 1);
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (j != i) others.push_back(j);
      }
      const auto cut = others.begin() + static_cast<std::ptrdiff_t>(take);
      std::partial_sort(others.begin(), cut, others.end(), [&](std::size_t x, std::size_t y) {
        if (sim(i, x) != sim(i, y)) return sim(i, x) > sim(i, y);
        return x < y;
      });
      chosen.insert(chosen.end(), others.begin(), cut);
      out.vectors[members[i]].values = mean_of(group, chosen);
    }
  }
  for (const auto& v : out.vectors) {
    if (!(v.norm() > 0.0)) throw ContractError("protected pool vector '" + v.id + "' has zero norm");
  }
  return out;
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::vector<SpeakerVector> read_embedding_table(std::istream& in) {
  std::vector<SpeakerVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string id, gender, dim_text;
    if (!(fields >> id)) continue;  // blank line
    if (!(fields >> gender >> dim_text)) throw ParseError("truncated embedding line", line_no);
    SpeakerVector v;
    v.id = id;
    try {
      v.gender = parse_gender_code(gender);
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
    std::size_t dim = 0;
    auto [p, ec] = std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
    if (ec != std::errc{} || p != dim_text.data() + dim_text.size() || dim == 0) {
      throw ParseError("bad dimension '" + dim_text + "'", line_no);
    }
    v.values.reserve(dim);
    std::string tok;
    while (fields >> tok) {
      double x = 0.0;
      auto [q, ec2] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec2 != std::errc{} || q != tok.data() + tok.size() || !std::isfinite(x)) {
        throw ParseError("bad real '" + tok + "'", line_no);
      }
      v.values.push_back(x);
    }
    if (v.values.size() != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, got " +
                           std::to_string(v.values.size()),
                       line_no);
    }
    if (!(v.norm() > 0.0)) throw ParseError("zero vector '" + v.id + "'", line_no);
    if (!out.empty() && out.front().dim() != dim) {
      throw ParseError("dimension differs from first vector", line_no);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<SpeakerVector> read_embedding_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open embedding table '" + path + "'");
  return read_embedding_table(in);
}

void write_embedding_table(std::ostream& out, std::span<const SpeakerVector> vectors) {
  for (const auto& v : vectors) {
    out << v.id << ' ' << gender_code(v.gender) << ' ' << v.dim();
    for (double x : v.values) out << ' ' << format_real(x);
    out << '\n';
  }
}

void write_embedding_table_file(const std::string& path,
                                std::span<const SpeakerVector> vectors) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write embedding table '" + path + "'");
  write_embedding_table(out, vectors);
}

}  // namespace convo_anon
