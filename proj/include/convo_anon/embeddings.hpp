#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convo_anon {

enum class Gender { female, male, unknown };

char gender_code(Gender g);
Gender parse_gender_code(std::string_view code);

struct SpeakerVector {
  std::string id;
  Gender gender = Gender::unknown;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
};

/// External pool of pseudo-speaker candidates.
struct Pool {
  std::vector<SpeakerVector> vectors;
  std::string provenance;

  std::size_t size() const { return vectors.size(); }
  /// Indices of the pool members with gender `g`, ascending.
  std::vector<std::size_t> subgroup(Gender g) const;
};

/// Throws ContractError unless every vector has the same dimension and a
/// strictly positive norm, and EmptyCollectionError if `vectors` is empty.
void validate_collection(std::span<const SpeakerVector> vectors);
/// Collection checks plus unique ids.
void validate_pool(const Pool& pool);

/// Dense row-major matrix of cosine scores.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  SimilarityMatrix(std::size_t rows, std::size_t cols)
      : SimilarityMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * cols_, cols_};
  }
  const std::vector<double>& entries() const { return entries_; }

  bool is_square() const { return rows_ == cols_; }
  bool is_symmetric(double tol = 1e-9) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const SpeakerVector& a, const SpeakerVector& b);

/// Entry (i, j) is cosine(a[i], b[j]). Rows are computed in parallel.
SimilarityMatrix similarity_matrix(std::span<const SpeakerVector> a,
                                   std::span<const SpeakerVector> b);
SimilarityMatrix similarity_matrix(std::span<const SpeakerVector> a);

/// Replaces each pool vector by the mean of itself and its `k_similar` most
/// similar same-gender pool vectors. Neighbour ties go to the lower index.
Pool protect_pool(const Pool& pool, std::size_t k_similar = 10);

/// Embedding table: `<id> <F|M|U> <D> <v1> ... <vD>` per line, `#` comments.
std::vector<SpeakerVector> read_embedding_table(std::istream& in);
std::vector<SpeakerVector> read_embedding_table_file(const std::string& path);
void write_embedding_table(std::ostream& out, std::span<const SpeakerVector> vectors);
void write_embedding_table_file(const std::string& path,
                                std::span<const SpeakerVector> vectors);

/// Shortest text (at most 9 significant digits) used for reals in all text
/// formats of this project.
std::string format_real(double value);

std::vector<double> mean_of(std::span<const SpeakerVector> vectors,
                            std::span<const std::size_t> indices);

}  // namespace convo_anon
