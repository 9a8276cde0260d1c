#pragma once

// Shared generators for the unit tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "convo_anon/embeddings.hpp"

namespace test {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n;
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  return v;
}

inline convo_anon::SpeakerVector random_speaker(std::mt19937_64& rng, std::size_t dim,
                                                const std::string& id,
                                                convo_anon::Gender g = convo_anon::Gender::female) {
  return {id, g, random_vector(rng, dim)};
}

inline convo_anon::Pool random_pool(std::mt19937_64& rng, std::size_t size, std::size_t dim,
                                    bool mixed_gender = true) {
  convo_anon::Pool pool;
  for (std::size_t k = 0; k < size; ++k) {
    const auto g = mixed_gender && k % 2 ? convo_anon::Gender::male : convo_anon::Gender::female;
    pool.vectors.push_back(random_speaker(rng, dim, "p" + std::to_string(k), g));
  }
  return pool;
}

// Plain double loop, deliberately independent of the library.
inline double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace test
