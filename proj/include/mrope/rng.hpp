#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mrope {

using Rng = std::mt19937_64;

// Recorded in every report so runs can be matched to the generator.
inline constexpr const char* kRngAlgorithm = "mt19937_64/seed_seq";

// Independent streams for one seed: stream 0 is conventionally the training
// split, stream 1 the evaluation split, higher streams are free for helpers.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

// Index drawn with probability proportional to probs[i]. probs must sum to a
// positive value; the last nonzero index absorbs rounding.
int sample_categorical(std::span<const double> probs, Rng& rng);

std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng);
std::vector<double> sample_dirichlet(std::size_t k, double concentration, Rng& rng);

}  // namespace mrope
