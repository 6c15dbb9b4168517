#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "trajselect/corpus.hpp"

namespace trajselect {

// Frozen stand-in for the sampler LLM: a fixed-random embedding table plus a
// tanh recurrence. Parameters are a pure function of (seed, vocab, dim) and
// are never mutated after creation.
struct SamplerParams {
  int vocab_size = 0;
  int d_sampler = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd embedding;  // vocab_size x d_sampler, entries in (-1, 1)
  Eigen::MatrixXd mix;        // d_sampler x d_sampler
};

SamplerParams make_sampler(std::uint64_t seed, int vocab_size, int d_sampler);

// h_0 = embed(t_0); h_i = tanh(mix * h_{i-1} + embed(t_i)).
std::vector<Eigen::VectorXd> encode(const SamplerParams& sampler,
                                    const std::vector<int>& token_ids);

struct SynthConfig {
  int n_queries = 500;
  int candidates_per_query = 8;
  int steps_min = 3;
  int steps_max = 8;
  double signal_strength = 1.0;
  double noise_std = 0.5;
  double base_correct_rate = 0.5;
  int d_sampler = 32;
  int vocab_size = 4096;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

// The unit direction carrying the planted correctness signal.
Eigen::VectorXd signal_direction(const SynthConfig& cfg);

// Generates n_queries x candidates_per_query trajectories. Each candidate's
// label y is Bernoulli(base_correct_rate); its boxed answer is constructed so
// label_outcome agrees with y. Step-final hidden states get their coordinate
// along the signal direction replaced by signal_strength*(2y-1) plus Gaussian
// noise, so a noiseless corpus is exactly separable by a threshold on that
// coordinate. All randomness is keyed by (seed, purpose, indices) and the
// output is bit-identical across runs.
Corpus generate_corpus(const SynthConfig& cfg);

}  // namespace trajselect
