#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "surgfutr/stategraph.hpp"
#include "surgfutr/tensor.hpp"

namespace surgfutr {

// Cosine affinity between patches of the current and future clips:
// A[i,j] = <a_i / |a_i|, b_j / |b_j|>. Inputs are N x d row-major.
std::vector<double> patch_affinity(const std::vector<double>& current,
                                   const std::vector<double>& future, std::size_t n,
                                   std::size_t d);

// Teacher transition targets: per patch, softmax over its top-k affinities,
// scattering weight from the patch's current centroid to the matched
// patches' future centroids; rows normalized, zero-mass rows fall back to
// uniform. hard_current/hard_future are argmax centroid ids per patch.
std::vector<double> build_transition_matrix(const std::vector<std::size_t>& hard_current,
                                            const std::vector<std::size_t>& hard_future,
                                            const std::vector<double>& affinity,
                                            std::size_t n, std::size_t k,
                                            std::size_t top_k);

struct ActDynConfig {
  std::size_t top_k = 3;
  std::size_t depth = 4;
  std::size_t heads = 4;
  double alpha = 1.0;  // self-retention in the propagation update
  double tau1 = 0.05;
  double theta = 0.02;
};

// Predicts the K x K transition matrix from current centroid features via a
// GATv2 stack and a bilinear pair score, then propagates centroids forward.
class ActDynModule {
 public:
  ActDynModule() = default;
  ActDynModule(const ActDynConfig& cfg, std::size_t in_dim, std::size_t hidden,
               std::mt19937_64& rng);

  // z: K x d -> row-stochastic K x K.
  Tensor predict_transitions(const Tensor& z) const;

  const ActDynConfig& config() const { return cfg_; }
  void collect_params(const std::string& prefix, ParamMap& out) const;
  void adopt_params(const std::string& prefix, const ParamMap& in);

 private:
  ActDynConfig cfg_;
  Tensor w_proj_, b_proj_;          // d -> hidden
  std::vector<GatV2Layer> layers_;  // depth x (GATv2 + ReLU except last)
  Tensor w_bilinear_;               // hidden x hidden
};

// (Q + alpha*I) * z, exact.
Tensor propagate_centroids(const Tensor& z, const Tensor& transition, double alpha);

}  // namespace surgfutr
