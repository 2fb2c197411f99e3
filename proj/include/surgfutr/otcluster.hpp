#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "surgfutr/synth.hpp"
#include "surgfutr/tensor.hpp"

namespace surgfutr {

// Token (row) and centroid (column) marginal distributions for the transport
// problem. m_c is uniform: the balanced-cluster prior keeps all K clusters
// alive.
struct Marginals {
  Tensor m_r;  // length N
  Tensor m_c;  // length K
  double temperature = 1.0;
};

// Entropic transport plan between tokens and centroid seeds, plus the hard
// row argmax used downstream for transition targets.
struct Assignment {
  Tensor plan;                    // N x K; rows sum to m_r after the final row update
  std::vector<std::size_t> hard;  // argmax centroid per token
  Tensor centroids;               // K x d seeds
};

struct StateVector {
  Tensor z;  // K x d, z = plan^T * features
  Assignment assignment;
};

// Column-sums the row-stochastic attention matrix (mass received per token),
// tempers and normalizes into a distribution over tokens.
Tensor attention_marginals(const Tensor& attention, double temperature);
Tensor attention_marginals(const TokenBatch& batch, double temperature);

Tensor uniform_distribution(std::size_t k);

// Deterministic top-K tokens by marginal mass, ties broken by lower index.
std::vector<std::size_t> select_centroid_indices(const Tensor& m_r, std::size_t k);
// Seedable stochastic alternative: samples K distinct tokens with probability
// proportional to m_r.
std::vector<std::size_t> sample_centroid_indices(const Tensor& m_r, std::size_t k,
                                                 std::mt19937_64& rng);

// Log-domain Sinkhorn scaling on cost -F*C^T with entropic weight 1/lambda.
// Iterations alternate column and row matching and end on a row update, so
// plan row sums equal m_r exactly; column sums approach m_c as iterations
// grow. Differentiable w.r.t. features and centroids.
Assignment sinkhorn_cluster(const Tensor& features, const Tensor& centroids,
                            const Marginals& marginals, double lambda, int iterations);

// z = plan^T * features (Eq. identity, exact).
Tensor aggregate_state(const Tensor& features, const Assignment& assignment);

// Worst-case feasibility violation of the plan against (m_r, m_c).
double marginal_violation(const Assignment& assignment, const Marginals& marginals);

// Debiased entropic OT divergence between two discrete distributions on a
// shared support with the given ground cost: OT_eps(p,q) - (OT_eps(p,p) +
// OT_eps(q,q))/2, eps = blur^2. Uses epsilon scaling from the cost scale down
// to eps. Differentiable w.r.t. p and q.
Tensor entropic_emd(const Tensor& p, const Tensor& q, const Tensor& cost, double blur,
                    int final_iterations = 100);

}  // namespace surgfutr
