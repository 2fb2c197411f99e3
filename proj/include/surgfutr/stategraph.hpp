#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "surgfutr/optim.hpp"
#include "surgfutr/tensor.hpp"

namespace surgfutr {

struct GraphConfig {
  std::size_t in_dim = 384;   // d
  std::size_t hidden = 256;   // d1
  double tau1 = 0.05;
  double theta = 0.02;
  std::size_t heads = 4;
  double leaky_slope = 0.2;
};

// Binary K x K adjacency from projected, L2-normalized node features:
// row-softmax of -pairwise distance / tau1, thresholded at theta, self-loops
// forced on.
std::vector<std::uint8_t> build_adjacency(const Tensor& projected, double tau1,
                                          double theta);

// Single multi-head GATv2 layer; heads are averaged so the feature dimension
// is preserved.
class GatV2Layer {
 public:
  GatV2Layer() = default;
  GatV2Layer(std::size_t dim, std::size_t heads, double leaky_slope,
             std::mt19937_64& rng);

  Tensor forward(const Tensor& h, const std::vector<std::uint8_t>& adjacency) const;

  void collect_params(const std::string& prefix, ParamMap& out) const;
  void adopt_params(const std::string& prefix, const ParamMap& in);

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 0;
  double leaky_slope_ = 0.2;
  std::vector<Tensor> w_left_, w_right_;  // per head, dim x dim
  std::vector<Tensor> attn_vec_;          // per head, dim x 1
};

// Projection phi1 (d -> d1) followed by adjacency construction and one GATv2
// layer over the centroids.
class StateGraphModule {
 public:
  StateGraphModule() = default;
  StateGraphModule(const GraphConfig& cfg, std::mt19937_64& rng);

  // z: K x d centroid features -> refined K x d1 features.
  Tensor forward(const Tensor& z) const;
  Tensor project(const Tensor& z) const;

  const GraphConfig& config() const { return cfg_; }
  void collect_params(const std::string& prefix, ParamMap& out) const;
  void adopt_params(const std::string& prefix, const ParamMap& in);

 private:
  GraphConfig cfg_;
  Tensor w_proj_;  // d x d1
  Tensor b_proj_;  // d1
  GatV2Layer gat_;
};

}  // namespace surgfutr
