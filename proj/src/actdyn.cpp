#include "surgfutr/actdyn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surgfutr {

std::vector<double> patch_affinity(const std::vector<double>& current,
                                   const std::vector<double>& future, std::size_t n,
                                   std::size_t d) {
  if (current.size() != n * d || future.size() != n * d) {
    throw TensorError("patch_affinity size mismatch");
  }
  const auto normalize = [&](const std::vector<double>& src) {
    std::vector<double> out(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) norm2 += src[i * d + j] * src[i * d + j];
      if (norm2 <= 0.0) throw TensorError("patch_affinity: zero-norm row");
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] = src[i * d + j] * inv;
    }
    return out;
  };
  const auto a = normalize(current);
  const auto b = normalize(future);
  std::vector<double> affinity(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += a[i * d + c] * b[j * d + c];
      affinity[i * n + j] = dot;
    }
  }
  return affinity;
}

std::vector<double> build_transition_matrix(const std::vector<std::size_t>& hard_current,
                                            const std::vector<std::size_t>& hard_future,
                                            const std::vector<double>& affinity,
                                            std::size_t n, std::size_t k,
                                            std::size_t top_k) {
  if (hard_current.size() != n || hard_future.size() != n || affinity.size() != n * n) {
    throw TensorError("build_transition_matrix size mismatch");
  }
  if (top_k == 0) throw TensorError("top_k must be at least 1");
  const std::size_t kk = std::min(top_k, n);
  std::vector<double> q(k * k, 0.0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (affinity[i * n + a] != affinity[i * n + b])
                          return affinity[i * n + a] > affinity[i * n + b];
                        return a < b;
                      });
    double mx = -1e308;
    for (std::size_t j = 0; j < kk; ++j) mx = std::max(mx, affinity[i * n + idx[j]]);
    double denom = 0.0;
    std::vector<double> weights(kk);
    for (std::size_t j = 0; j < kk; ++j) {
      weights[j] = std::exp(affinity[i * n + idx[j]] - mx);
      denom += weights[j];
    }
    const std::size_t src = hard_current[i];
    for (std::size_t j = 0; j < kk; ++j) {
      q[src * k + hard_future[idx[j]]] += weights[j] / denom;
    }
  }
  for (std::size_t r = 0; r < k; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < k; ++c) row += q[r * k + c];
    if (row > 0.0) {
      for (std::size_t c = 0; c < k; ++c) q[r * k + c] /= row;
    } else {
      // Source centroid with no assigned patches: the row division is
      // undefined, fall back to uniform.
      for (std::size_t c = 0; c < k; ++c) q[r * k + c] = 1.0 / static_cast<double>(k);
    }
  }
  return q;
}

ActDynModule::ActDynModule(const ActDynConfig& cfg, std::size_t in_dim,
                           std::size_t hidden, std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg.depth < 1) throw TensorError("actdyn depth must be at least 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  w_proj_ = Tensor::randn({in_dim, hidden}, rng, scale, true);
  b_proj_ = Tensor::zeros({hidden}, true);
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    layers_.emplace_back(hidden, cfg.heads, 0.2, rng);
  }
  const double hscale = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_bilinear_ = Tensor::randn({hidden, hidden}, rng, hscale, true);
}

Tensor ActDynModule::predict_transitions(const Tensor& z) const {
  const std::size_t k = z.rows();
  Tensor h = matmul(z, w_proj_) + row_broadcast(b_proj_, k);
  const auto adjacency = build_adjacency(h, cfg_.tau1, cfg_.theta);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].forward(h, adjacency);
    if (l + 1 < layers_.size()) h = relu(h);
  }
  const Tensor scores = matmul(matmul(h, w_bilinear_), transpose(h));
  return softmax(scores, 1);  // exponentiate + row-normalize
}

void ActDynModule::collect_params(const std::string& prefix, ParamMap& out) const {
  out.emplace(prefix + "w_proj", w_proj_);
  out.emplace(prefix + "b_proj", b_proj_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].collect_params(prefix + "layer" + std::to_string(l) + ".", out);
  }
  out.emplace(prefix + "w_bilinear", w_bilinear_);
}

void ActDynModule::adopt_params(const std::string& prefix, const ParamMap& in) {
  const auto adopt_one = [&](const std::string& name, Tensor& dst) {
    const auto it = in.find(name);
    if (it == in.end()) throw TensorError("checkpoint missing parameter: " + name);
    if (it->second.shape() != dst.shape())
      throw TensorError("checkpoint shape mismatch for: " + name);
    dst = it->second;
  };
  adopt_one(prefix + "w_proj", w_proj_);
  adopt_one(prefix + "b_proj", b_proj_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].adopt_params(prefix + "layer" + std::to_string(l) + ".", in);
  }
  adopt_one(prefix + "w_bilinear", w_bilinear_);
}

Tensor propagate_centroids(const Tensor& z, const Tensor& transition, double alpha) {
  const std::size_t k = z.rows();
  if (transition.shape() != Shape{k, k}) {
    throw TensorError("propagate_centroids shape mismatch");
  }
  const Tensor mix = transition + Tensor::identity(k) * alpha;
  return matmul(mix, z);
}

}  // namespace surgfutr
