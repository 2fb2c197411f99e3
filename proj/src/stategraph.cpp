#include "surgfutr/stategraph.hpp"

#include <cmath>

namespace surgfutr {

namespace {

Tensor adjacency_mask(const std::vector<std::uint8_t>& adjacency, std::size_t k) {
  std::vector<double> mask(k * k);
  for (std::size_t i = 0; i < k * k; ++i) mask[i] = adjacency[i] ? 0.0 : -1e30;
  return Tensor::from_data({k, k}, std::move(mask));
}

void adopt_one(const std::string& name, const ParamMap& in, Tensor& dst) {
  const auto it = in.find(name);
  if (it == in.end()) throw TensorError("checkpoint missing parameter: " + name);
  if (it->second.shape() != dst.shape())
    throw TensorError("checkpoint shape mismatch for: " + name);
  dst = it->second;
}

}  // namespace

std::vector<std::uint8_t> build_adjacency(const Tensor& projected, double tau1,
                                          double theta) {
  const std::size_t k = projected.rows();
  const std::size_t d = projected.cols();
  // L2-normalize rows on plain values; the binarized result is not a
  // gradient path.
  std::vector<double> unit(k * d);
  for (std::size_t i = 0; i < k; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm2 += projected.at(i, j) * projected.at(i, j);
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (std::size_t j = 0; j < d; ++j) unit[i * d + j] = projected.at(i, j) * inv;
  }
  std::vector<std::uint8_t> adj(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> score(k);
    double mx = -1e308;
    for (std::size_t j = 0; j < k; ++j) {
      double dist2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = unit[i * d + c] - unit[j * d + c];
        dist2 += diff * diff;
      }
      score[j] = -std::sqrt(dist2) / tau1;
      mx = std::max(mx, score[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      score[j] = std::exp(score[j] - mx);
      denom += score[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (score[j] / denom > theta) adj[i * k + j] = 1;
    }
    adj[i * k + i] = 1;
  }
  return adj;
}

GatV2Layer::GatV2Layer(std::size_t dim, std::size_t heads, double leaky_slope,
                       std::mt19937_64& rng)
    : dim_(dim), heads_(heads), leaky_slope_(leaky_slope) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t h = 0; h < heads; ++h) {
    w_left_.push_back(Tensor::randn({dim, dim}, rng, scale, true));
    w_right_.push_back(Tensor::randn({dim, dim}, rng, scale, true));
    attn_vec_.push_back(Tensor::randn({dim, 1}, rng, scale, true));
  }
}

Tensor GatV2Layer::forward(const Tensor& h,
                           const std::vector<std::uint8_t>& adjacency) const {
  const std::size_t k = h.rows();
  if (adjacency.size() != k * k) throw TensorError("adjacency size mismatch");
  const Tensor mask = adjacency_mask(adjacency, k);
  Tensor acc;
  for (std::size_t head = 0; head < heads_; ++head) {
    const Tensor hl = matmul(h, w_left_[head]);
    const Tensor hr = matmul(h, w_right_[head]);
    // e_ij = a^T LeakyReLU(W_l h_i + W_r h_j), masked softmax over neighbors.
    const Tensor pair = leaky_relu(pairwise_sum_rows(hl, hr), leaky_slope_);
    const Tensor scores = reshape(matmul(pair, attn_vec_[head]), {k, k});
    const Tensor att = softmax(scores + mask, 1);
    const Tensor out = matmul(att, hr);
    acc = head == 0 ? out : acc + out;
  }
  return acc * (1.0 / static_cast<double>(heads_));
}

void GatV2Layer::collect_params(const std::string& prefix, ParamMap& out) const {
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::string base = prefix + "head" + std::to_string(h) + ".";
    out.emplace(base + "w_left", w_left_[h]);
    out.emplace(base + "w_right", w_right_[h]);
    out.emplace(base + "attn", attn_vec_[h]);
  }
}

void GatV2Layer::adopt_params(const std::string& prefix, const ParamMap& in) {
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::string base = prefix + "head" + std::to_string(h) + ".";
    adopt_one(base + "w_left", in, w_left_[h]);
    adopt_one(base + "w_right", in, w_right_[h]);
    adopt_one(base + "attn", in, attn_vec_[h]);
  }
}

StateGraphModule::StateGraphModule(const GraphConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.in_dim));
  w_proj_ = Tensor::randn({cfg.in_dim, cfg.hidden}, rng, scale, true);
  b_proj_ = Tensor::zeros({cfg.hidden}, true);
  gat_ = GatV2Layer(cfg.hidden, cfg.heads, cfg.leaky_slope, rng);
}

Tensor StateGraphModule::project(const Tensor& z) const {
  return matmul(z, w_proj_) + row_broadcast(b_proj_, z.rows());
}

Tensor StateGraphModule::forward(const Tensor& z) const {
  const Tensor h = project(z);
  const auto adjacency = build_adjacency(h, cfg_.tau1, cfg_.theta);
  return gat_.forward(h, adjacency);
}

void StateGraphModule::collect_params(const std::string& prefix, ParamMap& out) const {
  out.emplace(prefix + "w_proj", w_proj_);
  out.emplace(prefix + "b_proj", b_proj_);
  gat_.collect_params(prefix + "gat.", out);
}

void StateGraphModule::adopt_params(const std::string& prefix, const ParamMap& in) {
  adopt_one(prefix + "w_proj", in, w_proj_);
  adopt_one(prefix + "b_proj", in, b_proj_);
  gat_.adopt_params(prefix + "gat.", in);
}

}  // namespace surgfutr
