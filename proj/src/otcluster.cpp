#include "surgfutr/otcluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surgfutr {

namespace {

constexpr double kLogFloor = 1e-300;  // keeps log() finite on zero-mass entries

void require_distribution(const Tensor& p, const char* name) {
  double total = 0.0;
  for (double x : p.data()) {
    if (x < -1e-12) throw TensorError(std::string(name) + " has negative mass");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw TensorError(std::string(name) + " does not sum to 1");
  }
}

// One distribution-to-distribution entropic OT value via dual ascent in the
// log domain with epsilon scaling. Differentiable through the unrolled
// updates.
Tensor ot_eps(const Tensor& p, const Tensor& q, const Tensor& cost, double eps,
              int final_iterations) {
  const std::size_t k = p.size();
  const Tensor lp_col = col_broadcast(log(p + kLogFloor), k);
  const Tensor lq_row = row_broadcast(log(q + kLogFloor), k);

  double eps0 = 0.0;
  for (double c : cost.data()) eps0 = std::max(eps0, c);
  eps0 = std::max(eps0, eps);

  // Training budgets (final_iterations ~ 100, moderate blur) use a coarse
  // halving schedule: cheap, and accurate enough for a loss signal. Tight
  // budgets anneal gently (factor 0.9, more iterations per level) so the
  // duals stay warm enough that the final small-epsilon level actually
  // converges instead of stalling at its glacial contraction rate.
  const bool tight = final_iterations >= 1000;
  const double factor = tight ? 0.9 : 0.5;
  std::vector<double> schedule;
  for (double e = eps0; e > eps; e *= factor) schedule.push_back(e);
  schedule.push_back(eps);
  const int per_level = std::max(3, final_iterations / 100);

  Tensor f = Tensor::zeros({k});
  Tensor g = Tensor::zeros({k});
  for (std::size_t level = 0; level < schedule.size(); ++level) {
    const double e = schedule[level];
    const int iters = (level + 1 == schedule.size()) ? final_iterations : per_level;
    const double inv_e = 1.0 / e;
    for (int it = 0; it < iters; ++it) {
      f = -e * logsumexp((row_broadcast(g, k) - cost) * inv_e + lq_row, 1);
      g = -e * logsumexp((col_broadcast(f, k) - cost) * inv_e + lp_col, 0);
    }
  }
  return sum(p * f) + sum(q * g);
}

}  // namespace

Tensor attention_marginals(const Tensor& attention, double temperature) {
  if (temperature <= 0.0) throw TensorError("marginal temperature must be positive");
  const Tensor col_sums = sum(attention, 0);
  double total = 0.0;
  for (double x : col_sums.data()) total += x;
  if (total <= 0.0) throw TensorError("degenerate all-zero attention aggregate");
  const Tensor tempered = col_sums * (1.0 / temperature);
  return tempered * (1.0 / (total / temperature));
}

Tensor attention_marginals(const TokenBatch& batch, double temperature) {
  const Tensor a = Tensor::from_data({batch.n_tokens, batch.n_tokens}, batch.attention);
  return attention_marginals(a, temperature);
}

Tensor uniform_distribution(std::size_t k) {
  return Tensor::full({k}, 1.0 / static_cast<double>(k));
}

std::vector<std::size_t> select_centroid_indices(const Tensor& m_r, std::size_t k) {
  const std::size_t n = m_r.size();
  if (k > n) throw TensorError("cannot select more centroids than tokens");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (m_r.at(a) != m_r.at(b)) return m_r.at(a) > m_r.at(b);
    return a < b;
  });
  order.resize(k);
  return order;
}

std::vector<std::size_t> sample_centroid_indices(const Tensor& m_r, std::size_t k,
                                                 std::mt19937_64& rng) {
  const std::size_t n = m_r.size();
  if (k > n) throw TensorError("cannot sample more centroids than tokens");
  std::vector<double> weights(m_r.data());
  std::vector<std::size_t> picked;
  for (std::size_t round = 0; round < k; ++round) {
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    std::size_t idx = dist(rng);
    weights[idx] = 0.0;
    picked.push_back(idx);
  }
  return picked;
}

Assignment sinkhorn_cluster(const Tensor& features, const Tensor& centroids,
                            const Marginals& marginals, double lambda, int iterations) {
  if (lambda <= 0.0) throw TensorError("sinkhorn lambda must be positive");
  if (iterations < 1) throw TensorError("sinkhorn needs at least one iteration");
  const std::size_t n = features.rows();
  const std::size_t k = centroids.rows();
  if (marginals.m_r.size() != n || marginals.m_c.size() != k) {
    throw TensorError("marginal sizes do not match instance");
  }
  // cost = -F C^T, so the Gibbs kernel in the log domain is lambda * F C^T.
  const Tensor log_kernel = matmul(features, transpose(centroids)) * lambda;
  const Tensor log_mr = log(marginals.m_r + kLogFloor);
  const Tensor log_mc = log(marginals.m_c + kLogFloor);

  Tensor f = Tensor::zeros({n});
  Tensor g = Tensor::zeros({k});
  for (int it = 0; it < iterations; ++it) {
    g = log_mc - logsumexp(log_kernel + col_broadcast(f, k), 0);
    f = log_mr - logsumexp(log_kernel + row_broadcast(g, n), 1);
  }
  Assignment out;
  out.plan = exp(log_kernel + col_broadcast(f, k) + row_broadcast(g, n));
  out.centroids = centroids;
  out.hard.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (out.plan.at(i, j) > out.plan.at(i, best)) best = j;
    }
    out.hard[i] = best;
  }
  return out;
}

Tensor aggregate_state(const Tensor& features, const Assignment& assignment) {
  return matmul(transpose(assignment.plan), features);
}

double marginal_violation(const Assignment& assignment, const Marginals& marginals) {
  const std::size_t n = assignment.plan.rows();
  const std::size_t k = assignment.plan.cols();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += assignment.plan.at(i, j);
    worst = std::max(worst, std::abs(row - marginals.m_r.at(i)));
  }
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += assignment.plan.at(i, j);
    worst = std::max(worst, std::abs(col - marginals.m_c.at(j)));
  }
  return worst;
}

Tensor entropic_emd(const Tensor& p, const Tensor& q, const Tensor& cost, double blur,
                    int final_iterations) {
  if (blur <= 0.0) throw TensorError("blur must be positive");
  require_distribution(p, "p");
  require_distribution(q, "q");
  const std::size_t k = p.size();
  if (q.size() != k || cost.shape() != Shape{k, k}) {
    throw TensorError("entropic_emd shape mismatch");
  }
  const double eps = blur * blur;
  const Tensor pq = ot_eps(p, q, cost, eps, final_iterations);
  const Tensor pp = ot_eps(p, p, cost, eps, final_iterations);
  const Tensor qq = ot_eps(q, q, cost, eps, final_iterations);
  return pq - 0.5 * pp - 0.5 * qq;
}

}  // namespace surgfutr
