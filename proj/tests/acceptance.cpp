// Acceptance harness: one self-contained check per criterion, each printing a
// single pass/fail line with its measured numbers and pinned tolerances.
//
// Usage: acceptance <criterion 1..10> [path-to-cli-binary]
//
// The CLI path is only needed by criterion 10 (pipeline determinism), which
// reruns every stage as a real process and compares artifact bytes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "surgfutr/checkpoint.hpp"
#include "surgfutr/config.hpp"
#include "surgfutr/train.hpp"

namespace fs = std::filesystem;
using namespace surgfutr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int report(int criterion, bool pass, const std::string& detail) {
  std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL") << " — "
            << detail << "\n";
  return pass ? 0 : 1;
}

// ---- finite-difference gradient checking ----

// Central finite differences against the reverse-mode gradient. Coordinates
// failing at the base step are re-measured at a smaller step: a piecewise
// activation kink sitting inside the wider stencil invalidates that FD sample
// (a measurement artifact, not a gradient defect), while a genuine gradient
// bug fails at every step size. The relative-error denominator is floored at
// 1e-6 because the difference quotient carries cancellation noise of order
// eps_machine * |loss| / step, which dominates near-zero derivatives.
double fd_max_rel_error(std::vector<Tensor>& leaves,
                        const std::function<Tensor(std::vector<Tensor>&)>& make_loss,
                        double tolerance) {
  const Tensor loss = make_loss(leaves);
  backward(loss);
  const auto probe = [&](Tensor& leaf, std::size_t i, double analytic, double step) {
    const double saved = leaf.data()[i];
    leaf.data_mut()[i] = saved + step;
    const double up = make_loss(leaves).item();
    leaf.data_mut()[i] = saved - step;
    const double down = make_loss(leaves).item();
    leaf.data_mut()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
    return std::abs(analytic - numeric) / denom;
  };
  double worst = 0.0;
  for (auto& leaf : leaves) {
    const std::vector<double> analytic = leaf.grad();
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      double err = probe(leaf, i, analytic[i], 1e-5);
      if (err > tolerance) err = std::min(err, probe(leaf, i, analytic[i], 2.5e-6));
      worst = std::max(worst, err);
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return worst;
}

std::vector<Tensor> param_leaves(const ParamMap& params) {
  std::vector<Tensor> leaves;
  for (const auto& [name, t] : params) leaves.push_back(t);
  return leaves;
}

TokenBatch random_clip(std::size_t n_tokens, std::size_t dim, std::mt19937_64& rng) {
  TokenBatch b;
  b.n_tokens = n_tokens;
  b.dim = dim;
  std::normal_distribution<double> gauss(0.0, 1.0);
  b.tokens.resize(n_tokens * dim);
  for (auto& x : b.tokens) x = gauss(rng);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  b.attention.resize(n_tokens * n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n_tokens; ++j) {
      b.attention[i * n_tokens + j] = u(rng);
      total += b.attention[i * n_tokens + j];
    }
    for (std::size_t j = 0; j < n_tokens; ++j) b.attention[i * n_tokens + j] /= total;
  }
  return b;
}

Tensor random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> v(k);
  double total = 0.0;
  for (auto& x : v) {
    x = u(rng);
    total += x;
  }
  for (auto& x : v) x /= total;
  return Tensor::from_data({k}, v);
}

// ---- criterion 1: gradient correctness over >= 100 seeds ----

int criterion_1() {
  const auto start = Clock::now();
  const double tol_exact = 1e-4;  // all stages and pointwise losses
  const double tol_ot = 1e-3;     // OT-based losses (unrolled Sinkhorn duals)
  double worst_exact = 0.0, worst_ot = 0.0;
  const int seeds = 100;

  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);

    {  // state graph stage
      GraphConfig gcfg;
      gcfg.in_dim = 3;
      gcfg.hidden = 3;
      gcfg.heads = 2;
      gcfg.theta = 1e-9;  // adjacency stays constant under FD nudges
      const StateGraphModule graph(gcfg, rng);
      ParamMap params;
      graph.collect_params("g.", params);
      const Tensor z = Tensor::randn({4, 3}, rng);
      auto leaves = param_leaves(params);
      worst_exact = std::max(
          worst_exact, fd_max_rel_error(leaves,
                                        [&](std::vector<Tensor>&) {
                                          const Tensor r = graph.forward(z);
                                          return mean(r * r);
                                        },
                                        tol_exact));
    }

    {  // ActDyn stack: transition prediction + centroid propagation
      ActDynConfig acfg;
      acfg.depth = 2;
      acfg.heads = 2;
      acfg.theta = 1e-9;
      const ActDynModule actdyn(acfg, 3, 3, rng);
      ParamMap params;
      actdyn.collect_params("a.", params);
      const Tensor z = Tensor::randn({3, 3}, rng);
      auto leaves = param_leaves(params);
      worst_exact = std::max(
          worst_exact,
          fd_max_rel_error(leaves,
                           [&](std::vector<Tensor>&) {
                             const Tensor q = actdyn.predict_transitions(z);
                             return mean(propagate_centroids(z, q, 1.0) *
                                         propagate_centroids(z, q, 1.0));
                           },
                           tol_exact));
    }

    {  // decoder + state-change CE + smooth-L1 + distillation losses
      const std::size_t k = 2, d1 = 3, n_classes = 2, class_dim = 3;
      const StateDecoder decoder(k * d1, n_classes, class_dim, rng);
      ParamMap params;
      decoder.collect_params("d.", params);
      auto leaves = param_leaves(params);
      leaves.push_back(Tensor::randn({k, d1}, rng, 1.0, true));  // refined state
      const std::vector<StateChange> targets = {StateChange::kContinuity,
                                                StateChange::kOnset};
      const Tensor teacher_emb = Tensor::randn({n_classes, class_dim}, rng);
      const Tensor teacher_logits = Tensor::randn({n_classes, 4}, rng);
      worst_exact = std::max(
          worst_exact,
          fd_max_rel_error(leaves,
                           [&](std::vector<Tensor>& l) {
                             const Tensor emb = decoder.embeddings(l.back());
                             const Tensor logits = decoder.logits(emb);
                             return loss_state_change(logits, targets) +
                                    0.5 * loss_distill_se(emb, teacher_emb) +
                                    0.5 * loss_distill_sc(logits, teacher_logits, 0.3) +
                                    0.1 * loss_smooth_l1_mean(
                                              emb, Tensor::zeros(emb.shape()), 1.0);
                           },
                           tol_exact));
    }

    {  // Lite recurrent future-feature predictor (full pipeline objective)
      ModelConfig cfg;
      cfg.n_tokens = 6;
      cfg.feat_dim = 3;
      cfg.hidden = 3;
      cfg.class_dim = 2;
      cfg.n_classes = 2;
      cfg.clusters = 2;
      cfg.graph.heads = 1;
      cfg.graph.theta = 1e-9;
      cfg.actdyn.heads = 1;
      cfg.actdyn.depth = 1;
      cfg.actdyn.theta = 1e-9;
      const LiteModel model(cfg, 5000 + seed);
      const TokenBatch cur = random_clip(cfg.n_tokens, cfg.feat_dim, rng);
      const TokenBatch fut = random_clip(cfg.n_tokens, cfg.feat_dim, rng);
      const std::vector<StateChange> targets = {StateChange::kOnset,
                                                StateChange::kBackground};
      auto leaves = param_leaves(model.params());
      worst_exact = std::max(
          worst_exact,
          fd_max_rel_error(
              leaves,
              [&](std::vector<Tensor>&) {
                const LiteOutputs out = model.forward(cur, fut);
                // The EMA target is a constant w.r.t. the trainable weights.
                const Tensor target = Tensor::from_data({cfg.feat_dim},
                                                        out.target_future.data());
                return loss_state_change(out.logits, targets) +
                       0.7 * loss_smooth_l1_mean(out.predicted_future, target, 1.0);
              },
              tol_exact));
    }

    {  // entropic EMD w.r.t. both distributions (softmax simplex leaves)
      const std::size_t k = 3;
      std::vector<Tensor> leaves = {Tensor::randn({1, k}, rng, 1.0, true),
                                    Tensor::randn({1, k}, rng, 1.0, true)};
      std::vector<double> cost(k * k, 0.0);
      std::uniform_real_distribution<double> u(0.2, 2.0);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          if (i != j) cost[i * k + j] = u(rng);
        }
      }
      const Tensor cost_t = Tensor::from_data({k, k}, cost);
      worst_ot = std::max(
          worst_ot, fd_max_rel_error(
                        leaves,
                        [&](std::vector<Tensor>& l) {
                          const Tensor p = reshape(softmax(l[0], 1), {k});
                          const Tensor q = reshape(softmax(l[1], 1), {k});
                          return entropic_emd(p, q, cost_t, 0.3, 30);
                        },
                        tol_ot));
    }

    {  // L_CTR: row-wise entropic EMD between transition matrices
      const std::size_t k = 3;
      std::vector<Tensor> leaves = {Tensor::randn({k, k}, rng, 1.0, true)};
      const Tensor q_target = softmax(Tensor::randn({k, k}, rng), 1);
      std::vector<double> cost(k * k, 1.0);
      for (std::size_t i = 0; i < k; ++i) cost[i * k + i] = 0.0;
      const Tensor cost_t = Tensor::from_data({k, k}, cost);
      worst_ot = std::max(
          worst_ot, fd_max_rel_error(
                        leaves,
                        [&](std::vector<Tensor>& l) {
                          const Tensor q_hat = softmax(l[0], 1);
                          return loss_ctr(q_hat, q_target, cost_t, 0.3, 30);
                        },
                        tol_ot));
    }
  }

  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << seeds << " seeds; stages+losses max rel err " << worst_exact << " (tol "
         << tol_exact << "), OT losses " << worst_ot << " (tol " << tol_ot << "); "
         << elapsed << " s (limit 120)";
  return report(1, worst_exact < tol_exact && worst_ot < tol_ot && elapsed < 120.0,
                detail.str());
}

// ---- criterion 2: Sinkhorn marginal feasibility ----

int criterion_2() {
  std::mt19937_64 rng(2026);
  double worst200 = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8 + rng() % 57;  // <= 64
    const std::size_t k = 2 + rng() % 24;  // <= 25
    const Tensor f = Tensor::randn({n, 8}, rng);
    const Tensor c = Tensor::randn({k, 8}, rng);
    Marginals marg;
    marg.m_r = random_simplex(n, rng);
    marg.m_c = uniform_distribution(k);
    worst200 =
        std::max(worst200, marginal_violation(sinkhorn_cluster(f, c, marg, 1.0, 200),
                                              marg));
  }

  // Violation at the production iteration count r = 3, and monotone decrease.
  const Tensor f = Tensor::randn({40, 8}, rng);
  const Tensor c = Tensor::randn({10, 8}, rng);
  Marginals marg;
  marg.m_r = random_simplex(40, rng);
  marg.m_c = uniform_distribution(10);
  double v3 = 0.0, prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  for (int r : {3, 10, 50, 200}) {
    const double v = marginal_violation(sinkhorn_cluster(f, c, marg, 5.0, r), marg);
    if (r == 3) v3 = v;
    decreasing = decreasing && v < prev;
    prev = v;
  }

  std::ostringstream detail;
  detail << "20 instances (N<=64, K<=25): worst violation at r=200 " << worst200
         << " (tol 1e-8); r=3 violation " << v3
         << (decreasing ? ", strictly decreasing over r in {3,10,50,200}"
                        : ", NOT strictly decreasing");
  return report(2, worst200 < 1e-8 && decreasing, detail.str());
}

// ---- criterion 3: Algorithm-1 oracle equivalence ----

// Literal restatement of the transition-target construction, independent of
// the library implementation.
std::vector<double> oracle_transition(const std::vector<std::size_t>& hc,
                                      const std::vector<std::size_t>& hf,
                                      const std::vector<double>& aff, std::size_t n,
                                      std::size_t k, std::size_t top_k) {
  std::vector<double> q(k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return aff[i * n + a] > aff[i * n + b];
    });
    const std::size_t kk = std::min(top_k, n);
    const double mx = aff[i * n + order[0]];
    double denom = 0.0;
    for (std::size_t j = 0; j < kk; ++j) denom += std::exp(aff[i * n + order[j]] - mx);
    for (std::size_t j = 0; j < kk; ++j) {
      q[hc[i] * k + hf[order[j]]] += std::exp(aff[i * n + order[j]] - mx) / denom;
    }
  }
  for (std::size_t r = 0; r < k; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < k; ++c) row += q[r * k + c];
    for (std::size_t c = 0; c < k; ++c) {
      q[r * k + c] = row > 0.0 ? q[r * k + c] / row : 1.0 / static_cast<double>(k);
    }
  }
  return q;
}

int criterion_3() {
  std::mt19937_64 rng(3030);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 15;  // <= 16
    const std::size_t k = 2 + rng() % 4;   // <= 5
    const std::size_t top_k = 1 + rng() % 3;
    const std::size_t d = 3;
    std::vector<double> cur(n * d), fut(n * d);
    for (auto& v : cur) v = gauss(rng);
    for (auto& v : fut) v = gauss(rng);
    std::vector<std::size_t> hc(n), hf(n);
    for (auto& v : hc) v = rng() % k;
    for (auto& v : hf) v = rng() % k;
    const auto aff = patch_affinity(cur, fut, n, d);
    const auto got = build_transition_matrix(hc, hf, aff, n, k, top_k);
    const auto want = oracle_transition(hc, hf, aff, n, k, top_k);
    for (std::size_t i = 0; i < got.size(); ++i) {
      worst = std::max(worst, std::abs(got[i] - want[i]));
    }
  }
  std::ostringstream detail;
  detail << "200 instances (N<=16, K<=5, k<=3): max |got - oracle| " << worst
         << " (tol 1e-12)";
  return report(3, worst <= 1e-12, detail.str());
}

// ---- criterion 4: clip-sampler oracle equivalence ----

bool window_is(const LabelMatrix& l, std::size_t begin, std::size_t end_incl,
               std::size_t c, std::uint8_t v) {
  for (std::size_t t = begin; t <= end_incl; ++t) {
    if (l.at(t, c) != v) return false;
  }
  return true;
}

std::vector<std::size_t> oracle_event_times(const LabelMatrix& l, std::size_t w) {
  std::vector<std::size_t> out;
  if (l.frames < 2 * w) return out;
  for (std::size_t t = w; t + w <= l.frames; ++t) {
    for (std::size_t c = 0; c < l.classes; ++c) {
      if ((window_is(l, t - w, t - 1, c, 0) && window_is(l, t, t + w - 1, c, 1)) ||
          (window_is(l, t - w, t - 1, c, 1) && window_is(l, t, t + w - 1, c, 0))) {
        out.push_back(t);
      }
    }
  }
  return out;
}

std::vector<std::size_t> oracle_dedup(std::vector<std::size_t> ts, std::size_t w) {
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<std::size_t> kept;
  for (std::size_t t : ts) {
    if (kept.empty() || t - kept.back() > w) kept.push_back(t);
  }
  return kept;
}

struct OraclePair {
  std::size_t anchor;
  std::vector<StateChange> targets;
};

std::vector<OraclePair> oracle_clip_pairs(const LabelMatrix& l,
                                          const SamplerConfig& cfg) {
  const std::size_t w = cfg.stability_window;
  const auto kept_events = oracle_dedup(oracle_event_times(l, w), w);
  const auto far = [&](std::size_t t) {
    for (std::size_t tr : kept_events) {
      const std::size_t gap = t > tr ? t - tr : tr - t;
      if (gap < w) return false;
    }
    return true;
  };
  std::vector<std::size_t> anchors = kept_events;
  for (std::size_t start = 0; start < l.frames; start += cfg.stride_present) {
    for (std::size_t t = start; t < std::min(start + cfg.stride_present, l.frames);
         ++t) {
      if (t < w || t + w >= l.frames || !far(t)) continue;
      bool any = false;
      for (std::size_t c = 0; c < l.classes && !any; ++c) {
        any = window_is(l, t - w, t + w, c, 1);
      }
      if (any) {
        anchors.push_back(t);
        break;
      }
    }
  }
  for (std::size_t start = 0; start < l.frames; start += cfg.stride_absent) {
    for (std::size_t t = start; t < std::min(start + cfg.stride_absent, l.frames);
         ++t) {
      if (t < w || t + w >= l.frames || !far(t)) continue;
      bool all_zero = true;
      for (std::size_t c = 0; c < l.classes && all_zero; ++c) {
        all_zero = window_is(l, t - w, t + w, c, 0);
      }
      if (all_zero) {
        anchors.push_back(t);
        break;
      }
    }
  }
  const auto final_anchors = oracle_dedup(anchors, w);
  const std::size_t d = cfg.clip_duration;
  std::vector<OraclePair> pairs;
  for (std::size_t t : final_anchors) {
    if (t < d + 1 || t + d >= l.frames) continue;
    OraclePair p;
    p.anchor = t;
    for (std::size_t c = 0; c < l.classes; ++c) {
      bool cur = false, fut = false;
      for (std::size_t f = t - d - 1; f <= t - 1; ++f) cur = cur || l.at(f, c);
      for (std::size_t f = t; f <= t + d; ++f) fut = fut || l.at(f, c);
      p.targets.push_back(cur ? (fut ? StateChange::kContinuity
                                     : StateChange::kDiscontinuity)
                               : (fut ? StateChange::kOnset : StateChange::kBackground));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

LabelMatrix random_labels(std::mt19937_64& rng, std::size_t max_frames,
                          std::size_t max_classes) {
  std::uniform_int_distribution<std::size_t> frames_d(40, max_frames);
  std::uniform_int_distribution<std::size_t> classes_d(1, max_classes);
  LabelMatrix l;
  l.video_id = "oracle";
  l.frames = frames_d(rng);
  l.classes = classes_d(rng);
  l.values.assign(l.frames * l.classes, 0);
  for (std::size_t c = 0; c < l.classes; ++c) {
    std::bernoulli_distribution start_on(0.4);
    std::uniform_int_distribution<std::size_t> run_d(1, 60);
    std::uint8_t v = start_on(rng) ? 1 : 0;
    std::size_t t = 0;
    while (t < l.frames) {
      const std::size_t run = std::min<std::size_t>(run_d(rng), l.frames - t);
      for (std::size_t i = 0; i < run; ++i) l.at(t + i, c) = v;
      v = 1 - v;
      t += run;
    }
  }
  return l;
}

int criterion_4() {
  std::mt19937_64 rng(4040);
  std::size_t pairs_checked = 0;
  bool exact = true, partition = true;
  for (int trial = 0; trial < 100 && exact && partition; ++trial) {
    const LabelMatrix labels = random_labels(rng, 500, 8);
    SamplerConfig cfg;
    cfg.stability_window = 2 + static_cast<std::size_t>(rng() % 8);
    cfg.stride_present = 1 + static_cast<std::size_t>(rng() % 20);
    cfg.stride_absent = 10 + static_cast<std::size_t>(rng() % 90);
    cfg.clip_duration = 1 + static_cast<std::size_t>(rng() % 4);

    const auto got = generate_clip_pairs(labels, cfg);
    const auto want = oracle_clip_pairs(labels, cfg);
    if (got.size() != want.size()) {
      exact = false;
      break;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      exact = exact && got[i].anchor == want[i].anchor &&
              got[i].targets == want[i].targets;
      // Four-category partition: targets must agree with OR-pooled presence.
      for (std::size_t c = 0; c < labels.classes; ++c) {
        bool cur = false, fut = false;
        for (std::size_t f = got[i].current.begin; f <= got[i].current.end; ++f) {
          cur = cur || labels.at(f, c);
        }
        for (std::size_t f = got[i].future.begin; f <= got[i].future.end; ++f) {
          fut = fut || labels.at(f, c);
        }
        const StateChange expect =
            cur ? (fut ? StateChange::kContinuity : StateChange::kDiscontinuity)
                : (fut ? StateChange::kOnset : StateChange::kBackground);
        partition = partition && got[i].targets[c] == expect;
      }
      ++pairs_checked;
    }
  }
  std::ostringstream detail;
  detail << "100 label matrices (<=500 frames, <=8 classes), " << pairs_checked
         << " pairs: oracle match " << (exact ? "exact" : "MISMATCH")
         << ", partition property " << (partition ? "holds" : "VIOLATED");
  return report(4, exact && partition, detail.str());
}

// ---- criterion 5: entropic EMD sanity against an exact LP oracle ----

// Exact transportation LP by enumerating spanning-tree bases: every vertex of
// the transportation polytope corresponds to a spanning tree of the bipartite
// supply/demand graph, so the optimum is the cheapest feasible tree solution.
double exact_emd(const std::vector<double>& p, const std::vector<double>& q,
                 const std::vector<double>& cost, std::size_t k) {
  const std::size_t n_nodes = 2 * k;
  const std::size_t n_edges = k * k;
  const std::size_t basis = n_nodes - 1;
  std::vector<std::size_t> pick(basis);
  double best = std::numeric_limits<double>::infinity();
  const std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t start,
                                                                    std::size_t depth) {
    if (depth == basis) {
      std::vector<std::size_t> parent(n_nodes);
      std::iota(parent.begin(), parent.end(), 0);
      const std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      for (std::size_t e : pick) {
        const std::size_t a = find(e / k);
        const std::size_t b = find(k + e % k);
        if (a == b) return;  // cycle
        parent[a] = b;
      }
      std::vector<double> balance(n_nodes);
      for (std::size_t i = 0; i < k; ++i) balance[i] = p[i];
      for (std::size_t j = 0; j < k; ++j) balance[k + j] = -q[j];
      std::vector<std::vector<std::size_t>> incident(n_nodes);
      for (std::size_t e : pick) {
        incident[e / k].push_back(e);
        incident[k + e % k].push_back(e);
      }
      std::vector<bool> edge_done(n_edges, false);
      std::vector<std::size_t> degree(n_nodes);
      for (std::size_t v = 0; v < n_nodes; ++v) degree[v] = incident[v].size();
      double total_cost = 0.0;
      bool feasible = true;
      for (std::size_t round = 0; round < basis && feasible; ++round) {
        std::size_t leaf = n_nodes;
        for (std::size_t v = 0; v < n_nodes; ++v) {
          if (degree[v] == 1) {
            leaf = v;
            break;
          }
        }
        if (leaf == n_nodes) return;  // disconnected remainder
        std::size_t edge = n_edges;
        for (std::size_t e : incident[leaf]) {
          if (!edge_done[e]) {
            edge = e;
            break;
          }
        }
        const std::size_t row = edge / k, col = k + edge % k;
        const double flow = leaf < k ? balance[leaf] : -balance[leaf];
        if (flow < -1e-12) {
          feasible = false;
          break;
        }
        total_cost += flow * cost[row * k + (col - k)];
        const std::size_t other = leaf == row ? col : row;
        balance[other] += balance[leaf];
        balance[leaf] = 0.0;
        edge_done[edge] = true;
        --degree[leaf];
        --degree[other];
      }
      if (feasible) best = std::min(best, total_cost);
      return;
    }
    for (std::size_t e = start; e + (basis - depth) <= n_edges; ++e) {
      pick[depth] = e;
      recurse(e + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return best;
}

int criterion_5() {
  std::mt19937_64 rng(5050);
  const int iters = 3000;  // dual convergence budget at blur = 0.01
  double worst_self = 0.0, worst_sym = 0.0, worst_rel = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t k = 3 + trial % 3;  // 3..5
    const Tensor p = random_simplex(k, rng);
    const Tensor q = random_simplex(k, rng);
    std::vector<double> cost(k * k, 0.0);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) cost[i * k + j] = cost[j * k + i] = u(rng);
    }
    const Tensor cost_t = Tensor::from_data({k, k}, cost);

    worst_self = std::max(worst_self,
                          std::abs(entropic_emd(p, p, cost_t, 0.01, iters).item()));
    const double pq = entropic_emd(p, q, cost_t, 0.01, iters).item();
    const double qp = entropic_emd(q, p, cost_t, 0.01, iters).item();
    worst_sym = std::max(worst_sym, std::abs(pq - qp) / std::max(1.0, std::abs(pq)));
    const double exact = exact_emd(p.data(), q.data(), cost, k);
    worst_rel = std::max(worst_rel, std::abs(pq - exact) / std::max(exact, 1e-6));
  }
  std::ostringstream detail;
  detail << "self-divergence " << worst_self << " (tol 1e-9); asymmetry " << worst_sym
         << " (tol 1e-9); |emd - exact LP| / exact " << worst_rel << " (tol 0.05)";
  return report(5, worst_self <= 1e-9 && worst_sym <= 1e-9 && worst_rel <= 0.05,
                detail.str());
}

// ---- shared teacher pretraining for criteria 6-8 ----

struct PretrainedTeacher {
  RunConfig cfg;
  std::vector<ProcedureBundle> bundles;
  Dataset train_split, held;
  TeacherModel teacher;
  double seconds = 0.0;
};

PretrainedTeacher pretrain_default_teacher() {
  PretrainedTeacher out;
  out.cfg = RunConfig::defaults();
  out.bundles = make_procedures(out.cfg);
  const Dataset data = build_dataset(out.bundles, out.cfg.sampler);
  std::tie(out.train_split, out.held) = split_dataset(data);
  out.teacher = TeacherModel(out.cfg.model, out.cfg.seed);
  const auto start = Clock::now();
  train_teacher(out.teacher, out.train_split, out.cfg.train);
  out.seconds = seconds_since(start);
  return out;
}

// ---- criterion 6: end-to-end learnability ----

int criterion_6() {
  const auto start = Clock::now();
  const RunConfig cfg = RunConfig::defaults();
  const Dataset data = build_dataset(make_procedures(cfg), cfg.sampler);
  const bool scale_ok = cfg.workflow.verbs == 10 && data.entries.size() >= 2000 &&
                        cfg.train.epochs <= 20;

  PretrainedTeacher pt = pretrain_default_teacher();
  const MetricReport r = evaluate_state_change(&pt.teacher, nullptr, nullptr,
                                               Variant::kTeacher, pt.held);
  const double mean_map = r.metrics.at("mean_map");
  const double chance = chance_mean_ap(pt.held);
  const double cont = r.metrics.at("map_continuity");
  const double onset = r.metrics.at("map_onset");
  const double disc = r.metrics.at("map_discontinuity");
  const double elapsed = seconds_since(start);

  std::ostringstream detail;
  detail << data.entries.size() << " clip pairs, " << cfg.workflow.verbs
         << " verbs; mean mAP " << mean_map << " vs chance " << chance
         << " (need >= 2x); continuity " << cont << " > onset " << onset
         << " and > discontinuity " << disc << "; " << elapsed << " s (limit 900)";
  return report(6, scale_ok && mean_map >= 2.0 * chance && cont > onset &&
                       cont > disc && elapsed < 900.0,
                detail.str());
}

// ---- criterion 7: distillation trend ----

std::string param_bytes(const ParamMap& params) {
  std::string bytes;
  for (const auto& [name, t] : params) {
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(t.data().data()),
                 t.size() * sizeof(double));
  }
  return bytes;
}

int criterion_7() {
  PretrainedTeacher pt = pretrain_default_teacher();
  Dataset subset = pt.train_split;
  if (subset.entries.size() > 800) subset.entries.resize(800);
  const std::string teacher_before = param_bytes(pt.teacher.params());

  int wins = 0;
  std::ostringstream rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig tc = pt.cfg.train;
    tc.epochs = 6;
    tc.warmup_epochs = 1;
    tc.seed = seed;
    // SurgFUTR-S: state-change supervision only.
    LossWeights s_only;
    s_only.lambda2 = s_only.lambda3 = s_only.lambda4 = s_only.lambda5 =
        s_only.lambda6 = 0.0;
    StudentModel s(pt.cfg.model, seed + 100);
    distill_student(s, pt.teacher, subset, tc, s_only);
    const double s_map = evaluate_state_change(nullptr, &s, nullptr, Variant::kStudent,
                                               pt.held)
                             .metrics.at("mean_map");
    // SurgFUTR-TS: full distillation objective.
    StudentModel ts(pt.cfg.model, seed + 100);
    distill_student(ts, pt.teacher, subset, tc, LossWeights{});
    const double ts_map = evaluate_state_change(nullptr, &ts, nullptr,
                                                Variant::kStudent, pt.held)
                              .metrics.at("mean_map");
    if (ts_map >= s_map) ++wins;
    rows << " seed" << seed << " S=" << s_map << " TS=" << ts_map;
  }
  const bool frozen = param_bytes(pt.teacher.params()) == teacher_before;

  std::ostringstream detail;
  detail << "TS >= S in " << wins << "/5 seeds (need >= 4);" << rows.str()
         << "; teacher parameters " << (frozen ? "bitwise unchanged" : "MODIFIED");
  return report(7, wins >= 4 && frozen, detail.str());
}

// ---- criterion 8: downstream transfer (synthetic RSD) ----

int criterion_8() {
  PretrainedTeacher pt = pretrain_default_teacher();
  TaskSpec spec = pt.cfg.task;
  spec.kind = TaskKind::kRsd;
  const TaskDataset task = build_task_labels(pt.bundles, spec, pt.cfg.sampler);
  const ParamMap teacher_params = pt.teacher.params();
  const double cm =
      constant_mean_baseline_mae(task, pt.cfg.finetune.holdout_fraction);

  int wins = 0;
  std::ostringstream rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    FinetuneConfig fc = pt.cfg.finetune;
    fc.epochs = 10;
    fc.seed = seed;
    const double pre =
        finetune_downstream(pt.cfg.model, teacher_params, task, fc).report.metrics.at(
            "mae");
    const double rnd =
        finetune_downstream(pt.cfg.model, {}, task, fc).report.metrics.at("mae");
    if (pre < rnd && pre < cm) ++wins;
    rows << " seed" << seed << " pre=" << pre << " rnd=" << rnd;
  }
  std::ostringstream detail;
  detail << "pretrained beats random init and constant-mean (" << cm << ") in " << wins
         << "/5 seeds (need >= 4);" << rows.str();
  return report(8, wins >= 4, detail.str());
}

// ---- criterion 9: ablation mechanism ----

int criterion_9() {
  RunConfig cfg = RunConfig::defaults();
  cfg.procedures = 8;
  const auto bundles = make_procedures(cfg);
  const Dataset data = build_dataset(bundles, cfg.sampler);
  auto [train_split, held] = split_dataset(data);
  if (train_split.entries.size() > 200) train_split.entries.resize(200);

  TrainConfig tc = cfg.train;
  tc.epochs = 1;
  tc.warmup_epochs = 0;

  int reports_emitted = 0;
  bool all_complete = true;

  // Loss-component toggle grid: the seven non-empty on/off combinations of
  // the distillation terms (lambda4 = L_SE, lambda5 = L_SC, lambda6 = L_FUTR).
  const TeacherModel teacher(cfg.model, cfg.seed);
  for (int mask = 1; mask < 8; ++mask) {
    LossWeights w;
    if (!(mask & 1)) w.lambda4 = 0.0;
    if (!(mask & 2)) w.lambda5 = 0.0;
    if (!(mask & 4)) w.lambda6 = 0.0;
    StudentModel student(cfg.model, cfg.seed + 1);
    distill_student(student, teacher, train_split, tc, w);
    MetricReport r = evaluate_state_change(nullptr, &student, nullptr,
                                           Variant::kStudent, held);
    r.config_hash = cfg.config_hash();
    r.seed = cfg.seed;
    const std::string json = r.to_json();
    all_complete = all_complete && !json.empty() && r.metrics.count("mean_map") == 1;
    ++reports_emitted;
    std::cout << "  toggle se=" << (mask & 1 ? 1 : 0) << " sc=" << (mask & 2 ? 1 : 0)
              << " futr=" << (mask & 4 ? 1 : 0) << " mean_map "
              << r.metrics.at("mean_map") << "\n";
  }

  // Cluster-count sweep.
  for (std::size_t k : {5, 15, 25, 35, 45, 55}) {
    RunConfig kcfg = cfg;
    kcfg.model.clusters = k;
    TeacherModel model(kcfg.model, kcfg.seed);
    train_teacher(model, train_split, tc);
    MetricReport r =
        evaluate_state_change(&model, nullptr, nullptr, Variant::kTeacher, held);
    r.config_hash = kcfg.config_hash();
    r.seed = kcfg.seed;
    const std::string json = r.to_json();
    all_complete = all_complete && !json.empty() && r.metrics.count("mean_map") == 1;
    ++reports_emitted;
    std::cout << "  clusters K=" << k << " mean_map " << r.metrics.at("mean_map")
              << "\n";
  }

  std::ostringstream detail;
  detail << reports_emitted
         << " configurations completed with MetricReports (7 loss toggles + K in "
            "{5,15,25,35,45,55}); expected 13";
  return report(9, all_complete && reports_emitted == 13, detail.str());
}

// ---- criterion 10: pipeline determinism ----

int run_cli(const std::string& cli, const std::string& config_path,
            const std::string& args) {
  const std::string cmd =
      "\"" + cli + "\" --config \"" + config_path + "\" " + args + " > /dev/null";
  return std::system(cmd.c_str());
}

bool trees_identical(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    diff = "file sets differ";
    return false;
  }
  for (const auto& rel : rel_a) {
    std::ifstream fa(a / rel, std::ios::binary), fb(b / rel, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), {});
    const std::string cb((std::istreambuf_iterator<char>(fb)), {});
    if (ca != cb) {
      diff = "byte mismatch in " + rel.string();
      return false;
    }
  }
  return true;
}

int criterion_10(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) {
    return report(10, false, "pipeline binary not found: '" + cli + "'");
  }
  const fs::path root = fs::temp_directory_path() / "surgfutr_accept10";
  fs::remove_all(root);
  fs::create_directories(root);

  RunConfig cfg = RunConfig::defaults();
  cfg.procedures = 6;
  cfg.train.epochs = 2;
  cfg.train.warmup_epochs = 1;
  cfg.finetune.epochs = 2;
  cfg.output_dir = (root / "runs").string();
  const std::string config_path = (root / "config.json").string();
  atomic_write_file(config_path, cfg.canonical_json());
  const fs::path run_dir = cfg.run_dir();

  const auto run_pipeline = [&]() -> bool {
    const std::string inspect_args =
        "inspect --checkpoint \"" + (run_dir / "pretrain/teacher.ckpt").string() +
        "\" --procedure 0 --begin 10 --end 13 --out \"" +
        (run_dir / "inspect_map.jsonl").string() + "\"";
    for (const std::string& stage :
         {std::string("gen"), std::string("sample"), std::string("pretrain"),
          std::string("distill"), std::string("lite"), std::string("eval"),
          inspect_args}) {
      if (run_cli(cli, config_path, stage) != 0) return false;
    }
    return true;
  };

  if (!run_pipeline()) return report(10, false, "first pipeline pass failed");
  const fs::path snapshot = root / "snapshot";
  fs::copy(run_dir, snapshot, fs::copy_options::recursive);
  fs::remove_all(run_dir);
  if (!run_pipeline()) return report(10, false, "second pipeline pass failed");

  std::string diff;
  const bool identical = trees_identical(run_dir, snapshot, diff);
  std::size_t n_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(snapshot)) {
    if (e.is_regular_file()) ++n_files;
  }
  fs::remove_all(root);
  std::ostringstream detail;
  detail << "gen/sample/pretrain/distill/lite/eval/inspect rerun: " << n_files
         << " artifacts "
         << (identical ? "byte-identical across runs" : ("DIFFER (" + diff + ")"));
  return report(10, identical, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <criterion 1..10> [cli-binary]\n";
    return 2;
  }
  const int criterion = std::atoi(argv[1]);
  const std::string cli = argc > 2 ? argv[2] : "";
  try {
    switch (criterion) {
      case 1: return criterion_1();
      case 2: return criterion_2();
      case 3: return criterion_3();
      case 4: return criterion_4();
      case 5: return criterion_5();
      case 6: return criterion_6();
      case 7: return criterion_7();
      case 8: return criterion_8();
      case 9: return criterion_9();
      case 10: return criterion_10(cli);
      default:
        std::cerr << "unknown criterion: " << argv[1] << "\n";
        return 2;
    }
  } catch (const std::exception& e) {
    return report(criterion, false, std::string("exception: ") + e.what());
  }
}
