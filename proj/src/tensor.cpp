#include "surgfutr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace surgfutr {

namespace {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw TensorError(std::string("non-finite value produced by ") + op);
    }
  }
}

std::shared_ptr<Tensor::Node> make_node(Shape shape, std::vector<double> data,
                                        std::vector<std::shared_ptr<Tensor::Node>> parents,
                                        std::function<void(Tensor::Node&)> backward_fn,
                                        const char* op) {
  check_finite(data, op);
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->is_leaf = false;
  for (const auto& p : parents) {
    if (p->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->grad.assign(n->data.size(), 0.0);
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw TensorError(std::string("shape mismatch in ") + op);
  }
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_size(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_size(shape), value), requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw TensorError("data length does not match shape");
  }
  check_finite(data, "from_data");
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->data.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(shape_size(shape));
  for (auto& x : data) x = dist(rng);
  return from_data(shape, std::move(data), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return from_data({n, n}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (node_->shape.size() != 2) throw TensorError("rows() on non-matrix");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (node_->shape.size() != 2) throw TensorError("cols() on non-matrix");
  return node_->shape[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

double Tensor::item() const {
  if (node_->data.size() != 1) throw TensorError("item() on non-scalar");
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!node_->requires_grad) throw TensorError("grad() on tensor without requires_grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void backward(const Tensor& loss) {
  auto root = loss.node();
  if (root->data.size() != 1) throw TensorError("backward() requires a scalar loss");
  if (root->backward_ran) throw TensorError("backward() called twice on the same loss");
  root->backward_ran = true;
  if (!root->requires_grad) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Tensor::Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar) require_same_shape(a, b, name);
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<double> out(n);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[a_scalar ? 0 : i];
    const double y = bd[b_scalar ? 0 : i];
    switch (op) {
      case BinOp::Add: out[i] = x + y; break;
      case BinOp::Sub: out[i] = x - y; break;
      case BinOp::Mul: out[i] = x * y; break;
      case BinOp::Div: out[i] = x / y; break;
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_node(
      out_shape, std::move(out), {an, bn},
      [an, bn, op, a_scalar, b_scalar, n](Tensor::Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
          const double g = self.grad[i];
          const double x = an->data[a_scalar ? 0 : i];
          const double y = bn->data[b_scalar ? 0 : i];
          double ga = 0.0, gb = 0.0;
          switch (op) {
            case BinOp::Add: ga = g; gb = g; break;
            case BinOp::Sub: ga = g; gb = -g; break;
            case BinOp::Mul: ga = g * y; gb = g * x; break;
            case BinOp::Div: ga = g / y; gb = -g * x / (y * y); break;
          }
          if (an->requires_grad) an->grad[a_scalar ? 0 : i] += ga;
          if (bn->requires_grad) bn->grad[b_scalar ? 0 : i] += gb;
        }
      },
      name));
}

Tensor unary_op(const Tensor& a, const std::function<double(double)>& f,
                const std::function<double(double, double)>& df_dx_times_g,
                const char* name) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a.data()[i]);
  auto an = a.node();
  return Tensor(make_node(
      a.shape(), std::move(out), {an},
      [an, df_dx_times_g](Tensor::Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          an->grad[i] += df_dx_times_g(an->data[i], self.grad[i]);
        }
      },
      name));
}

// Resolves a 2-D (or 1-D) tensor into (outer, axis_len, inner) strides such
// that reducing over the axis walks contiguous groups.
struct AxisView {
  std::size_t outer, axis_len, inner;
};

AxisView axis_view(const Tensor& a, int axis) {
  const auto& s = a.shape();
  if (s.size() == 1) {
    if (axis != 0) throw TensorError("axis out of range for 1-D tensor");
    return {1, s[0], 1};
  }
  if (s.size() == 2) {
    if (axis == 0) return {1, s[0], s[1]};
    if (axis == 1) return {s[0], s[1], 1};
    throw TensorError("axis out of range for 2-D tensor");
  }
  throw TensorError("axis reductions support rank 1 and 2 only");
}

Shape reduced_shape(const Tensor& a, int axis) {
  const auto& s = a.shape();
  if (s.size() == 1) return {1};
  return axis == 0 ? Shape{s[1]} : Shape{s[0]};
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add, "add"); }
Tensor operator-(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub, "sub"); }
Tensor operator*(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul, "mul"); }
Tensor operator/(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div, "div"); }
Tensor operator-(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; },
                  [](double, double g) { return -g; }, "neg");
}
Tensor operator*(const Tensor& a, double s) { return a * Tensor::scalar(s); }
Tensor operator*(double s, const Tensor& a) { return a * Tensor::scalar(s); }
Tensor operator+(const Tensor& a, double s) { return a + Tensor::scalar(s); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    throw TensorError("shape mismatch in matmul");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * bd[p * n + j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_node(
      {m, n}, std::move(out), {an, bn},
      [an, bn, m, k, n](Tensor::Node& self) {
        if (an->requires_grad) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double g = self.grad[i * n + j];
              for (std::size_t p = 0; p < k; ++p)
                an->grad[i * k + p] += g * bn->data[p * n + j];
            }
        }
        if (bn->requires_grad) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double av = an->data[i * k + p];
              for (std::size_t j = 0; j < n; ++j)
                bn->grad[p * n + j] += av * self.grad[i * n + j];
            }
        }
      },
      "matmul"));
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  auto an = a.node();
  return Tensor(make_node(
      {n, m}, std::move(out), {an},
      [an, m, n](Tensor::Node& self) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j * m + i];
      },
      "transpose"));
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double x, double g) { return g * std::exp(x); }, "exp");
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double g) { return g / x; }, "log");
}

Tensor abs(const Tensor& a) {
  return unary_op(a, [](double x) { return std::abs(x); },
                  [](double x, double g) { return x >= 0.0 ? g : -g; }, "abs");
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                  [slope](double x, double g) { return x > 0.0 ? g : slope * g; },
                  "leaky_relu");
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double x, double g) {
                    const double s = 1.0 / (1.0 + std::exp(-x));
                    return g * s * (1.0 - s);
                  },
                  "sigmoid");
}

Tensor tanh_t(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double x, double g) {
                    const double t = std::tanh(x);
                    return g * (1.0 - t * t);
                  },
                  "tanh");
}

Tensor softmax(const Tensor& a, int axis) {
  const AxisView v = axis_view(a, axis);
  std::vector<double> out(a.size());
  const auto& ad = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.axis_len * v.inner + in;
      double mx = -1e308;
      for (std::size_t k = 0; k < v.axis_len; ++k)
        mx = std::max(mx, ad[base + k * v.inner]);
      double denom = 0.0;
      for (std::size_t k = 0; k < v.axis_len; ++k) {
        const double e = std::exp(ad[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        denom += e;
      }
      for (std::size_t k = 0; k < v.axis_len; ++k) out[base + k * v.inner] /= denom;
    }
  }
  auto an = a.node();
  return Tensor(make_node(
      a.shape(), std::move(out), {an},
      [an, v](Tensor::Node& self) {
        for (std::size_t o = 0; o < v.outer; ++o) {
          for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.axis_len * v.inner + in;
            double dot = 0.0;
            for (std::size_t k = 0; k < v.axis_len; ++k) {
              const std::size_t idx = base + k * v.inner;
              dot += self.grad[idx] * self.data[idx];
            }
            for (std::size_t k = 0; k < v.axis_len; ++k) {
              const std::size_t idx = base + k * v.inner;
              an->grad[idx] += self.data[idx] * (self.grad[idx] - dot);
            }
          }
        }
      },
      "softmax"));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  auto an = a.node();
  return Tensor(make_node(
      {1}, {total}, {an},
      [an](Tensor::Node& self) {
        for (auto& g : an->grad) g += self.grad[0];
      },
      "sum"));
}

Tensor sum(const Tensor& a, int axis) {
  const AxisView v = axis_view(a, axis);
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t k = 0; k < v.axis_len; ++k)
      for (std::size_t in = 0; in < v.inner; ++in)
        out[o * v.inner + in] += a.data()[o * v.axis_len * v.inner + k * v.inner + in];
  auto an = a.node();
  return Tensor(make_node(
      reduced_shape(a, axis), std::move(out), {an},
      [an, v](Tensor::Node& self) {
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t k = 0; k < v.axis_len; ++k)
            for (std::size_t in = 0; in < v.inner; ++in)
              an->grad[o * v.axis_len * v.inner + k * v.inner + in] +=
                  self.grad[o * v.inner + in];
      },
      "sum_axis"));
}

Tensor mean(const Tensor& a) { return sum(a) * (1.0 / static_cast<double>(a.size())); }

Tensor mean(const Tensor& a, int axis) {
  const AxisView v = axis_view(a, axis);
  return sum(a, axis) * (1.0 / static_cast<double>(v.axis_len));
}

Tensor max(const Tensor& a, int axis) {
  const AxisView v = axis_view(a, axis);
  std::vector<double> out(v.outer * v.inner);
  std::vector<std::size_t> arg(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      double best = -1e308;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < v.axis_len; ++k) {
        const double x = a.data()[o * v.axis_len * v.inner + k * v.inner + in];
        if (x > best) {
          best = x;
          best_k = k;
        }
      }
      out[o * v.inner + in] = best;
      arg[o * v.inner + in] = best_k;
    }
  }
  auto an = a.node();
  return Tensor(make_node(
      reduced_shape(a, axis), std::move(out), {an},
      [an, v, arg = std::move(arg)](Tensor::Node& self) {
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t k = arg[o * v.inner + in];
            an->grad[o * v.axis_len * v.inner + k * v.inner + in] +=
                self.grad[o * v.inner + in];
          }
      },
      "max_axis"));
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_size(shape) != a.size()) throw TensorError("reshape size mismatch");
  auto an = a.node();
  return Tensor(make_node(
      shape, a.data(), {an},
      [an](Tensor::Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) an->grad[i] += self.grad[i];
      },
      "reshape"));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw TensorError("concat of zero tensors");
  const std::size_t rank = parts[0].shape().size();
  if (rank == 1 || (rank == 2 && axis == 0)) {
    // stack along rows / append 1-D
    std::size_t total = 0;
    const std::size_t inner = rank == 2 ? parts[0].cols() : 1;
    std::vector<double> out;
    std::vector<std::shared_ptr<Tensor::Node>> pnodes;
    for (const auto& p : parts) {
      if (p.shape().size() != rank || (rank == 2 && p.cols() != inner))
        throw TensorError("concat shape mismatch");
      total += p.shape()[0];
      out.insert(out.end(), p.data().begin(), p.data().end());
      pnodes.push_back(p.node());
    }
    Shape shape = rank == 2 ? Shape{total, inner} : Shape{total};
    return Tensor(make_node(
        shape, std::move(out), pnodes,
        [pnodes](Tensor::Node& self) {
          std::size_t off = 0;
          for (const auto& p : pnodes) {
            if (p->requires_grad)
              for (std::size_t i = 0; i < p->data.size(); ++i)
                p->grad[i] += self.grad[off + i];
            off += p->data.size();
          }
        },
        "concat"));
  }
  if (rank == 2 && axis == 1) {
    const std::size_t r = parts[0].rows();
    std::size_t total_c = 0;
    std::vector<std::shared_ptr<Tensor::Node>> pnodes;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
      if (p.rows() != r) throw TensorError("concat shape mismatch");
      widths.push_back(p.cols());
      total_c += p.cols();
      pnodes.push_back(p.node());
    }
    std::vector<double> out(r * total_c);
    std::size_t coff = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < widths[pi]; ++j)
          out[i * total_c + coff + j] = parts[pi].data()[i * widths[pi] + j];
      coff += widths[pi];
    }
    return Tensor(make_node(
        {r, total_c}, std::move(out), pnodes,
        [pnodes, widths, r, total_c](Tensor::Node& self) {
          std::size_t coff = 0;
          for (std::size_t pi = 0; pi < pnodes.size(); ++pi) {
            if (pnodes[pi]->requires_grad)
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < widths[pi]; ++j)
                  pnodes[pi]->grad[i * widths[pi] + j] += self.grad[i * total_c + coff + j];
            coff += widths[pi];
          }
        },
        "concat"));
  }
  throw TensorError("unsupported concat axis/rank");
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
  const std::size_t c = a.cols();
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) throw TensorError("gather index out of range");
    std::copy_n(a.data().begin() + indices[i] * c, c, out.begin() + i * c);
  }
  auto an = a.node();
  return Tensor(make_node(
      {indices.size(), c}, std::move(out), {an},
      [an, indices, c](Tensor::Node& self) {
        for (std::size_t i = 0; i < indices.size(); ++i)
          for (std::size_t j = 0; j < c; ++j)
            an->grad[indices[i] * c + j] += self.grad[i * c + j];
      },
      "gather_rows"));
}

Tensor pairwise_sum_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw TensorError("shape mismatch in pairwise_sum_rows");
  const std::size_t m = a.rows(), n = b.rows(), c = a.cols();
  std::vector<double> out(m * n * c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < c; ++k)
        out[(i * n + j) * c + k] = a.data()[i * c + k] + b.data()[j * c + k];
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_node(
      {m * n, c}, std::move(out), {an, bn},
      [an, bn, m, n, c](Tensor::Node& self) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < c; ++k) {
              const double g = self.grad[(i * n + j) * c + k];
              if (an->requires_grad) an->grad[i * c + k] += g;
              if (bn->requires_grad) bn->grad[j * c + k] += g;
            }
      },
      "pairwise_sum_rows"));
}

Tensor smooth_l1(const Tensor& a, const Tensor& b, double threshold) {
  require_same_shape(a, b, "smooth_l1");
  if (threshold <= 0.0) throw TensorError("smooth_l1 threshold must be positive");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a.data()[i] - b.data()[i];
    out[i] = std::abs(e) < threshold ? 0.5 * e * e / threshold
                                     : std::abs(e) - 0.5 * threshold;
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_node(
      a.shape(), std::move(out), {an, bn},
      [an, bn, threshold](Tensor::Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          const double e = an->data[i] - bn->data[i];
          const double d = std::abs(e) < threshold ? e / threshold : (e >= 0.0 ? 1.0 : -1.0);
          const double g = self.grad[i] * d;
          if (an->requires_grad) an->grad[i] += g;
          if (bn->requires_grad) bn->grad[i] -= g;
        }
      },
      "smooth_l1"));
}

Tensor l1_distance(const Tensor& a, const Tensor& b) { return sum(abs(a - b)); }

Tensor row_broadcast(const Tensor& row, std::size_t n_rows) {
  if (row.shape().size() != 1) throw TensorError("row_broadcast expects a 1-D tensor");
  const std::size_t c = row.size();
  std::vector<double> out(n_rows * c);
  for (std::size_t i = 0; i < n_rows; ++i)
    std::copy(row.data().begin(), row.data().end(), out.begin() + i * c);
  auto rn = row.node();
  return Tensor(make_node(
      {n_rows, c}, std::move(out), {rn},
      [rn, n_rows, c](Tensor::Node& self) {
        for (std::size_t i = 0; i < n_rows; ++i)
          for (std::size_t j = 0; j < c; ++j) rn->grad[j] += self.grad[i * c + j];
      },
      "row_broadcast"));
}

Tensor col_broadcast(const Tensor& col, std::size_t n_cols) {
  if (col.shape().size() != 1) throw TensorError("col_broadcast expects a 1-D tensor");
  return matmul(reshape(col, {col.size(), 1}), Tensor::full({1, n_cols}, 1.0));
}

Tensor logsumexp(const Tensor& a, int axis) {
  const Tensor m = max(a, axis);
  Tensor mb;
  if (a.shape().size() == 1) {
    mb = m;  // scalar-vs-vector broadcast in the subtraction
  } else if (axis == 1) {
    mb = col_broadcast(m, a.cols());
  } else {
    mb = row_broadcast(m, a.rows());
  }
  return log(sum(exp(a - mb), axis)) + m;
}

}  // namespace surgfutr
