#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace surgfutr {

using Shape = std::vector<std::size_t>;

// Dense 64-bit tensor with reverse-mode autodiff. Values are row-major.
// A Tensor is a cheap handle onto a shared node; the node graph doubles as
// the backward tape. Nodes reference their parents only, so intermediate
// graphs are freed once the loss handle goes out of scope.
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // scatters node.grad to parents
    bool backward_ran = false;
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& data_mut() { return node_->data; }
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

class TensorError : public std::runtime_error {
 public:
  explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runs reverse-mode accumulation from a scalar loss. Each reachable
// requires_grad leaf ends up with a gradient of its own shape; leaves not on
// the path keep zeros. Throws if loss is non-scalar or backward already ran
// on this node.
void backward(const Tensor& loss);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);
Tensor operator+(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);

// axis 0 = down columns, axis 1 = across rows (2-D); 1-D tensors reduce to a
// scalar with axis 0.
Tensor softmax(const Tensor& a, int axis);
Tensor sum(const Tensor& a);            // all elements
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);
Tensor max(const Tensor& a, int axis);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices);

// Row (i*B.rows + j) of the result is A[i] + B[j]; used to form pairwise
// attention scores without a third tensor dimension.
Tensor pairwise_sum_rows(const Tensor& a, const Tensor& b);

// Elementwise smooth-L1: 0.5*e^2/threshold for |e| < threshold, |e| - 0.5*threshold
// otherwise, e = a - b.
Tensor smooth_l1(const Tensor& a, const Tensor& b, double threshold);
Tensor l1_distance(const Tensor& a, const Tensor& b);  // sum of |a - b|

Tensor row_broadcast(const Tensor& row, std::size_t n_rows);  // 1-D row -> n_rows x len
Tensor col_broadcast(const Tensor& col, std::size_t n_cols);  // 1-D col -> len x n_cols
Tensor logsumexp(const Tensor& a, int axis);

}  // namespace surgfutr
