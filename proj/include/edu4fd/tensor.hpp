#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edu4fd {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Vectors are stored as 1 x n matrices
/// so that every model quantity is either 2-D or (for conv filters and
/// relation bases) 3-D.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> v);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor row_vector(std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void zero_grad();
  bool all_finite() const;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;

  /// Gradient accumulated by the last backward pass; empty if unreached.
  std::span<const double> grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Record of executed operations. Nodes are appended in execution order;
/// backward walks them in exact reverse.
///
/// Parameter nodes alias an external Tensor: no copy is taken, and their
/// gradient accumulates straight into Tensor::grad so several tapes (one
/// per document) can feed one mini-batch.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  Var parameter(Tensor& p);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  const Tensor& value(std::size_t id) const;
  std::vector<double>& grad_buffer(std::size_t id);
  std::span<const double> grad_view(std::size_t id) const;
  Var push(Tensor value, std::vector<std::size_t> inputs,
           std::function<void(Tape&, std::size_t)> backprop);

 private:
  struct Node {
    Tensor own;
    const Tensor* external = nullptr;
    std::vector<double> own_grad;
    std::vector<double>* external_grad = nullptr;
    std::vector<std::size_t> inputs;
    std::function<void(Tape&, std::size_t)> backprop;
  };
  std::deque<Node> nodes_;  // stable addresses: values are handed out by reference
  bool used_ = false;
};

// Element-wise ops. Broadcasting: b may have the same shape as a, be a
// single element, or be a 1 x cols row repeated over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
/// Subgradient at 0 takes the negative-slope branch.
Var leaky_relu(Var a, double slope);

Var matmul(Var a, Var b);
Var transpose(Var a);

/// Length-preserving 1-D convolution over rows of x [T x m] with filters
/// [f x k x m]; zero rows pad both ends. Requires odd k and padding (k-1)/2.
Var conv1d_seq(Var x, Var filters, std::size_t padding);

/// Column-wise max over the unmasked rows of x [T x d]; returns 1 x d.
/// Ties route the gradient to the lowest row index.
Var max_pool_rows(Var x, const std::vector<bool>* mask = nullptr);

/// Softmax over all elements of a 1 x n (or n x 1) tensor.
Var softmax_vec(Var s);

/// Inverted dropout. Identity when !training or rate == 0.
Var dropout(Var x, double rate, bool training, std::mt19937_64& rng);

Var concat_cols(Var a, Var b);
Var stack_rows(const std::vector<Var>& rows);
Var row(Var a, std::size_t r);
Var gather_rows(Var a, const std::vector<std::size_t>& indices);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var sum_all(Var a);
/// Sum of scalars; the batch loss reduction.
Var sum_scalars(const std::vector<Var>& xs);

/// sum_b coeffs[channel][b] * bases[b], bases shaped [B x p x q] -> [p x q].
Var basis_combine(Var coeffs, Var bases, std::size_t channel);

/// -y log p - (1-y) log(1-p) with p = probs[1] clamped to [eps, 1-eps].
Var binary_cross_entropy(Var probs, int label, double eps = 1e-12);

/// Max relative error between backward() and central differences of a
/// scalar-valued f around x. The relative error denominator is
/// max(|a|, |b|, 1e-8).
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h = 1e-5);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Same comparison over every element of a set of parameter tensors. The
/// loss function must build a fresh tape each call and register the given
/// tensors as parameters.
GradCheckReport grad_check_parameters(const std::function<double(bool with_backward)>& loss,
                                      const std::vector<std::pair<std::string, Tensor*>>& params,
                                      double h = 1e-5);

}  // namespace edu4fd
