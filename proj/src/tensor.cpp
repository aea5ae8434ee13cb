#include "edu4fd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace edu4fd {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (values.size() != shape_size(shape)) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::row_vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape.size() == 1) return 1;
  return shape.empty() ? 1 : shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() == 1) return shape[0];
  if (shape.size() < 2) return 1;
  return values.size() / shape[0];
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on tensor of shape " + shape_str(v.shape));
  return v.values[0];
}

std::span<const double> Var::grad() const { return tape_->grad_view(id_); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor t) {
  Node n;
  n.own = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor& p) {
  Node n;
  n.external = &p;
  n.external_grad = &p.grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.own;
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  std::vector<double>& g = n.external_grad ? *n.external_grad : n.own_grad;
  if (g.empty()) g.assign(value(id).size(), 0.0);
  return g;
}

std::span<const double> Tape::grad_view(std::size_t id) const {
  const Node& n = nodes_[id];
  const std::vector<double>& g = n.external_grad ? *n.external_grad : n.own_grad;
  return {g.data(), g.size()};
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs,
               std::function<void(Tape&, std::size_t)> backprop) {
  Node n;
  n.own = std::move(value);
  n.inputs = std::move(inputs);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(value(loss.id()).shape));
  }
  if (used_) throw std::logic_error("backward: tape already consumed");
  used_ = true;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].external_grad) grad_buffer(i);
  }
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backprop || n.own_grad.empty()) continue;
    n.backprop(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("operands live on different tapes");
}

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape == b.shape) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols() && a.rank() == 2) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                   shape_str(b.shape));
}

std::size_t bindex(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return i % cols;
  }
  return i;
}

template <typename Fwd, typename DA, typename DB>
Var binary(Var a, Var b, const char* name, Fwd fwd, DA da, DB db) {
  require_same_tape(a, b);
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, name);
  const std::size_t cols = av.cols();
  Tensor out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) {
    out.values[i] = fwd(av.values[i], bv.values[bindex(kind, i, cols)]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    auto& ga = t.grad_buffer(ia);
    auto& gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = bindex(kind, i, cols);
      ga[i] += g[i] * da(x.values[i], y.values[j]);
      gb[j] += g[i] * db(x.values[i], y.values[j]);
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  Tensor out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out.values[i] = fwd(av.values[i]);
  const std::size_t ia = a.id();
  return tape.push(std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x.values[i], y.values[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() > 2 || bv.rank() > 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_str(av.shape) + " by " +
                     shape_str(bv.shape));
  }
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  Tensor out = Tensor::matrix(p, r);
  for (std::size_t i = 0; i < p; ++i) {
    double* o = &out.values[i * r];
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = av.values[i * q + k];
      if (aik == 0.0) continue;
      const double* brow = &bv.values[k * r];
      for (std::size_t j = 0; j < r; ++j) o[j] += aik * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    // dA = dC * B^T
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < q; ++k) {
        double s = 0.0;
        const double* yrow = &y.values[k * r];
        const double* grow = &g[i * r];
        for (std::size_t j = 0; j < r; ++j) s += grow[j] * yrow[j];
        ga[i * q + k] += s;
      }
    }
    // dB = A^T * dC
    auto& gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < p; ++i) {
      const double* grow = &g[i * r];
      for (std::size_t k = 0; k < q; ++k) {
        const double aik = x.values[i * q + k];
        if (aik == 0.0) continue;
        double* gbrow = &gb[k * r];
        for (std::size_t j = 0; j < r; ++j) gbrow[j] += aik * grow[j];
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() > 2) throw ShapeError("transpose: rank > 2");
  const std::size_t p = av.rows(), q = av.cols();
  Tensor out = Tensor::matrix(q, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out.values[j * p + i] = av.values[i * q + j];
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) ga[i * q + j] += g[j * p + i];
  });
}

Var conv1d_seq(Var x, Var filters, std::size_t padding) {
  require_same_tape(x, filters);
  const Tensor& xv = x.value();
  const Tensor& fv = filters.value();
  if (fv.rank() != 3) throw ShapeError("conv1d_seq: filters must be [f x k x m]");
  const std::size_t nf = fv.shape[0], k = fv.shape[1], m = fv.shape[2];
  if (k % 2 == 0) throw ShapeError("conv1d_seq: window size must be odd, got " + std::to_string(k));
  if (padding != (k - 1) / 2) {
    throw ShapeError("conv1d_seq: padding must be (k-1)/2 = " + std::to_string((k - 1) / 2));
  }
  if (xv.cols() != m) {
    throw ShapeError("conv1d_seq: input width " + std::to_string(xv.cols()) +
                     " does not match filter depth " + std::to_string(m));
  }
  const std::size_t T = xv.rows();
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  Tensor out = Tensor::matrix(T, nf);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      double s = 0.0;
      for (std::ptrdiff_t d = -pad; d <= pad; ++d) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + d;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* w = &fv.values[(f * k + static_cast<std::size_t>(d + pad)) * m];
        const double* xr = &xv.values[static_cast<std::size_t>(src) * m];
        for (std::size_t c = 0; c < m; ++c) s += w[c] * xr[c];
      }
      out.values[t * nf + f] = s;
    }
  }
  const std::size_t ix = x.id(), iw = filters.id();
  return x.tape()->push(std::move(out), {ix, iw}, [=](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    const Tensor& xs = tp.value(ix);
    const Tensor& ws = tp.value(iw);
    auto& gx = tp.grad_buffer(ix);
    auto& gw = tp.grad_buffer(iw);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < nf; ++f) {
        const double go = g[t * nf + f];
        if (go == 0.0) continue;
        for (std::ptrdiff_t d = -pad; d <= pad; ++d) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + d;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
          const std::size_t woff = (f * k + static_cast<std::size_t>(d + pad)) * m;
          const std::size_t xoff = static_cast<std::size_t>(src) * m;
          for (std::size_t c = 0; c < m; ++c) {
            gw[woff + c] += go * xs.values[xoff + c];
            gx[xoff + c] += go * ws.values[woff + c];
          }
        }
      }
    }
  });
}

Var max_pool_rows(Var x, const std::vector<bool>* mask) {
  const Tensor& xv = x.value();
  const std::size_t T = xv.rows(), d = xv.cols();
  if (mask && mask->size() != T) throw ShapeError("max_pool_rows: mask length mismatch");
  auto visible = [&](std::size_t t) { return !mask || (*mask)[t]; };
  std::vector<std::size_t> argmax(d, T);
  Tensor out = Tensor::matrix(1, d);
  for (std::size_t t = 0; t < T; ++t) {
    if (!visible(t)) continue;
    for (std::size_t c = 0; c < d; ++c) {
      const double v = xv.values[t * d + c];
      if (argmax[c] == T || v > out.values[c]) {
        out.values[c] = v;
        argmax[c] = t;
      }
    }
  }
  if (d > 0 && argmax[0] == T) throw std::invalid_argument("max_pool_rows: every row is masked");
  const std::size_t ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [=](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    auto& gx = tp.grad_buffer(ix);
    for (std::size_t c = 0; c < d; ++c) gx[argmax[c] * d + c] += g[c];
  });
}

Var softmax_vec(Var s) {
  const Tensor& sv = s.value();
  if (sv.rows() != 1 && sv.cols() != 1) throw ShapeError("softmax_vec: expects a vector");
  if (sv.size() == 0) throw ShapeError("softmax_vec: empty input");
  const double mx = *std::max_element(sv.values.begin(), sv.values.end());
  Tensor out(sv.shape);
  double z = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    out.values[i] = std::exp(sv.values[i] - mx);
    z += out.values[i];
  }
  for (double& v : out.values) v /= z;
  const std::size_t is = s.id();
  return s.tape()->push(std::move(out), {is}, [is](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y.values[i];
    auto& gs = tp.grad_buffer(is);
    for (std::size_t i = 0; i < g.size(); ++i) gs[i] += y.values[i] * (g[i] - dot);
  });
}

Var dropout(Var x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor& xv = x.value();
  std::vector<double> mask(xv.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = u(rng) < rate ? 0.0 : keep_scale;
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) out.values[i] = xv.values[i] * mask[i];
  const std::size_t ix = x.id();
  return x.tape()->push(std::move(out), {ix},
                        [ix, mask = std::move(mask)](Tape& tp, std::size_t self) {
                          const auto& g = tp.grad_buffer(self);
                          auto& gx = tp.grad_buffer(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                        });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: row mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  }
  const std::size_t R = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::matrix(R, ca + cb);
  for (std::size_t r = 0; r < R; ++r) {
    std::copy_n(&av.values[r * ca], ca, &out.values[r * (ca + cb)]);
    std::copy_n(&bv.values[r * cb], cb, &out.values[r * (ca + cb) + ca]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    auto& ga = tp.grad_buffer(ia);
    auto& gb = tp.grad_buffer(ib);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
      for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Tape& tape = *rows.front().tape();
  const std::size_t d = rows.front().value().size();
  Tensor out = Tensor::matrix(rows.size(), d);
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_same_tape(rows.front(), rows[r]);
    const Tensor& v = rows[r].value();
    if (v.size() != d) throw ShapeError("stack_rows: ragged rows");
    std::copy(v.values.begin(), v.values.end(), &out.values[r * d]);
    ids.push_back(rows[r].id());
  }
  return tape.push(std::move(out), ids, [ids, d](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      auto& gr = tp.grad_buffer(ids[r]);
      for (std::size_t c = 0; c < d; ++c) gr[c] += g[r * d + c];
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& indices) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  Tensor out = Tensor::matrix(indices.size(), C);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= R) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of " +
                       std::to_string(R) + " rows");
    }
    std::copy_n(&av.values[indices[i] * C], C, &out.values[i * C]);
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [ia, indices, C](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    auto& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t c = 0; c < C; ++c) ga[indices[i] * C + c] += g[i * C + c];
  });
}

Var row(Var a, std::size_t r) { return gather_rows(a, {r}); }

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  if (begin > end || end > C) throw ShapeError("slice_cols: bad range");
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(R, w);
  for (std::size_t r = 0; r < R; ++r) std::copy_n(&av.values[r * C + begin], w, &out.values[r * w]);
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [=](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    auto& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < w; ++c) ga[r * C + begin + c] += g[r * w + c];
  });
}

Var sum_all(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values) s += v;
  const std::size_t ia = a.id();
  return a.tape()->push(Tensor({1, 1}, {s}), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    for (double& x : tp.grad_buffer(ia)) x += g;
  });
}

Var sum_scalars(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("sum_scalars: empty");
  std::vector<std::size_t> ids;
  double s = 0.0;
  for (const Var& x : xs) {
    s += x.scalar();
    ids.push_back(x.id());
  }
  return xs.front().tape()->push(Tensor({1, 1}, {s}), ids, [ids](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    for (std::size_t id : ids) tp.grad_buffer(id)[0] += g;
  });
}

Var basis_combine(Var coeffs, Var bases, std::size_t channel) {
  require_same_tape(coeffs, bases);
  const Tensor& cv = coeffs.value();
  const Tensor& bv = bases.value();
  if (bv.rank() != 3) throw ShapeError("basis_combine: bases must be [B x p x q]");
  const std::size_t B = bv.shape[0], p = bv.shape[1], q = bv.shape[2];
  if (cv.cols() != B) throw ShapeError("basis_combine: coefficient width != number of bases");
  if (channel >= cv.rows()) throw ShapeError("basis_combine: channel out of range");
  const std::size_t n = p * q;
  Tensor out = Tensor::matrix(p, q);
  for (std::size_t b = 0; b < B; ++b) {
    const double a = cv.values[channel * B + b];
    const double* src = &bv.values[b * n];
    for (std::size_t i = 0; i < n; ++i) out.values[i] += a * src[i];
  }
  const std::size_t ic = coeffs.id(), ib = bases.id();
  return coeffs.tape()->push(std::move(out), {ic, ib}, [=](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_buffer(self);
    const Tensor& c = tp.value(ic);
    const Tensor& v = tp.value(ib);
    auto& gc = tp.grad_buffer(ic);
    auto& gv = tp.grad_buffer(ib);
    for (std::size_t b = 0; b < B; ++b) {
      const double a = c.values[channel * B + b];
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += g[i] * v.values[b * n + i];
        gv[b * n + i] += a * g[i];
      }
      gc[channel * B + b] += s;
    }
  });
}

Var binary_cross_entropy(Var probs, int label, double eps) {
  const Tensor& pv = probs.value();
  if (pv.size() != 2) throw ShapeError("binary_cross_entropy: expects a probability pair");
  if (label != 0 && label != 1) throw std::invalid_argument("binary_cross_entropy: label not in {0,1}");
  const double raw = pv.values[1];
  const double p = std::clamp(raw, eps, 1.0 - eps);
  const bool clamped = p != raw;
  const double y = label;
  const double loss = -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
  const std::size_t ip = probs.id();
  return probs.tape()->push(Tensor({1, 1}, {loss}), {ip}, [=](Tape& tp, std::size_t self) {
    if (clamped) return;
    const double g = tp.grad_buffer(self)[0];
    tp.grad_buffer(ip)[1] += g * (-y / p + (1.0 - y) / (1.0 - p));
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace {

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h) {
  std::vector<double> analytic;
  {
    Tape tape;
    Var xv = tape.constant(x);
    Var y = f(tape, xv);
    tape.backward(y);
    auto g = xv.grad();
    analytic.assign(g.begin(), g.end());
    if (analytic.empty()) analytic.assign(x.size(), 0.0);
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    return f(tape, tape.constant(at)).scalar();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe.values[i] = x.values[i] + h;
    const double up = eval(probe);
    probe.values[i] = x.values[i] - h;
    const double down = eval(probe);
    probe.values[i] = x.values[i];
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

GradCheckReport grad_check_parameters(const std::function<double(bool)>& loss,
                                      const std::vector<std::pair<std::string, Tensor*>>& params,
                                      double h) {
  for (const auto& [name, p] : params) p->zero_grad();
  loss(true);
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, p] : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p.values[i];
      p.values[i] = orig + h;
      const double up = loss(false);
      p.values[i] = orig - h;
      const double down = loss(false);
      p.values[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = rel_error(analytic[k][i], numeric);
      ++report.checked;
      if (report.checked == 1 || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = params[k].first;
        report.worst_index = i;
        report.analytic = analytic[k][i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace edu4fd
