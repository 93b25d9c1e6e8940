#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "motionkit/diffcore.hpp"

namespace motionkit::nn::inline MOTIONKIT_PRECISION {

namespace {

using MatR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

CMapR view(const Node& n, std::size_t rows, std::size_t cols) {
  return CMapR(n.value.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapR grad_view(Node& n, std::size_t rows, std::size_t cols) {
  n.ensure_grad();
  return MapR(n.grad.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorKind::kShape,
              std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& t) {
  if (!t.defined()) throw Error(ErrorKind::kShape, std::string(op) + ": undefined tensor");
  if (t.rank() != 1 && t.rank() != 2) {
    throw Error(ErrorKind::kShape, std::string(op) + ": expected rank 1 or 2, got " + shape_string(t.shape()));
  }
}

// Builds the output node; history is kept only if some input needs a gradient.
Tensor make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> back) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(back);
  }
  return Tensor(std::move(node));
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

template <typename F, typename D>
Tensor unary(const Tensor& x, F forward, D derivative) {
  std::vector<Scalar> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(x.values()[i]);
  return make_result(x.shape(), out, {x}, [derivative, out](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < in.value.size(); ++i) in.grad[i] += self.grad[i] * derivative(in.value[i], out[i]);
  });
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Scalar{0}, requires_grad); }

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<Scalar>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  if (shape.empty() || shape.size() > 2) throw Error(ErrorKind::kShape, "tensors have rank 1 or 2");
  if (shape_size(shape) != values.size()) {
    throw Error(ErrorKind::kShape, "shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) +
                                       " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::size_t Tensor::rows() const { return rows_of(shape()); }
std::size_t Tensor::cols() const { return cols_of(shape()); }

std::vector<Scalar>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

Scalar Tensor::item() const {
  if (size() != 1) throw Error(ErrorKind::kShape, "item() on a tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), Scalar{0}); }

Tensor Tensor::detach() const { return from(shape(), values(), false); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorKind::kShape, "backward needs a single-element loss, got " +
                                       (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Node& root = *loss.node();
  root.ensure_grad();
  root.grad[0] += Scalar{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.grad.size() == n.value.size()) n.backward(n);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a, b);
  std::vector<Scalar> out(m * n);
  MapR(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() =
      view(*a.node(), m, k) * view(*b.node(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const CMapR g(self.grad.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (wants(self, 0)) grad_view(na, m, k).noalias() += g * view(nb, k, n).transpose();
    if (wants(self, 1)) grad_view(nb, k, n).noalias() += view(na, m, k).transpose() * g;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_matrix("add", a);
  require_matrix("add", b);
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !(b.rows() == 1 && b.cols() == a.cols() && b.rank() <= a.rank())) shape_error("add", a, b);
  const std::size_t cols = a.cols();
  std::vector<Scalar> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[broadcast ? i % cols : i];
  return make_result(a.shape(), std::move(out), {a, b}, [broadcast, cols](Node& self) {
    if (wants(self, 0)) {
      Node& na = *self.inputs[0];
      na.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Node& nb = *self.inputs[1];
      nb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[broadcast ? i % cols : i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, Scalar{-1})); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  std::vector<Scalar> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (wants(self, 0)) {
      na.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * nb.value[i];
    }
    if (wants(self, 1)) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, Scalar factor) {
  return unary(a, [factor](Scalar x) { return x * factor; }, [factor](Scalar, Scalar) { return factor; });
}

Tensor add_scalar(const Tensor& a, Scalar offset) {
  return unary(a, [offset](Scalar x) { return x + offset; }, [](Scalar, Scalar) { return Scalar{1}; });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (bias.rank() != 1 || bias.cols() != weight.cols()) shape_error("linear", weight, bias);
  return add(matmul(x, weight), bias);
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](Scalar v) {
        // split by sign so exp never overflows
        if (v >= 0) return Scalar{1} / (Scalar{1} + std::exp(-v));
        const Scalar e = std::exp(v);
        return e / (Scalar{1} + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar{1} - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](Scalar v) { return std::tanh(v); }, [](Scalar, Scalar y) { return Scalar{1} - y * y; });
}

Tensor gelu(const Tensor& x) {
  static constexpr Scalar kInvSqrt2 = Scalar(0.70710678118654752440);
  static constexpr Scalar kInvSqrt2Pi = Scalar(0.39894228040143267794);
  return unary(
      x, [](Scalar v) { return Scalar(0.5) * v * (Scalar{1} + std::erf(v * kInvSqrt2)); },
      [](Scalar v, Scalar) {
        return Scalar(0.5) * (Scalar{1} + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(Scalar(-0.5) * v * v);
      });
}

Tensor softmax(const Tensor& x) {
  require_matrix("softmax", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<Scalar> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = x.values().data() + r * cols;
    Scalar* o = out.data() + r * cols;
    Scalar peak = *std::max_element(in, in + cols);
    if (!std::isfinite(peak)) peak = 0;  // fully masked row
    Scalar total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  return make_result(x.shape(), out, {x}, [rows, cols, out](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* y = out.data() + r * cols;
      const Scalar* g = self.grad.data() + r * cols;
      Scalar dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
      for (std::size_t c = 0; c < cols; ++c) in.grad[r * cols + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, Scalar eps) {
  require_matrix("rms_norm", x);
  if (gain.rank() != 1 || gain.cols() != x.cols()) shape_error("rms_norm", x, gain);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<Scalar> inv(rows);
  std::vector<Scalar> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    Scalar ms = 0;
    for (std::size_t c = 0; c < cols; ++c) ms += x.values()[r * cols + c] * x.values()[r * cols + c];
    inv[r] = Scalar{1} / std::sqrt(ms / static_cast<Scalar>(cols) + eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.values()[r * cols + c] * inv[r] * gain.values()[c];
  }
  return make_result(x.shape(), std::move(out), {x, gain}, [rows, cols, inv](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ng = *self.inputs[1];
    if (wants(self, 1)) {
      ng.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          ng.grad[c] += self.grad[r * cols + c] * nx.value[r * cols + c] * inv[r];
    }
    if (wants(self, 0)) {
      nx.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        Scalar dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += ng.value[c] * self.grad[r * cols + c] * nx.value[r * cols + c];
        const Scalar k = dot * inv[r] * inv[r] * inv[r] / static_cast<Scalar>(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          nx.grad[r * cols + c] += ng.value[c] * self.grad[r * cols + c] * inv[r] - nx.value[r * cols + c] * k;
        }
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw Error(ErrorKind::kShape, "embedding table must be rank 2");
  const std::size_t vocab = table.rows(), dim = table.cols();
  std::vector<Scalar> out(ids.size() * dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw Error(ErrorKind::kOutOfRange,
                  "embedding id " + std::to_string(ids[i]) + " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * dim), dim,
                out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return make_result({ids.size(), dim}, std::move(out), {table}, [kept, dim](Node& self) {
    Node& t = *self.inputs[0];
    t.ensure_grad();
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t c = 0; c < dim; ++c) t.grad[static_cast<std::size_t>(kept[i]) * dim + c] += self.grad[i * dim + c];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.empty() || shape.size() > 2 || shape_size(shape) != x.size()) {
    throw Error(ErrorKind::kShape, "reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return make_result(std::move(shape), x.values(), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_matrix("transpose", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<Scalar> out(x.size());
  MapR(out.data(), static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows)) =
      view(*x.node(), rows, cols).transpose();
  return make_result({cols, rows}, std::move(out), {x}, [rows, cols](Node& self) {
    const CMapR g(self.grad.data(), static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows));
    grad_view(*self.inputs[0], rows, cols) += g.transpose();
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  if (begin >= end || end > x.rows()) {
    throw Error(ErrorKind::kShape, "slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") outside " + shape_string(x.shape()));
  }
  const std::size_t cols = x.cols();
  std::vector<Scalar> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          x.values().begin() + static_cast<std::ptrdiff_t>(end * cols));
  return make_result({end - begin, cols}, std::move(out), {x}, [begin, cols](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[begin * cols + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  if (begin >= end || end > x.cols()) {
    throw Error(ErrorKind::kShape, "slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") outside " + shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols(), width = end - begin;
  std::vector<Scalar> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = x.values()[r * cols + begin + c];
  return make_result({rows, width}, std::move(out), {x}, [rows, cols, begin, width](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) in.grad[r * cols + begin + c] += self.grad[r * width + c];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorKind::kShape, "concat_rows of nothing");
  const std::size_t cols = parts[0].cols();
  std::vector<Scalar> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != cols) shape_error("concat_rows", parts[0], p);
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t rows = out.size() / cols;
  return make_result({rows, cols}, std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      for (std::size_t j = 0; j < in.value.size(); ++j) in.grad[j] += self.grad[offsets[i] + j];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorKind::kShape, "concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> starts;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != rows) shape_error("concat_cols", parts[0], p);
    starts.push_back(total);
    total += p.cols();
  }
  std::vector<Scalar> out(rows * total);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::size_t w = parts[i].cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) out[r * total + starts[i] + c] = parts[i].values()[r * w + c];
  }
  return make_result({rows, total}, std::move(out), parts, [rows, total, starts](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      const std::size_t w = cols_of(in.shape);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) in.grad[r * w + c] += self.grad[r * total + starts[i] + c];
    }
  });
}

Tensor round_ste(const Tensor& x) {
  return unary(x, [](Scalar v) { return std::round(v); }, [](Scalar, Scalar) { return Scalar{1}; });
}

Tensor unfold_rows(const Tensor& x, std::size_t radius) {
  require_matrix("unfold_rows", x);
  const std::size_t rows = x.rows(), cols = x.cols(), taps = 2 * radius + 1;
  auto source = [rows, radius](std::size_t t, std::size_t k) {
    const long r = static_cast<long>(t) + static_cast<long>(k) - static_cast<long>(radius);
    return static_cast<std::size_t>(std::clamp(r, 0L, static_cast<long>(rows) - 1));
  };
  std::vector<Scalar> out(rows * taps * cols);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t k = 0; k < taps; ++k)
      for (std::size_t c = 0; c < cols; ++c) out[(t * taps + k) * cols + c] = x.values()[source(t, k) * cols + c];
  return make_result({rows, taps * cols}, std::move(out), {x}, [rows, cols, taps, source](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t k = 0; k < taps; ++k)
        for (std::size_t c = 0; c < cols; ++c) in.grad[source(t, k) * cols + c] += self.grad[(t * taps + k) * cols + c];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_matrix("cross_entropy", logits);
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw Error(ErrorKind::kShape, "cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                                       shape_string(logits.shape()));
  }
  std::vector<Scalar> probs(logits.size());
  double loss = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = logits.values().data() + r * vocab;
    const Scalar peak = *std::max_element(in, in + vocab);
    double total = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) total += std::exp(static_cast<double>(in[c] - peak));
    for (std::size_t c = 0; c < vocab; ++c)
      probs[r * vocab + c] = static_cast<Scalar>(std::exp(static_cast<double>(in[c] - peak)) / total);
    if (targets[r] == kIgnoreIndex) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw Error(ErrorKind::kOutOfRange, "cross_entropy target " + std::to_string(targets[r]) +
                                              " outside vocabulary of " + std::to_string(vocab));
    }
    loss += std::log(total) + static_cast<double>(peak) - static_cast<double>(in[targets[r]]);
    ++counted;
  }
  const Scalar value = counted ? static_cast<Scalar>(loss / static_cast<double>(counted)) : Scalar{0};
  std::vector<int> kept(targets.begin(), targets.end());
  return make_result({1}, {value}, {logits}, [rows, vocab, counted, kept, probs](Node& self) {
    if (counted == 0) return;
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const Scalar g = self.grad[0] / static_cast<Scalar>(counted);
    for (std::size_t r = 0; r < rows; ++r) {
      if (kept[r] == kIgnoreIndex) continue;
      for (std::size_t c = 0; c < vocab; ++c) in.grad[r * vocab + c] += g * probs[r * vocab + c];
      in.grad[r * vocab + static_cast<std::size_t>(kept[r])] -= g;
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mse", a, b);
  const Tensor d = sub(a, b);
  return mean(mul(d, d));
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (Scalar v : x.values()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (auto& g : in.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Scalar{1} / static_cast<Scalar>(x.size())); }

}  // namespace motionkit::nn::inline MOTIONKIT_PRECISION
