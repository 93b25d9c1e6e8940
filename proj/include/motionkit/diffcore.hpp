#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionkit/common.hpp"
#include "motionkit/precision.hpp"

/// Reverse-mode differentiation over small dense row-major tensors.
///
/// Every op returns a fresh Tensor. When any input requires a gradient the
/// result remembers its inputs and a closure that pushes its gradient back to
/// them; `backward` orders those records topologically and replays them in
/// reverse. Most ops work on rank-2 tensors [rows, cols]; a rank-1 tensor of
/// length n broadcasts as a single row where noted.
namespace motionkit::nn::inline MOTIONKIT_PRECISION {

#if defined(MOTIONKIT_SCALAR_DOUBLE)
using Scalar = double;
#else
using Scalar = float;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into inputs

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Scalar{0});
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  /// Leading extent for rank 2, 1 for rank 1.
  std::size_t rows() const;
  /// Trailing extent.
  std::size_t cols() const;

  std::vector<Scalar>& values() { return node_->value; }
  const std::vector<Scalar>& values() const { return node_->value; }
  /// Gradient buffer; zero-filled on first access.
  std::vector<Scalar>& grad();
  const std::vector<Scalar>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  Scalar item() const;
  Scalar at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();
  /// Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Runs reverse accumulation from a single-element tensor. Leaves keep their
/// gradients (added to whatever they held before).
void backward(const Tensor& loss);

// ---- primitives ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise sum; `b` may also be a single row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar factor);
Tensor add_scalar(const Tensor& a, Scalar offset);
/// x W + b with x [m, k], W [k, n], b [n].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Exact form 0.5 x (1 + erf(x / sqrt 2)).
Tensor gelu(const Tensor& x);
/// Row-wise softmax over the last axis.
Tensor softmax(const Tensor& x);
/// x / sqrt(mean(x^2) + eps) * gain, per row.
Tensor rms_norm(const Tensor& x, const Tensor& gain, Scalar eps = Scalar(1e-6));
/// Rows of `table` [V, d] selected by `ids`; result [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Rounds half away from zero; the gradient passes through unchanged.
Tensor round_ste(const Tensor& x);
/// Each output row t holds input rows t - radius .. t + radius side by side;
/// rows outside the sequence repeat the nearest edge row. [T, C] -> [T, (2 radius + 1) C].
Tensor unfold_rows(const Tensor& x, std::size_t radius);

constexpr int kIgnoreIndex = -1;
/// Mean over rows with a target other than kIgnoreIndex of
/// logsumexp(logits_r) - logits_r[target_r]. Returns 0 when every row is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- parameters, optimizer, checkpoints ----------------------------------

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered parameter collection. Order fixes the checkpoint layout and the
/// random draw order at initialization.
class ParameterStore {
 public:
  /// Gaussian init with the given standard deviation (0 gives zeros).
  Tensor& add(const std::string& name, Shape shape, Scalar stddev, Rng& rng);
  Tensor& add_constant(const std::string& name, Shape shape, Scalar value);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update using the gradients held by `params`.
/// Parameters without a gradient are treated as having a zero gradient.
/// Returns the gradient norm before clipping.
double adam_step(ParameterStore& params, AdamState& state, const AdamConfig& config);

struct Checkpoint {
  std::string kind;  // "fsq" or "generator"
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<float>> values;
};

/// Framed file: JSON manifest (names, shapes, payload offsets, seed, step,
/// config and its hash) followed by little-endian float32 values.
void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const ParameterStore& params,
                     const nlohmann::json& config, std::uint64_t seed, std::size_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies checkpoint values into an identically laid-out store.
void restore_parameters(const Checkpoint& checkpoint, ParameterStore& params);

/// SHA-256 of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& config);

}  // namespace motionkit::nn::inline MOTIONKIT_PRECISION
