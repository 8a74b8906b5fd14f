// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace udas {

class GradientTape;

// Dense 64-bit float tensor. Image-like data uses NCHW layout. Copies are
// shallow: they share the underlying value and gradient buffers, so a Tensor
// behaves like a reference to storage (clone() makes a deep copy). Gradient
// buffers are created lazily and always match the value shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(data_); }
  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_ ? data_->size() : 0; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  double& operator[](std::size_t i) { return (*data_)[i]; }
  double operator[](std::size_t i) const { return (*data_)[i]; }

  // Value of a scalar (1-element) tensor.
  double item() const;

  // Flat offset for a 4-d index; shape must be rank 4.
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] +
           w;
  }

  bool has_grad() const { return static_cast<bool>(grad_); }
  void ensure_grad();
  void zero_grad();
  double* grad() { return grad_->data(); }
  const double* grad() const { return grad_->data(); }

  Tensor clone() const;     // deep copy, detached from any tape
  Tensor detached() const;  // shares data, detached from any tape

  std::shared_ptr<const std::vector<double>> storage() const { return data_; }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;

  // Memoized node id on the tape of generation tape_gen_.
  mutable std::uint64_t tape_gen_ = 0;
  mutable int tape_node_ = -1;

  friend class GradientTape;
};

// Reverse-mode gradient tape. Operations record themselves on the active tape
// (if any); nodes are appended in execution order, so parents always precede
// their consumers and the backward pass is a single reverse sweep that visits
// each node at most once.
class GradientTape {
 public:
  // Backward rule of one node. out_grad holds the gradient of the loss w.r.t.
  // the node output; parent_grads[i] points at the accumulation buffer of
  // parent i, or is null when that input is a constant.
  using BackwardFn =
      std::function<void(const double* out_grad, double* const* parent_grads)>;

  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active();

  // Activates a tape for the current thread for the lifetime of the scope.
  class Scope {
   public:
    explicit Scope(GradientTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradientTape* prev_;
  };

  // Marks t as a differentiable leaf. Idempotent; copies sharing t's storage
  // map to the same node. The tensor's grad buffer receives accumulated
  // gradients on every backward() call until zeroed by the caller.
  int watch(Tensor& t);

  // Node id of t on this tape, or -1 when t is a constant.
  int node_of(const Tensor& t) const;

  // Records an operation producing out from the given parent nodes (-1 slots
  // mark constant inputs).
  int record(const Tensor& out, std::vector<int> parents, BackwardFn fn);

  // Reverse sweep from a scalar loss. Gradients of watched leaves accumulate
  // into their tensors' grad buffers; repeated calls accumulate further.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    std::size_t numel = 0;
    BackwardFn backward;                             // null for leaves
    std::shared_ptr<std::vector<double>> leaf_sink;  // leaves only
  };

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> leaf_by_storage_;
  std::uint64_t generation_;
};

// ---- differentiable operations -------------------------------------------

// 2-d convolution, zero padding: input N x Cin x H x W, weight
// Cout x Cin x Kh x Kw, bias Cout. Output spatial size is
// floor((H + 2*pad - Kh) / stride) + 1 (same for W).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Elementwise x > 0 ? x : slope * x, slope in (0, 1).
Tensor leaky_relu(const Tensor& x, double slope);

// Elementwise logistic function.
Tensor sigmoid(const Tensor& x);

// Channel softmax of an N x C x H x W tensor, max-subtracted per pixel.
Tensor softmax_channel(const Tensor& x);

// Bilinear upsampling with half-pixel centers and edge clamping:
// src = (dst + 0.5) * in / out - 0.5. Requires out_h >= h, out_w >= w.
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);

// Elementwise helpers (same-shape operands).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);  // scalar

// total = sum_i weights[i] * terms[i], accumulated left to right.
Tensor weighted_sum(const std::vector<Tensor>& terms,
                    const std::vector<double>& weights);

// Convenience: backward through the active tape.
void backward(const Tensor& loss);

}  // namespace udas
