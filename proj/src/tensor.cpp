// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace udas {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* op) {
  const double* p = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i)
    assert(std::isfinite(p[i]) && "non-finite value produced by forward op");
  (void)op;
}
#else
void debug_check_finite(const Tensor&, const char*) {}
#endif

thread_local GradientTape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_generation{1};

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(shape_numel(shape_), fill)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(std::move(values))) {
  if (data_->size() != shape_numel(shape_))
    shape_error("Tensor", "value count does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
  if (numel() != 1) shape_error("item", "tensor " + shape_str(shape_) + " is not a scalar");
  return (*data_)[0];
}

void Tensor::ensure_grad() {
  if (!grad_) grad_ = std::make_shared<std::vector<double>>(numel(), 0.0);
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor out;
  out.shape_ = shape_;
  out.data_ = std::make_shared<std::vector<double>>(*data_);
  return out;
}

Tensor Tensor::detached() const {
  Tensor out;
  out.shape_ = shape_;
  out.data_ = data_;
  return out;
}

// ---- GradientTape -----------------------------------------------------------

GradientTape::GradientTape() : generation_(g_tape_generation.fetch_add(1)) {}

GradientTape::~GradientTape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

GradientTape* GradientTape::active() { return g_active_tape; }

GradientTape::Scope::Scope(GradientTape& tape) : prev_(g_active_tape) {
  g_active_tape = &tape;
}

GradientTape::Scope::~Scope() { g_active_tape = prev_; }

int GradientTape::node_of(const Tensor& t) const {
  if (!t.defined()) return -1;
  if (t.tape_gen_ == generation_) return t.tape_node_;
  auto it = leaf_by_storage_.find(t.data_.get());
  if (it != leaf_by_storage_.end()) {
    t.tape_gen_ = generation_;
    t.tape_node_ = it->second;
    return it->second;
  }
  return -1;
}

int GradientTape::watch(Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("watch: undefined tensor");
  const int existing = node_of(t);
  if (existing >= 0) return existing;
  t.ensure_grad();
  Node node;
  node.numel = t.numel();
  node.leaf_sink = t.grad_;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  leaf_by_storage_[t.data_.get()] = id;
  t.tape_gen_ = generation_;
  t.tape_node_ = id;
  return id;
}

int GradientTape::record(const Tensor& out, std::vector<int> parents, BackwardFn fn) {
  Node node;
  node.parents = std::move(parents);
  node.numel = out.numel();
  node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  out.tape_gen_ = generation_;
  out.tape_node_ = id;
  return id;
}

void GradientTape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  const int root = node_of(loss);
  if (root < 0)
    throw std::invalid_argument("backward: loss is not recorded on this tape");

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[static_cast<std::size_t>(root)].assign(1, 1.0);

  std::vector<double*> parent_ptrs;
  for (int id = root; id >= 0; --id) {
    auto& g = grads[static_cast<std::size_t>(id)];
    if (g.empty()) continue;
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.backward) {
      parent_ptrs.clear();
      for (int p : node.parents) {
        if (p < 0) {
          parent_ptrs.push_back(nullptr);
          continue;
        }
        auto& pg = grads[static_cast<std::size_t>(p)];
        if (pg.empty()) pg.assign(nodes_[static_cast<std::size_t>(p)].numel, 0.0);
        parent_ptrs.push_back(pg.data());
      }
      node.backward(g.data(), parent_ptrs.data());
    }
    if (node.leaf_sink) {
      auto& sink = *node.leaf_sink;
      for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
    }
    g.clear();
    g.shrink_to_fit();
  }
}

void backward(const Tensor& loss) {
  GradientTape* tape = GradientTape::active();
  if (!tape) throw std::logic_error("backward: no active gradient tape");
  tape->backward(loss);
}

// ---- operations -------------------------------------------------------------

namespace {

// Shared record helper: if any input is on the active tape, record fn.
void maybe_record(const Tensor& out, std::initializer_list<const Tensor*> inputs,
                  const std::function<GradientTape::BackwardFn()>& make_fn) {
  GradientTape* tape = GradientTape::active();
  if (!tape) return;
  std::vector<int> parents;
  bool any = false;
  for (const Tensor* t : inputs) {
    const int id = tape->node_of(*t);
    parents.push_back(id);
    any = any || id >= 0;
  }
  if (!any) return;
  tape->record(out, std::move(parents), make_fn());
}

}  // namespace

namespace {

// Unrolled patch matrix layouts for the convolution kernels. col is
// [Cin*Kh*Kw, Ho*Wo] (row index matches the weight layout), colT is its
// transpose; both keep the hot GEMM loops unit-stride.
struct ConvDims {
  int c_in, h, w, kh, kw, stride, pad, h_out, w_out;
  int patch() const { return c_in * kh * kw; }
  int pixels() const { return h_out * w_out; }
};

void im2col(const double* in, const ConvDims& d, double* col) {
  const int pixels = d.pixels();
  for (int ci = 0; ci < d.c_in; ++ci) {
    const double* plane = in + static_cast<std::size_t>(ci) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double* row = col + (static_cast<std::size_t>(ci) * d.kh * d.kw + ky * d.kw + kx) * pixels;
        for (int oy = 0; oy < d.h_out; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          double* dst = row + oy * d.w_out;
          if (iy < 0 || iy >= d.h) {
            for (int ox = 0; ox < d.w_out; ++ox) dst[ox] = 0.0;
            continue;
          }
          const double* src = plane + iy * d.w;
          for (int ox = 0; ox < d.w_out; ++ox) {
            const int ix = ox * d.stride + kx - d.pad;
            dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void im2colT(const double* in, const ConvDims& d, double* colT) {
  const int patch = d.patch();
  for (int oy = 0; oy < d.h_out; ++oy) {
    for (int ox = 0; ox < d.w_out; ++ox) {
      double* row = colT + (static_cast<std::size_t>(oy) * d.w_out + ox) * patch;
      int k = 0;
      for (int ci = 0; ci < d.c_in; ++ci) {
        const double* plane = in + static_cast<std::size_t>(ci) * d.h * d.w;
        for (int ky = 0; ky < d.kh; ++ky) {
          const int iy = oy * d.stride + ky - d.pad;
          for (int kx = 0; kx < d.kw; ++kx, ++k) {
            const int ix = ox * d.stride + kx - d.pad;
            row[k] = (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                         ? plane[iy * d.w + ix]
                         : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvDims& d, double* gin) {
  const int pixels = d.pixels();
  for (int ci = 0; ci < d.c_in; ++ci) {
    double* plane = gin + static_cast<std::size_t>(ci) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* row =
            col + (static_cast<std::size_t>(ci) * d.kh * d.kw + ky * d.kw + kx) * pixels;
        for (int oy = 0; oy < d.h_out; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.h) continue;
          const double* src = row + oy * d.w_out;
          double* dst = plane + iy * d.w;
          for (int ox = 0; ox < d.w_out; ++ox) {
            const int ix = ox * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// C[r, :] += sum_k A[r, k] * B[k, :], tiled over r so that B streams through
// the cache once per tile instead of once per row. Accumulation order over k
// is fixed, so results do not depend on the tile width.
void gemm_acc(const double* __restrict__ a, const double* __restrict__ b,
              double* __restrict__ c, int rows, int inner, int n) {
  constexpr int kTile = 8;
  int r0 = 0;
  for (; r0 + kTile <= rows; r0 += kTile) {
    double* crow[kTile];
    const double* arow[kTile];
    for (int t = 0; t < kTile; ++t) {
      crow[t] = c + static_cast<std::size_t>(r0 + t) * n;
      arow[t] = a + static_cast<std::size_t>(r0 + t) * inner;
    }
    for (int k = 0; k < inner; ++k) {
      const double* brow = b + static_cast<std::size_t>(k) * n;
      double av[kTile];
      for (int t = 0; t < kTile; ++t) av[t] = arow[t][k];
      for (int i = 0; i < n; ++i) {
        const double bv = brow[i];
        for (int t = 0; t < kTile; ++t) crow[t][i] += av[t] * bv;
      }
    }
  }
  for (; r0 < rows; ++r0) {
    double* crow = c + static_cast<std::size_t>(r0) * n;
    const double* arow = a + static_cast<std::size_t>(r0) * inner;
    for (int k = 0; k < inner; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<std::size_t>(k) * n;
      for (int i = 0; i < n; ++i) crow[i] += av * brow[i];
    }
  }
}

// C[k, :] += sum_r A[r, k] * B[r, :]  (A accessed column-wise), tiled over k.
void gemm_acc_at(const double* __restrict__ a, const double* __restrict__ b,
                 double* __restrict__ c, int rows, int inner, int n) {
  constexpr int kTile = 8;
  int k0 = 0;
  for (; k0 + kTile <= inner; k0 += kTile) {
    double* crow[kTile];
    for (int t = 0; t < kTile; ++t) crow[t] = c + static_cast<std::size_t>(k0 + t) * n;
    for (int r = 0; r < rows; ++r) {
      const double* brow = b + static_cast<std::size_t>(r) * n;
      const double* arow = a + static_cast<std::size_t>(r) * inner;
      double av[kTile];
      for (int t = 0; t < kTile; ++t) av[t] = arow[k0 + t];
      for (int i = 0; i < n; ++i) {
        const double bv = brow[i];
        for (int t = 0; t < kTile; ++t) crow[t][i] += av[t] * bv;
      }
    }
  }
  for (; k0 < inner; ++k0) {
    double* crow = c + static_cast<std::size_t>(k0) * n;
    for (int r = 0; r < rows; ++r) {
      const double av = a[static_cast<std::size_t>(r) * inner + k0];
      const double* brow = b + static_cast<std::size_t>(r) * n;
      for (int i = 0; i < n; ++i) crow[i] += av * brow[i];
    }
  }
}

void conv_forward_batch(const double* in, const double* wt, const double* bs,
                        const ConvDims& d, int c_out, double* out,
                        std::vector<double>& col) {
  const int pixels = d.pixels();
  const int patch = d.patch();
  im2col(in, d, col.data());
  for (int co = 0; co < c_out; ++co) {
    double* orow = out + static_cast<std::size_t>(co) * pixels;
    const double bv = bs[co];
    for (int i = 0; i < pixels; ++i) orow[i] = bv;
  }
  gemm_acc(wt, col.data(), out, c_out, patch, pixels);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  if (input.ndim() != 4 || weight.ndim() != 4)
    shape_error("conv2d", "input and weight must be rank-4, got " +
                              shape_str(input.shape()) + " and " + shape_str(weight.shape()));
  if (stride < 1) shape_error("conv2d", "stride must be >= 1");
  if (padding < 0) shape_error("conv2d", "padding must be >= 0");
  const int n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c_in)
    shape_error("conv2d", "input channels " + std::to_string(c_in) +
                              " do not match weight " + shape_str(weight.shape()));
  if (bias.ndim() != 1 || bias.dim(0) != c_out)
    shape_error("conv2d", "bias must have shape [" + std::to_string(c_out) + "]");
  if (kh > h + 2 * padding || kw > w + 2 * padding)
    shape_error("conv2d", "kernel " + shape_str(weight.shape()) +
                              " larger than padded input " + shape_str(input.shape()));

  const ConvDims dims{c_in, h,
                      w,    kh,
                      kw,   stride,
                      padding, (h + 2 * padding - kh) / stride + 1,
                      (w + 2 * padding - kw) / stride + 1};
  Tensor out({n_batch, c_out, dims.h_out, dims.w_out});

  {
    // scratch reused across calls; conv dominates the runtime and fresh
    // multi-megabyte allocations would page-fault on every op
    thread_local std::vector<double> col;
    col.resize(static_cast<std::size_t>(dims.patch()) * dims.pixels());
    const double* in = input.data();
    double* op = out.data();
    for (int n = 0; n < n_batch; ++n)
      conv_forward_batch(in + static_cast<std::size_t>(n) * c_in * h * w, weight.data(),
                         bias.data(), dims, c_out,
                         op + static_cast<std::size_t>(n) * c_out * dims.pixels(), col);
  }
  debug_check_finite(out, "conv2d");

  maybe_record(out, {&input, &weight, &bias}, [&] {
    auto in_store = input.storage();
    auto w_store = weight.storage();
    return [=](const double* go, double* const* pg) {
      const int pixels = dims.pixels();
      const int patch = dims.patch();
      const double* in_p = in_store->data();
      const double* w_p = w_store->data();
      double* gin = pg[0];
      double* gw = pg[1];
      double* gb = pg[2];
      thread_local std::vector<double> scratch;
      for (int n = 0; n < n_batch; ++n) {
        const double* go_n = go + static_cast<std::size_t>(n) * c_out * pixels;
        const double* in_n = in_p + static_cast<std::size_t>(n) * c_in * h * w;
        if (gb) {
          for (int co = 0; co < c_out; ++co) {
            const double* grow = go_n + static_cast<std::size_t>(co) * pixels;
            double acc = 0.0;
            for (int i = 0; i < pixels; ++i) acc += grow[i];
            gb[co] += acc;
          }
        }
        if (gw) {
          scratch.resize(static_cast<std::size_t>(pixels) * patch);
          im2colT(in_n, dims, scratch.data());
          gemm_acc(go_n, scratch.data(), gw, c_out, pixels, patch);
        }
        if (gin) {
          scratch.assign(static_cast<std::size_t>(patch) * pixels, 0.0);
          gemm_acc_at(w_p, go_n, scratch.data(), c_out, patch, pixels);
          col2im_add(scratch.data(), dims,
                     gin + static_cast<std::size_t>(n) * c_in * h * w);
        }
      }
    };
  });
  return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (slope <= 0.0 || slope >= 1.0)
    throw std::invalid_argument("leaky_relu: slope must lie in (0,1)");
  Tensor out(x.shape());
  const double* in = x.data();
  double* op = out.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) op[i] = in[i] > 0.0 ? in[i] : slope * in[i];
  debug_check_finite(out, "leaky_relu");

  maybe_record(out, {&x}, [&] {
    auto in_store = x.storage();
    return [=](const double* go, double* const* pg) {
      double* gx = pg[0];
      if (!gx) return;
      const double* in_p = in_store->data();
      for (std::size_t i = 0; i < in_store->size(); ++i)
        gx[i] += go[i] * (in_p[i] > 0.0 ? 1.0 : slope);
    };
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* op = out.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) op[i] = 1.0 / (1.0 + std::exp(-in[i]));
  debug_check_finite(out, "sigmoid");

  maybe_record(out, {&x}, [&] {
    auto out_store = out.storage();
    return [=](const double* go, double* const* pg) {
      double* gx = pg[0];
      if (!gx) return;
      const double* s = out_store->data();
      for (std::size_t i = 0; i < out_store->size(); ++i)
        gx[i] += go[i] * s[i] * (1.0 - s[i]);
    };
  });
  return out;
}

Tensor softmax_channel(const Tensor& x) {
  if (x.ndim() != 4) shape_error("softmax_channel", "expects N x C x H x W, got " + shape_str(x.shape()));
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c < 2) shape_error("softmax_channel", "needs at least 2 channels");
  Tensor out(x.shape());
  const double* in = x.data();
  double* op = out.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < nb; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double mx = in[base + p];
      for (int k = 1; k < c; ++k) mx = std::max(mx, in[base + k * plane + p]);
      double denom = 0.0;
      for (int k = 0; k < c; ++k) {
        const double e = std::exp(in[base + k * plane + p] - mx);
        op[base + k * plane + p] = e;
        denom += e;
      }
      for (int k = 0; k < c; ++k) op[base + k * plane + p] /= denom;
    }
  }
  debug_check_finite(out, "softmax_channel");

  maybe_record(out, {&x}, [&] {
    auto out_store = out.storage();
    return [=](const double* go, double* const* pg) {
      double* gx = pg[0];
      if (!gx) return;
      const double* s = out_store->data();
      const std::size_t pl = static_cast<std::size_t>(h) * w;
      for (int n = 0; n < nb; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * c * pl;
        for (std::size_t p = 0; p < pl; ++p) {
          double dot = 0.0;
          for (int k = 0; k < c; ++k)
            dot += go[base + k * pl + p] * s[base + k * pl + p];
          for (int k = 0; k < c; ++k) {
            const std::size_t i = base + k * pl + p;
            gx[i] += s[i] * (go[i] - dot);
          }
        }
      }
    };
  });
  return out;
}

namespace {

struct BilinearAxis {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

BilinearAxis bilinear_axis(int in_size, int out_size) {
  BilinearAxis ax;
  ax.lo.resize(static_cast<std::size_t>(out_size));
  ax.hi.resize(static_cast<std::size_t>(out_size));
  ax.frac.resize(static_cast<std::size_t>(out_size));
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in_size - 1) src = in_size - 1;
    const int lo = static_cast<int>(std::floor(src));
    ax.lo[static_cast<std::size_t>(i)] = lo;
    ax.hi[static_cast<std::size_t>(i)] = std::min(lo + 1, in_size - 1);
    ax.frac[static_cast<std::size_t>(i)] = src - lo;
  }
  return ax;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
  if (x.ndim() != 4) shape_error("bilinear_upsample", "expects N x C x H x W");
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h < h || out_w < w)
    shape_error("bilinear_upsample", "output size must not shrink the input");
  const BilinearAxis ay = bilinear_axis(h, out_h);
  const BilinearAxis axx = bilinear_axis(w, out_w);
  Tensor out({nb, c, out_h, out_w});
  const double* in = x.data();
  double* op = out.data();
  for (int n = 0; n < nb; ++n) {
    for (int k = 0; k < c; ++k) {
      const double* ip = in + (static_cast<std::size_t>(n) * c + k) * h * w;
      double* o = op + (static_cast<std::size_t>(n) * c + k) * out_h * out_w;
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = ay.lo[oy], y1 = ay.hi[oy];
        const double fy = ay.frac[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = axx.lo[ox], x1 = axx.hi[ox];
          const double fx = axx.frac[ox];
          const double top = ip[y0 * w + x0] * (1 - fx) + ip[y0 * w + x1] * fx;
          const double bot = ip[y1 * w + x0] * (1 - fx) + ip[y1 * w + x1] * fx;
          o[oy * out_w + ox] = top * (1 - fy) + bot * fy;
        }
      }
    }
  }
  debug_check_finite(out, "bilinear_upsample");

  maybe_record(out, {&x}, [&] {
    return [=](const double* go, double* const* pg) {
      double* gx = pg[0];
      if (!gx) return;
      for (int n = 0; n < nb; ++n) {
        for (int k = 0; k < c; ++k) {
          double* g = gx + (static_cast<std::size_t>(n) * c + k) * h * w;
          const double* gout = go + (static_cast<std::size_t>(n) * c + k) * out_h * out_w;
          for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = ay.lo[oy], y1 = ay.hi[oy];
            const double fy = ay.frac[oy];
            for (int ox = 0; ox < out_w; ++ox) {
              const int x0 = axx.lo[ox], x1 = axx.hi[ox];
              const double fx = axx.frac[ox];
              const double gv = gout[oy * out_w + ox];
              g[y0 * w + x0] += gv * (1 - fy) * (1 - fx);
              g[y0 * w + x1] += gv * (1 - fy) * fx;
              g[y1 * w + x0] += gv * fy * (1 - fx);
              g[y1 * w + x1] += gv * fy * fx;
            }
          }
        }
      }
    };
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    shape_error("add", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  maybe_record(out, {&a, &b}, [&] {
    return [n](const double* go, double* const* pg) {
      for (int s = 0; s < 2; ++s)
        if (pg[s])
          for (std::size_t i = 0; i < n; ++i) pg[s][i] += go[i];
    };
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    shape_error("mul", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  maybe_record(out, {&a, &b}, [&] {
    auto a_store = a.storage();
    auto b_store = b.storage();
    return [=](const double* go, double* const* pg) {
      const double* ap = a_store->data();
      const double* bp = b_store->data();
      if (pg[0])
        for (std::size_t i = 0; i < n; ++i) pg[0][i] += go[i] * bp[i];
      if (pg[1])
        for (std::size_t i = 0; i < n; ++i) pg[1][i] += go[i] * ap[i];
    };
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = factor * x[i];
  maybe_record(out, {&x}, [&] {
    return [=](const double* go, double* const* pg) {
      if (pg[0])
        for (std::size_t i = 0; i < n; ++i) pg[0][i] += factor * go[i];
    };
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  Tensor out = Tensor::scalar(acc);
  maybe_record(out, {&x}, [&] {
    return [n](const double* go, double* const* pg) {
      if (pg[0])
        for (std::size_t i = 0; i < n; ++i) pg[0][i] += go[0];
    };
  });
  return out;
}

Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size())
    throw std::invalid_argument("weighted_sum: terms/weights size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].numel() != 1)
      throw std::invalid_argument("weighted_sum: all terms must be scalars");
    acc += weights[i] * terms[i].item();
  }
  Tensor out = Tensor::scalar(acc);
  GradientTape* tape = GradientTape::active();
  if (tape) {
    std::vector<int> parents;
    bool any = false;
    for (const Tensor& t : terms) {
      const int id = tape->node_of(t);
      parents.push_back(id);
      any = any || id >= 0;
    }
    if (any) {
      const auto w = weights;
      tape->record(out, std::move(parents), [w](const double* go, double* const* pg) {
        for (std::size_t i = 0; i < w.size(); ++i)
          if (pg[i]) pg[i][0] += go[0] * w[i];
      });
    }
  }
  return out;
}

}  // namespace udas
