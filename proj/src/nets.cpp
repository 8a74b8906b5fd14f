// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/nets.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "udas/rng.hpp"

namespace udas {

namespace {

// Kaiming fan-in initialization with the leaky-ReLU gain.
Tensor init_conv_weight(int c_out, int c_in, int k, double leaky_slope, Rng& rng) {
  Tensor w({c_out, c_in, k, k});
  const double fan_in = static_cast<double>(c_in) * k * k;
  const double gain = std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
  const double stddev = gain / std::sqrt(fan_in);
  double* p = w.data();
  for (std::size_t i = 0; i < w.numel(); ++i) p[i] = stddev * rng.normal();
  return w;
}

Network::Layer make_layer(std::string name, int c_in, int c_out, int k, int stride,
                          int padding, Network::Activation act,
                          Network::Upsample upsample_before, double leaky_slope,
                          Rng& rng) {
  Network::Layer layer;
  layer.name = std::move(name);
  layer.weight = init_conv_weight(c_out, c_in, k, leaky_slope, rng);
  layer.bias = Tensor({c_out}, 0.0);
  layer.weight.ensure_grad();
  layer.bias.ensure_grad();
  layer.stride = stride;
  layer.padding = padding;
  layer.activation = act;
  layer.upsample_before = upsample_before;
  return layer;
}

}  // namespace

Tensor Network::forward(const Tensor& input) const {
  if (input.ndim() != 4)
    throw std::invalid_argument("Network::forward: input must be N x C x H x W");
  if (!layers_.empty() && input.dim(1) != layers_.front().weight.dim(1))
    throw std::invalid_argument(
        "Network::forward: input has " + std::to_string(input.dim(1)) +
        " channels, first layer expects " + std::to_string(layers_.front().weight.dim(1)));
  const int in_h = input.dim(2), in_w = input.dim(3);
  Tensor x = input;
  for (const Layer& layer : layers_) {
    if (layer.upsample_before == Upsample::Double)
      x = bilinear_upsample(x, 2 * x.dim(2), 2 * x.dim(3));
    else if (layer.upsample_before == Upsample::ToInput &&
             (x.dim(2) != in_h || x.dim(3) != in_w))
      x = bilinear_upsample(x, in_h, in_w);
    x = conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding);
    switch (layer.activation) {
      case Activation::LeakyRelu:
        x = leaky_relu(x, leaky_slope_);
        break;
      case Activation::Sigmoid:
        x = sigmoid(x);
        break;
      case Activation::None:
        break;
    }
  }
  if (upsample_output_to_input_ && (x.dim(2) != in_h || x.dim(3) != in_w))
    x = bilinear_upsample(x, in_h, in_w);
  return x;
}

void Network::watch_params(GradientTape& tape) {
  for (Layer& layer : layers_) {
    tape.watch(layer.weight);
    tape.watch(layer.bias);
  }
}

std::vector<Tensor> Network::params() {
  std::vector<Tensor> out;
  for (Layer& layer : layers_) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> Network::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (Layer& layer : layers_) {
    out.emplace_back(layer.name + ".weight", layer.weight);
    out.emplace_back(layer.name + ".bias", layer.bias);
  }
  return out;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weight.numel() + layer.bias.numel();
  return n;
}

void Network::zero_grads() {
  for (Layer& layer : layers_) {
    layer.weight.zero_grad();
    layer.bias.zero_grad();
  }
}

Network build_generator(int num_classes, int base_width, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("build_generator: num_classes must be >= 2");
  if (base_width < 4) throw std::invalid_argument("build_generator: base_width must be >= 4");
  Rng rng = Rng::derive(seed, 0x67656e);
  const int w = base_width;
  Network net;
  net.role_ = Network::Role::Generator;
  net.leaky_slope_ = 0.2;
  using Act = Network::Activation;
  using Up = Network::Upsample;
  net.layers_.push_back(make_layer("enc1", 3, w, 3, 2, 1, Act::LeakyRelu, Up::None, 0.2, rng));
  net.layers_.push_back(make_layer("enc2", w, 2 * w, 3, 2, 1, Act::LeakyRelu, Up::None, 0.2, rng));
  net.layers_.push_back(make_layer("enc3", 2 * w, 4 * w, 3, 2, 1, Act::LeakyRelu, Up::None, 0.2, rng));
  net.layers_.push_back(make_layer("dec1", 4 * w, 2 * w, 3, 1, 1, Act::LeakyRelu, Up::Double, 0.2, rng));
  net.layers_.push_back(make_layer("dec2", 2 * w, w, 3, 1, 1, Act::LeakyRelu, Up::Double, 0.2, rng));
  net.layers_.push_back(make_layer("head", w, num_classes, 3, 1, 1, Act::None, Up::ToInput, 0.2, rng));
  return net;
}

Network build_discriminator(const DiscriminatorSpec& spec, int in_channels,
                            std::uint64_t seed) {
  if (spec.channels.size() != 5)
    throw std::invalid_argument("build_discriminator: spec must list exactly 5 channel counts");
  if (spec.channels.back() != 1)
    throw std::invalid_argument("build_discriminator: final layer must have 1 channel");
  if (in_channels < 2)
    throw std::invalid_argument("build_discriminator: in_channels must be >= 2");
  Rng rng = Rng::derive(seed, 0x64697363);
  Network net;
  net.role_ = Network::Role::Discriminator;
  net.leaky_slope_ = spec.leaky_slope;
  net.upsample_output_to_input_ = spec.upsample_to_input;
  using Act = Network::Activation;
  int c_in = in_channels;
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    const int c_out = spec.channels[i];
    const bool last = i + 1 == spec.channels.size();
    net.layers_.push_back(make_layer("conv" + std::to_string(i + 1), c_in, c_out,
                                     spec.kernel, spec.stride, 1,
                                     last ? Act::Sigmoid : Act::LeakyRelu,
                                     Network::Upsample::None, spec.leaky_slope, rng));
    c_in = c_out;
  }
  return net;
}

// ---- checkpoint I/O ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'D', 'A', 'S'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ofstream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

std::uint32_t read_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::ifstream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::ifstream& is) {
  const std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(tensor.ndim()));
    for (int i = 0; i < tensor.ndim(); ++i)
      write_u64(os, static_cast<std::uint64_t>(tensor.dim(i)));
    const double* p = tensor.data();
    for (std::size_t i = 0; i < tensor.numel(); ++i) write_f64(os, p[i]);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = read_u32(is);
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(is);
    std::vector<int> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<int>(read_u64(is));
    Tensor t(shape);
    double* p = t.data();
    for (std::size_t i = 0; i < t.numel(); ++i) p[i] = read_f64(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    entries.emplace_back(std::move(name), std::move(t));
  }
  return entries;
}

void load_into_network(const std::vector<std::pair<std::string, Tensor>>& entries,
                       const std::string& prefix, Network& net) {
  for (auto& [name, param] : net.named_params()) {
    const std::string full = prefix + name;
    const Tensor* found = nullptr;
    for (const auto& [ename, tensor] : entries)
      if (ename == full) {
        found = &tensor;
        break;
      }
    if (!found) throw std::runtime_error("checkpoint is missing parameter " + full);
    if (found->shape() != param.shape())
      throw std::runtime_error("checkpoint parameter " + full + " has mismatched shape");
    std::memcpy(param.data(), found->data(), param.numel() * sizeof(double));
  }
}

}  // namespace udas
