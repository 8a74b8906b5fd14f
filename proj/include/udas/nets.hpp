// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "udas/tensor.hpp"

namespace udas {

// Stack of 5 stride-2 convolutions ending in a single sigmoid channel that is
// bilinearly upsampled back to the input resolution.
struct DiscriminatorSpec {
  std::vector<int> channels;  // exactly 5 output-channel counts
  int kernel = 4;
  int stride = 2;
  double leaky_slope = 0.2;
  bool upsample_to_input = true;

  static DiscriminatorSpec d1() { return {{64, 64, 128, 128, 1}}; }
  static DiscriminatorSpec d2() { return {{48, 48, 96, 96, 1}}; }
};

// A plain feed-forward convolutional network. Layers run in order; a layer
// may upsample its input by 2x first (decoder stages). Discriminators carry
// a final upsample back to the original input size.
class Network {
 public:
  enum class Role { Generator, Discriminator };

  enum class Activation { None, LeakyRelu, Sigmoid };

  // Optional upsampling applied to a layer's input: Double is a 2x decoder
  // stage, ToInput restores the exact network-input size (keeps the output
  // aligned for sizes that are not multiples of 8).
  enum class Upsample { None, Double, ToInput };

  struct Layer {
    std::string name;
    Tensor weight;  // Cout x Cin x K x K
    Tensor bias;    // Cout
    int stride = 1;
    int padding = 1;
    Activation activation = Activation::None;
    Upsample upsample_before = Upsample::None;
  };

  Role role() const { return role_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  double leaky_slope() const { return leaky_slope_; }

  // Forward pass; records on the active tape when one is present.
  Tensor forward(const Tensor& input) const;

  // Marks every parameter as differentiable on the tape.
  void watch_params(GradientTape& tape);

  std::vector<Tensor> params();
  std::vector<std::pair<std::string, Tensor>> named_params();
  std::size_t param_count() const;
  void zero_grads();

 private:
  Role role_ = Role::Generator;
  std::vector<Layer> layers_;
  bool upsample_output_to_input_ = false;
  double leaky_slope_ = 0.2;

  friend Network build_generator(int, int, std::uint64_t);
  friend Network build_discriminator(const DiscriminatorSpec&, int, std::uint64_t);
};

// Compact encoder-decoder segmentation network: three stride-2 encoder
// stages followed by three upsample+conv decoder stages; output logits have
// the input's spatial size and num_classes channels.
Network build_generator(int num_classes, int base_width, std::uint64_t seed);

// Fully convolutional discriminator per spec (4x4 kernels, stride 2,
// leaky ReLU, final sigmoid + upsample to input resolution).
Network build_discriminator(const DiscriminatorSpec& spec, int in_channels,
                            std::uint64_t seed);

// ---- checkpoint I/O ---------------------------------------------------------
// Little-endian binary format: magic "UDAS", u32 version, u32 entry count,
// then per entry: u32 name length, name bytes, u32 rank, u64 dims[rank],
// f64 payload.

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

// Copies checkpoint entries with the given prefix (e.g. "G.") into net's
// parameters; throws if a parameter is missing or shaped differently.
void load_into_network(const std::vector<std::pair<std::string, Tensor>>& entries,
                       const std::string& prefix, Network& net);

}  // namespace udas
