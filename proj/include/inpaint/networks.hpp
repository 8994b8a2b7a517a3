#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "inpaint/nn.hpp"

namespace inpaint {

struct GeneratorSpec {
  int levels = 3;
  std::vector<int> encoder_channels{64, 128, 128};
  std::vector<int> dilation_rates{1, 2, 4, 8};
  int conv_kernel = 3;
  int deconv_kernel = 4;
  int deconv_stride = 2;
  int convs_per_level = 2;
  bool fusion = true;

  static constexpr int kMaxChannels = 128;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Input height and width must be multiples of this.
  int resolution_multiple() const { return 1 << (levels - 1); }
};

struct DiscriminatorSpec {
  std::vector<int> channels{64, 128, 256, 512, 512};
  int kernel = 4;
  int stride = 2;
  Scalar leaky_slope = 0.2;
  bool batch_norm = true;
  int input_size = 128;

  void validate() const;
};

struct ReceptiveField {
  int size = 1;
};

void to_json(nlohmann::json& j, const GeneratorSpec& s);
void from_json(const nlohmann::json& j, GeneratorSpec& s);
void to_json(nlohmann::json& j, const DiscriminatorSpec& s);
void from_json(const nlohmann::json& j, DiscriminatorSpec& s);

// Conv -> BN -> ReLU (or LeakyReLU when slope > 0).
class ConvBnAct : public Module {
 public:
  ConvBnAct(int in, int out, int kernel, ConvGeometry geometry, Rng& rng,
            bool batch_norm = true, Scalar leaky_slope = 0);

  Var forward(const Var& x, BatchNormMode mode) const;
  std::vector<NamedVar> named_parameters() const override;
  std::vector<NamedVar> named_buffers() const override;

  const Conv2d& conv() const { return conv_; }

 private:
  Conv2d conv_;
  std::optional<BatchNorm2d> bn_;
  Scalar leaky_slope_;
};

// Multi-level dilated fully convolutional generator. Maps a 4-channel signed
// input (corrupted RGB + mask) to a 3-channel signed image of the same size.
//
//   level 0      : convs_per_level 3x3 convs at full resolution
//   level l >= 1 : stride-2 3x3 conv, then convs_per_level - 1 3x3 convs
//   bottleneck   : one 3x3 conv per dilation rate at the deepest level
//   decoder      : per level, 4x4 stride-2 deconv, optional additive skip from
//                  a 3x3 projection of the matching encoder level, 3x3 conv
//   output       : 3x3 conv to RGB, tanh
class Generator : public Module {
 public:
  Generator(GeneratorSpec spec, std::uint64_t seed);

  const GeneratorSpec& spec() const { return spec_; }

  // Throws ResolutionError unless H and W are multiples of
  // spec().resolution_multiple(). kTrain updates BN running statistics.
  Var forward(const Var& input4, BatchNormMode mode) const;
  // Encoder + bottleneck features only.
  Var encode(const Var& input4, BatchNormMode mode) const;
  // Inference: running statistics, no graph.
  Tensor generate(const Tensor& input4) const;

  void check_input(const Shape& s) const;

  std::vector<NamedVar> named_parameters() const override;
  std::vector<NamedVar> named_buffers() const override;

  // Every convolution on the encoder + bottleneck path, in order.
  std::vector<const Conv2d*> encoder_convs() const;

 private:
  struct DecoderLevel {
    ConvTranspose2d up;
    BatchNorm2d up_bn;
    std::optional<ConvBnAct> skip;
    ConvBnAct merge;
  };

  Var run_encoder(const Var& x, BatchNormMode mode, std::vector<Var>* skips) const;
  template <class Fn>
  void for_each_module(Fn&& fn) const;

  GeneratorSpec spec_;
  std::vector<std::vector<ConvBnAct>> levels_;
  std::vector<ConvBnAct> bottleneck_;
  std::vector<DecoderLevel> decoder_;  // deepest level first
  std::optional<Conv2d> out_;
};

// DCGAN-style discriminator: k4 s2 convs with LeakyReLU (BN on all but the
// first), flattened into a single logit.
class Discriminator : public Module {
 public:
  Discriminator(DiscriminatorSpec spec, std::uint64_t seed);

  const DiscriminatorSpec& spec() const { return spec_; }

  // (N,3,S,S) signed images -> (N,1,1,1) logits.
  Var forward(const Var& images, BatchNormMode mode) const;

  std::vector<NamedVar> named_parameters() const override;
  std::vector<NamedVar> named_buffers() const override;

 private:
  DiscriminatorSpec spec_;
  std::vector<ConvBnAct> convs_;
  std::optional<Linear> head_;
};

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed = 0);
Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed = 0);

// Side of the square input region influencing one bottleneck unit:
// rf += (k - 1) * dilation * jump over the encoder and bottleneck convs,
// jump being the product of earlier strides.
ReceptiveField compute_receptive_field(const GeneratorSpec& spec);

}  // namespace inpaint
