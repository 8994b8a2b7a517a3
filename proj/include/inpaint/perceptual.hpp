#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "inpaint/nn.hpp"

namespace inpaint {

enum class BackboneKind {
  kPretrainedVgg16,  // weights read from a file
  kRandomFallback,   // seeded VGG16-shaped network with narrow layers
};

struct PerceptualSpec {
  // ReLU outputs of these VGG16 convolutions, e.g. "conv3_2".
  std::vector<std::string> layer_taps{"conv3_2", "conv4_2", "conv5_2"};
  std::vector<Scalar> layer_weights{1.0, 1.0, 1.0};
  BackboneKind backbone = BackboneKind::kRandomFallback;
  std::filesystem::path weights_path;
  std::uint64_t fallback_seed = 0;
  // Block-1 width of the fallback; later blocks use 2x, 4x, 8x, 8x.
  int fallback_width = 8;

  void validate() const;
};

void to_json(nlohmann::json& j, const PerceptualSpec& s);
void from_json(const nlohmann::json& j, PerceptualSpec& s);

// Frozen VGG16-layout feature extractor. Parameters never take gradients;
// gradients do flow back to the input image.
class FeatureExtractor {
 public:
  struct ConvLayer {
    std::string name;  // convB_I
    int block;         // 1-based
    Conv2d conv;
  };

  const std::vector<std::string>& taps() const { return taps_; }
  // Downsampling factor of each tap relative to the input.
  std::vector<int> tap_strides() const;
  // Input sides must be multiples of this.
  int required_multiple() const;
  BackboneKind kind() const { return kind_; }

  // One feature tensor per tap, in tap order. img is (N,3,H,W) signed.
  std::vector<Var> extract(const Var& img) const;

  std::vector<NamedVar> named_parameters() const;
  const std::vector<ConvLayer>& layers() const { return layers_; }

 private:
  friend FeatureExtractor load_backbone(const PerceptualSpec& spec);

  BackboneKind kind_ = BackboneKind::kRandomFallback;
  std::vector<ConvLayer> layers_;
  std::vector<std::string> taps_;
  std::vector<std::size_t> tap_layer_;  // index into layers_
  // signed [-1,1] -> backbone normalisation, per RGB channel.
  std::array<Scalar, 3> input_scale_{};
  std::array<Scalar, 3> input_shift_{};
};

// Throws LoadError naming the file when it is missing or malformed and
// ConfigError for unknown layer names.
FeatureExtractor load_backbone(const PerceptualSpec& spec);

std::vector<Var> extract_features(const FeatureExtractor& extractor, const Var& img);

// Conventional VGG16 conv names up to conv5_3, in forward order.
const std::vector<std::string>& vgg16_conv_names();

// Binary weights file: "INPVGG16", u32 version, u32 layer count, then per
// layer u32 name length, name, u32 out/in/kh/kw, f32 weights, f32 bias.
// Little-endian.
struct BackboneLayerWeights {
  std::string name;
  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (1, out, 1, 1)
};
void write_backbone_weights(const std::filesystem::path& path,
                            const std::vector<BackboneLayerWeights>& layers);
std::vector<BackboneLayerWeights> read_backbone_weights(const std::filesystem::path& path);

}  // namespace inpaint
