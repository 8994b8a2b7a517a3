#include "inpaint/perceptual.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "inpaint/errors.hpp"
#include "inpaint/ops.hpp"
#include "json_fields.hpp"

namespace inpaint {

namespace {

namespace jf = json_fields;

constexpr std::array<int, 5> kBlockDepth{2, 2, 3, 3, 3};
constexpr std::array<int, 5> kVggWidth{64, 128, 256, 512, 512};
constexpr std::array<int, 5> kFallbackMultiplier{1, 2, 4, 8, 8};
// ImageNet statistics expected by the pretrained VGG16 on [0,1] RGB input.
constexpr std::array<Scalar, 3> kVggMean{0.485, 0.456, 0.406};
constexpr std::array<Scalar, 3> kVggStd{0.229, 0.224, 0.225};
constexpr char kMagic[8] = {'I', 'N', 'P', 'V', 'G', 'G', '1', '6'};
constexpr std::uint32_t kWeightsVersion = 1;

int block_of(const std::string& name) { return name[4] - '0'; }

std::size_t conv_index(const std::string& name) {
  const auto& names = vgg16_conv_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ConfigError("/layer_taps: unknown VGG16 layer '" + name + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

template <class T>
void put(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw LoadError("perceptual weights file '" + path.string() + "' is truncated");
  }
  return v;
}

}  // namespace

const std::vector<std::string>& vgg16_conv_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int b = 0; b < 5; ++b) {
      for (int i = 0; i < kBlockDepth[b]; ++i) {
        n.push_back("conv" + std::to_string(b + 1) + "_" + std::to_string(i + 1));
      }
    }
    return n;
  }();
  return names;
}

void PerceptualSpec::validate() const {
  if (layer_taps.empty()) throw ConfigError("/layer_taps: at least one layer required");
  if (layer_weights.size() != layer_taps.size()) {
    throw ConfigError("/layer_weights: expected " + std::to_string(layer_taps.size()) +
                      " weights (one per tap), got " + std::to_string(layer_weights.size()));
  }
  for (std::size_t i = 0; i < layer_weights.size(); ++i) {
    if (!(layer_weights[i] >= 0) || !std::isfinite(layer_weights[i])) {
      throw ConfigError("/layer_weights/" + std::to_string(i) + ": must be finite and >= 0");
    }
  }
  for (const auto& t : layer_taps) conv_index(t);
  if (backbone == BackboneKind::kPretrainedVgg16 && weights_path.empty()) {
    throw ConfigError("/weights_path: required for the pretrained backbone");
  }
  if (fallback_width < 1) throw ConfigError("/fallback_width: must be >= 1");
}

void to_json(nlohmann::json& j, const PerceptualSpec& s) {
  j = {{"layer_taps", s.layer_taps},
       {"layer_weights", s.layer_weights},
       {"backbone", s.backbone == BackboneKind::kPretrainedVgg16 ? "vgg16" : "random-fallback"},
       {"weights_path", s.weights_path.string()},
       {"fallback_seed", s.fallback_seed},
       {"fallback_width", s.fallback_width}};
}

void from_json(const nlohmann::json& j, PerceptualSpec& s) {
  jf::read(j, "layer_taps", s.layer_taps);
  if (j.contains("layer_taps") && !j.contains("layer_weights")) {
    s.layer_weights.assign(s.layer_taps.size(), 1.0);
  }
  jf::read(j, "layer_weights", s.layer_weights);
  std::string backbone = s.backbone == BackboneKind::kPretrainedVgg16 ? "vgg16" : "random-fallback";
  jf::read(j, "backbone", backbone);
  if (backbone == "vgg16") {
    s.backbone = BackboneKind::kPretrainedVgg16;
  } else if (backbone == "random-fallback") {
    s.backbone = BackboneKind::kRandomFallback;
  } else {
    throw ConfigError("/backbone: expected \"vgg16\" or \"random-fallback\", got \"" + backbone + "\"");
  }
  std::string path = s.weights_path.string();
  jf::read(j, "weights_path", path);
  s.weights_path = path;
  jf::read(j, "fallback_seed", s.fallback_seed);
  jf::read(j, "fallback_width", s.fallback_width);
  s.validate();
}

std::vector<int> FeatureExtractor::tap_strides() const {
  std::vector<int> out;
  for (std::size_t i : tap_layer_) out.push_back(1 << (layers_[i].block - 1));
  return out;
}

int FeatureExtractor::required_multiple() const {
  int m = 1;
  for (int s : tap_strides()) m = std::max(m, s);
  return m;
}

std::vector<Var> FeatureExtractor::extract(const Var& img) const {
  const Shape s = img.shape();
  if (s.c != 3) throw ValidationError("perceptual extractor expects RGB input, got " + s.str());
  const int m = required_multiple();
  if (s.h % m != 0 || s.w % m != 0 || s.h < m || s.w < m) {
    throw ResolutionError("perceptual taps need input sides that are multiples of " +
                          std::to_string(m) + ", got " + std::to_string(s.h) + "x" +
                          std::to_string(s.w));
  }
  std::vector<Var> features(taps_.size());
  Var h = channel_affine(img, input_scale_, input_shift_);
  int block = 1;
  const std::size_t last = *std::max_element(tap_layer_.begin(), tap_layer_.end());
  for (std::size_t i = 0; i <= last; ++i) {
    const auto& layer = layers_[i];
    for (; block < layer.block; ++block) h = max_pool2x2(h);
    h = relu(layer.conv.forward(h));
    for (std::size_t t = 0; t < tap_layer_.size(); ++t) {
      if (tap_layer_[t] == i) features[t] = h;
    }
  }
  return features;
}

std::vector<NamedVar> FeatureExtractor::named_parameters() const {
  std::vector<NamedVar> out;
  for (const auto& l : layers_) append_prefixed(out, l.name, l.conv.named_parameters());
  return out;
}

FeatureExtractor load_backbone(const PerceptualSpec& spec) {
  spec.validate();
  FeatureExtractor fx;
  fx.kind_ = spec.backbone;
  fx.taps_ = spec.layer_taps;
  std::size_t deepest = 0;
  for (const auto& t : spec.layer_taps) deepest = std::max(deepest, conv_index(t));

  const auto& names = vgg16_conv_names();
  if (spec.backbone == BackboneKind::kPretrainedVgg16) {
    const auto file = read_backbone_weights(spec.weights_path);
    int in = 3;
    for (std::size_t i = 0; i <= deepest; ++i) {
      const auto it = std::find_if(file.begin(), file.end(),
                                   [&](const auto& l) { return l.name == names[i]; });
      if (it == file.end()) {
        throw LoadError("perceptual weights file '" + spec.weights_path.string() +
                        "' has no layer " + names[i]);
      }
      const Shape ws = it->weight.shape();
      const int b = block_of(names[i]);
      if (ws.n != kVggWidth[b - 1] || ws.c != in || ws.h != 3 || ws.w != 3) {
        throw LoadError("perceptual weights file '" + spec.weights_path.string() + "': layer " +
                        names[i] + " has shape " + ws.str() + ", expected VGG16 layout");
      }
      Rng unused(0);
      Conv2d conv(in, ws.n, 3, ConvGeometry{1, 1, 1}, unused);
      conv.weight = Var(it->weight, false);
      conv.bias = Var(it->bias, false);
      fx.layers_.push_back({names[i], b, std::move(conv)});
      in = ws.n;
    }
  } else {
    Rng rng(spec.fallback_seed);
    int in = 3;
    for (std::size_t i = 0; i <= deepest; ++i) {
      const int b = block_of(names[i]);
      const int out = spec.fallback_width * kFallbackMultiplier[b - 1];
      Conv2d conv(in, out, 3, ConvGeometry{1, 1, 1}, rng, std::sqrt(2.0 / (in * 9)));
      conv.weight.set_requires_grad(false);
      conv.bias.set_requires_grad(false);
      fx.layers_.push_back({names[i], b, std::move(conv)});
      in = out;
    }
  }
  for (const auto& t : spec.layer_taps) fx.tap_layer_.push_back(conv_index(t));
  for (int c = 0; c < 3; ++c) {
    fx.input_scale_[c] = 0.5 / kVggStd[c];
    fx.input_shift_[c] = (0.5 - kVggMean[c]) / kVggStd[c];
  }
  return fx;
}

std::vector<Var> extract_features(const FeatureExtractor& extractor, const Var& img) {
  return extractor.extract(img);
}

void write_backbone_weights(const std::filesystem::path& path,
                            const std::vector<BackboneLayerWeights>& layers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write perceptual weights file '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.name.size()));
    out.write(l.name.data(), static_cast<std::streamsize>(l.name.size()));
    const Shape s = l.weight.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Scalar v : l.weight.values()) put<float>(out, static_cast<float>(v));
    for (Scalar v : l.bias.values()) put<float>(out, static_cast<float>(v));
  }
  if (!out) throw Error("failed writing perceptual weights file '" + path.string() + "'");
}

std::vector<BackboneLayerWeights> read_backbone_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open perceptual weights file '" + path.string() + "'");
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("perceptual weights file '" + path.string() + "' has a bad header");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kWeightsVersion) {
    throw LoadError("perceptual weights file '" + path.string() + "' has unsupported version " +
                    std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in, path);
  if (count > 64) throw LoadError("perceptual weights file '" + path.string() + "' is corrupt");
  std::vector<BackboneLayerWeights> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 64) throw LoadError("perceptual weights file '" + path.string() + "' is corrupt");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) {
      throw LoadError("perceptual weights file '" + path.string() + "' is truncated");
    }
    std::array<int, 4> d{};
    for (int& v : d) v = static_cast<int>(get<std::uint32_t>(in, path));
    if (d[0] < 1 || d[1] < 1 || d[2] < 1 || d[3] < 1 || d[0] > 4096 || d[1] > 4096 ||
        d[2] > 15 || d[3] > 15) {
      throw LoadError("perceptual weights file '" + path.string() + "' is corrupt");
    }
    Tensor w(Shape{d[0], d[1], d[2], d[3]});
    for (auto& v : w.values()) v = get<float>(in, path);
    Tensor b(Shape{1, d[0], 1, 1});
    for (auto& v : b.values()) v = get<float>(in, path);
    layers.push_back({std::move(name), std::move(w), std::move(b)});
  }
  return layers;
}

}  // namespace inpaint
