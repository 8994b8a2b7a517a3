#include "inpaint/networks.hpp"

#include "inpaint/errors.hpp"
#include "json_fields.hpp"

namespace inpaint {

namespace jf = json_fields;

void GeneratorSpec::validate() const {
  if (levels < 1) throw ConfigError("/levels: must be >= 1");
  if (static_cast<int>(encoder_channels.size()) != levels) {
    throw ConfigError("/encoder_channels: expected " + std::to_string(levels) +
                      " entries (one per level), got " +
                      std::to_string(encoder_channels.size()));
  }
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    const int c = encoder_channels[i];
    if (c < 1 || c > kMaxChannels) {
      throw ConfigError("/encoder_channels/" + std::to_string(i) + ": must be in [1, " +
                        std::to_string(kMaxChannels) + "], got " + std::to_string(c));
    }
  }
  for (std::size_t i = 0; i < dilation_rates.size(); ++i) {
    if (dilation_rates[i] < 1) {
      throw ConfigError("/dilation_rates/" + std::to_string(i) + ": must be a positive integer");
    }
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("/conv_kernel: must be a positive odd integer");
  }
  if (deconv_stride != 2 || deconv_kernel != 4) {
    throw ConfigError("/deconv_kernel: decoder upsampling is fixed to 4x4 stride 2");
  }
  if (convs_per_level < 1) throw ConfigError("/convs_per_level: must be >= 1");
  if (levels > 12) throw ConfigError("/levels: at most 12 levels supported");
}

void DiscriminatorSpec::validate() const {
  if (channels.empty()) throw ConfigError("/channels: at least one conv layer required");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 1) {
      throw ConfigError("/channels/" + std::to_string(i) + ": must be >= 1");
    }
  }
  if (kernel != 4 || stride != 2) throw ConfigError("/kernel: discriminator convs are 4x4 stride 2");
  if (!(leaky_slope >= 0 && leaky_slope < 1)) throw ConfigError("/leaky_slope: must be in [0, 1)");
  const int pyramid = 1 << std::min<std::size_t>(channels.size(), 30);
  if (input_size < pyramid || input_size % pyramid != 0) {
    throw ConfigError("/input_size: " + std::to_string(input_size) + " cannot pass through " +
                      std::to_string(channels.size()) +
                      " stride-2 layers; needs a positive multiple of " + std::to_string(pyramid));
  }
}

void to_json(nlohmann::json& j, const GeneratorSpec& s) {
  j = {{"levels", s.levels},
       {"encoder_channels", s.encoder_channels},
       {"dilation_rates", s.dilation_rates},
       {"conv_kernel", s.conv_kernel},
       {"deconv_kernel", s.deconv_kernel},
       {"deconv_stride", s.deconv_stride},
       {"convs_per_level", s.convs_per_level},
       {"fusion", s.fusion}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& s) {
  jf::read(j, "levels", s.levels);
  if (j.contains("levels") && !j.contains("encoder_channels")) {
    // Default widths: 64 at level 0, 128 below.
    s.encoder_channels.assign(std::max(s.levels, 0), GeneratorSpec::kMaxChannels);
    if (!s.encoder_channels.empty()) s.encoder_channels[0] = 64;
  }
  jf::read(j, "encoder_channels", s.encoder_channels);
  jf::read(j, "dilation_rates", s.dilation_rates);
  jf::read(j, "conv_kernel", s.conv_kernel);
  jf::read(j, "deconv_kernel", s.deconv_kernel);
  jf::read(j, "deconv_stride", s.deconv_stride);
  jf::read(j, "convs_per_level", s.convs_per_level);
  jf::read(j, "fusion", s.fusion);
  s.validate();
}

void to_json(nlohmann::json& j, const DiscriminatorSpec& s) {
  j = {{"channels", s.channels},       {"kernel", s.kernel},
       {"stride", s.stride},           {"leaky_slope", s.leaky_slope},
       {"batch_norm", s.batch_norm},   {"input_size", s.input_size}};
}

void from_json(const nlohmann::json& j, DiscriminatorSpec& s) {
  jf::read(j, "channels", s.channels);
  jf::read(j, "kernel", s.kernel);
  jf::read(j, "stride", s.stride);
  jf::read(j, "leaky_slope", s.leaky_slope);
  jf::read(j, "batch_norm", s.batch_norm);
  jf::read(j, "input_size", s.input_size);
  s.validate();
}

ConvBnAct::ConvBnAct(int in, int out, int kernel, ConvGeometry geometry, Rng& rng,
                     bool batch_norm, Scalar leaky_slope)
    : conv_(in, out, kernel, geometry, rng), leaky_slope_(leaky_slope) {
  if (batch_norm) bn_.emplace(out);
}

Var ConvBnAct::forward(const Var& x, BatchNormMode mode) const {
  Var y = conv_.forward(x);
  if (bn_) y = bn_->forward(y, mode);
  return leaky_slope_ > 0 ? leaky_relu(y, leaky_slope_) : relu(y);
}

std::vector<NamedVar> ConvBnAct::named_parameters() const {
  std::vector<NamedVar> out;
  append_prefixed(out, "conv", conv_.named_parameters());
  if (bn_) append_prefixed(out, "bn", bn_->named_parameters());
  return out;
}

std::vector<NamedVar> ConvBnAct::named_buffers() const {
  std::vector<NamedVar> out;
  if (bn_) append_prefixed(out, "bn", bn_->named_buffers());
  return out;
}

Generator::Generator(GeneratorSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  const int k = spec_.conv_kernel;
  const int pad = k / 2;
  const auto& ch = spec_.encoder_channels;

  int in = 4;
  for (int l = 0; l < spec_.levels; ++l) {
    std::vector<ConvBnAct> convs;
    for (int j = 0; j < spec_.convs_per_level; ++j) {
      const int stride = (l > 0 && j == 0) ? 2 : 1;
      convs.emplace_back(in, ch[l], k, ConvGeometry{stride, pad, 1}, rng);
      in = ch[l];
    }
    levels_.push_back(std::move(convs));
  }
  for (int d : spec_.dilation_rates) {
    bottleneck_.emplace_back(in, in, k, ConvGeometry{1, pad * d, d}, rng);
  }
  for (int l = spec_.levels - 1; l >= 1; --l) {
    const int c = ch[l - 1];
    std::optional<ConvBnAct> skip;
    if (spec_.fusion) skip.emplace(c, c, k, ConvGeometry{1, pad, 1}, rng);
    decoder_.push_back(DecoderLevel{
        ConvTranspose2d(ch[l], c, spec_.deconv_kernel, spec_.deconv_stride, 1, rng),
        BatchNorm2d(c), std::move(skip), ConvBnAct(c, c, k, ConvGeometry{1, pad, 1}, rng)});
  }
  out_.emplace(ch[0], 3, k, ConvGeometry{1, pad, 1}, rng);
}

void Generator::check_input(const Shape& s) const {
  if (s.c != 4) {
    throw ValidationError("generator expects 4 input channels (RGB + mask), got " +
                          std::to_string(s.c));
  }
  const int m = spec_.resolution_multiple();
  if (s.h % m != 0 || s.w % m != 0) {
    const int ph = (s.h + m - 1) / m * m, pw = (s.w + m - 1) / m * m;
    throw ResolutionError("input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                          " is not a multiple of " + std::to_string(m) + " for a " +
                          std::to_string(spec_.levels) + "-level generator; pad to " +
                          std::to_string(ph) + "x" + std::to_string(pw));
  }
}

Var Generator::run_encoder(const Var& x, BatchNormMode mode, std::vector<Var>* skips) const {
  check_input(x.shape());
  Var h = x;
  for (const auto& level : levels_) {
    for (const auto& c : level) h = c.forward(h, mode);
    if (skips) skips->push_back(h);
  }
  for (const auto& c : bottleneck_) h = c.forward(h, mode);
  return h;
}

Var Generator::encode(const Var& input4, BatchNormMode mode) const {
  return run_encoder(input4, mode, nullptr);
}

Var Generator::forward(const Var& input4, BatchNormMode mode) const {
  std::vector<Var> skips;
  Var h = run_encoder(input4, mode, &skips);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto& d = decoder_[i];
    const Var& skip = skips[skips.size() - 2 - i];
    h = relu(d.up_bn.forward(d.up.forward(h), mode));
    if (d.skip) h = add(h, d.skip->forward(skip, mode));
    h = d.merge.forward(h, mode);
  }
  return tanh(out_->forward(h));
}

Tensor Generator::generate(const Tensor& input4) const {
  NoGradGuard guard;
  return forward(Var(input4), BatchNormMode::kEval).value();
}

template <class Fn>
void Generator::for_each_module(Fn&& fn) const {
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    for (std::size_t j = 0; j < levels_[l].size(); ++j) {
      fn("enc" + std::to_string(l) + "." + std::to_string(j), levels_[l][j]);
    }
  }
  for (std::size_t j = 0; j < bottleneck_.size(); ++j) {
    fn("bottleneck." + std::to_string(j), bottleneck_[j]);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "dec" + std::to_string(decoder_.size() - i);
    fn(p + ".up", decoder_[i].up);
    fn(p + ".up_bn", decoder_[i].up_bn);
    if (decoder_[i].skip) fn(p + ".skip", *decoder_[i].skip);
    fn(p + ".merge", decoder_[i].merge);
  }
  fn("out", *out_);
}

std::vector<NamedVar> Generator::named_parameters() const {
  std::vector<NamedVar> out;
  for_each_module([&](const std::string& name, const Module& m) {
    append_prefixed(out, name, m.named_parameters());
  });
  return out;
}

std::vector<NamedVar> Generator::named_buffers() const {
  std::vector<NamedVar> out;
  for_each_module([&](const std::string& name, const Module& m) {
    append_prefixed(out, name, m.named_buffers());
  });
  return out;
}

std::vector<const Conv2d*> Generator::encoder_convs() const {
  std::vector<const Conv2d*> out;
  for (const auto& level : levels_) {
    for (const auto& c : level) out.push_back(&c.conv());
  }
  for (const auto& c : bottleneck_) out.push_back(&c.conv());
  return out;
}

Discriminator::Discriminator(DiscriminatorSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  int in = 3;
  for (std::size_t i = 0; i < spec_.channels.size(); ++i) {
    convs_.emplace_back(in, spec_.channels[i], spec_.kernel, ConvGeometry{spec_.stride, 1, 1},
                        rng, spec_.batch_norm && i > 0, spec_.leaky_slope);
    in = spec_.channels[i];
  }
  const int side = spec_.input_size >> spec_.channels.size();
  head_.emplace(in * side * side, 1, rng);
}

Var Discriminator::forward(const Var& images, BatchNormMode mode) const {
  const Shape s = images.shape();
  if (s.c != 3 || s.h != spec_.input_size || s.w != spec_.input_size) {
    throw ResolutionError("discriminator built for 3x" + std::to_string(spec_.input_size) +
                          "x" + std::to_string(spec_.input_size) + " input, got " + s.str());
  }
  Var h = images;
  for (const auto& c : convs_) h = c.forward(h, mode);
  return head_->forward(flatten(h));
}

std::vector<NamedVar> Discriminator::named_parameters() const {
  std::vector<NamedVar> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    append_prefixed(out, "conv" + std::to_string(i), convs_[i].named_parameters());
  }
  append_prefixed(out, "head", head_->named_parameters());
  return out;
}

std::vector<NamedVar> Discriminator::named_buffers() const {
  std::vector<NamedVar> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    append_prefixed(out, "conv" + std::to_string(i), convs_[i].named_buffers());
  }
  return out;
}

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  return Generator(spec, seed);
}

Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  return Discriminator(spec, seed);
}

ReceptiveField compute_receptive_field(const GeneratorSpec& spec) {
  spec.validate();
  const int k = spec.conv_kernel;
  long rf = 1;
  long jump = 1;
  for (int l = 0; l < spec.levels; ++l) {
    for (int j = 0; j < spec.convs_per_level; ++j) {
      const int stride = (l > 0 && j == 0) ? 2 : 1;
      rf += static_cast<long>(k - 1) * jump;
      jump *= stride;
    }
  }
  for (int d : spec.dilation_rates) rf += static_cast<long>(k - 1) * d * jump;
  return ReceptiveField{static_cast<int>(rf)};
}

}  // namespace inpaint
