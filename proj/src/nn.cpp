#include "inpaint/nn.hpp"

#include <cmath>

#include "inpaint/errors.hpp"

namespace inpaint {

std::vector<NamedVar> Module::state() const {
  auto all = named_parameters();
  auto buffers = named_buffers();
  all.insert(all.end(), buffers.begin(), buffers.end());
  return all;
}

void Module::zero_grad() {
  for (auto& p : named_parameters()) p.var.zero_grad();
}

void Module::set_trainable(bool on) {
  for (auto& p : named_parameters()) p.var.set_requires_grad(on);
}

std::size_t count_parameters(const Module& m) {
  std::size_t n = 0;
  for (const auto& p : m.named_parameters()) n += p.var.value().size();
  return n;
}

void init_truncated_normal(Tensor& t, Scalar stddev, Rng& rng) {
  std::normal_distribution<Scalar> dist(0, stddev);
  for (auto& v : t.values()) {
    Scalar x;
    do {
      x = dist(rng);
    } while (std::abs(x) > 2 * stddev);
    v = x;
  }
}

void append_prefixed(std::vector<NamedVar>& into, const std::string& prefix,
                     const std::vector<NamedVar>& from) {
  for (const auto& nv : from) into.push_back({prefix + "." + nv.name, nv.var});
}

Conv2d::Conv2d(int in, int out, int kernel, ConvGeometry geometry, Rng& rng,
               Scalar init_std, bool with_bias)
    : kernel_(kernel), geometry_(geometry) {
  if (in < 1 || out < 1 || kernel < 1 || geometry.stride < 1 || geometry.dilation < 1) {
    throw ConfigError("Conv2d: invalid geometry");
  }
  Tensor w(Shape{out, in, kernel, kernel});
  init_truncated_normal(w, init_std, rng);
  weight = Var(std::move(w), true);
  if (with_bias) bias = Var(Tensor(Shape{1, out, 1, 1}, 0), true);
}

Var Conv2d::forward(const Var& x) const { return conv2d(x, weight, bias, geometry_); }

std::vector<NamedVar> Conv2d::named_parameters() const {
  std::vector<NamedVar> p{{"weight", weight}};
  if (bias.defined()) p.push_back({"bias", bias});
  return p;
}

ConvTranspose2d::ConvTranspose2d(int in, int out, int kernel, int stride, int pad,
                                 Rng& rng, Scalar init_std)
    : stride_(stride), pad_(pad) {
  Tensor w(Shape{in, out, kernel, kernel});
  init_truncated_normal(w, init_std, rng);
  weight = Var(std::move(w), true);
  bias = Var(Tensor(Shape{1, out, 1, 1}, 0), true);
}

Var ConvTranspose2d::forward(const Var& x) const {
  return conv_transpose2d(x, weight, bias, stride_, pad_);
}

std::vector<NamedVar> ConvTranspose2d::named_parameters() const {
  return {{"weight", weight}, {"bias", bias}};
}

BatchNorm2d::BatchNorm2d(int channels, Scalar momentum, Scalar eps)
    : gamma(Tensor(Shape{1, channels, 1, 1}, 1), true),
      beta(Tensor(Shape{1, channels, 1, 1}, 0), true),
      running_mean(Tensor(Shape{1, channels, 1, 1}, 0), false),
      running_var(Tensor(Shape{1, channels, 1, 1}, 1), false),
      momentum_(momentum),
      eps_(eps) {}

Var BatchNorm2d::forward(const Var& x, BatchNormMode mode) const {
  // Running statistics are buffers shared through the Var handles; the
  // const here refers to the module's structure, not those buffers.
  Var rm = running_mean;
  Var rv = running_var;
  return batch_norm(x, gamma, beta, rm, rv, mode, momentum_, eps_);
}

std::vector<NamedVar> BatchNorm2d::named_parameters() const {
  return {{"gamma", gamma}, {"beta", beta}};
}

std::vector<NamedVar> BatchNorm2d::named_buffers() const {
  return {{"running_mean", running_mean}, {"running_var", running_var}};
}

Linear::Linear(int in, int out, Rng& rng, Scalar init_std) {
  Tensor w(Shape{out, in, 1, 1});
  init_truncated_normal(w, init_std, rng);
  weight = Var(std::move(w), true);
  bias = Var(Tensor(Shape{1, out, 1, 1}, 0), true);
}

Var Linear::forward(const Var& x) const { return linear(x, weight, bias); }

std::vector<NamedVar> Linear::named_parameters() const {
  return {{"weight", weight}, {"bias", bias}};
}

std::vector<NamedVar> ModuleList::named_parameters() const {
  std::vector<NamedVar> out;
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    append_prefixed(out, std::to_string(i), modules_[i]->named_parameters());
  }
  return out;
}

std::vector<NamedVar> ModuleList::named_buffers() const {
  std::vector<NamedVar> out;
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    append_prefixed(out, std::to_string(i), modules_[i]->named_buffers());
  }
  return out;
}

}  // namespace inpaint
