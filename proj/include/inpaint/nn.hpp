#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "inpaint/autograd.hpp"
#include "inpaint/ops.hpp"

namespace inpaint {

using Rng = std::mt19937_64;

struct NamedVar {
  std::string name;
  Var var;
};

// Anything holding trainable parameters and persistent buffers.
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  Module(Module&&) = default;
  Module& operator=(Module&&) = default;
  virtual ~Module() = default;

  virtual std::vector<NamedVar> named_parameters() const = 0;
  virtual std::vector<NamedVar> named_buffers() const { return {}; }

  // Parameters followed by buffers; the checkpoint payload of a module.
  std::vector<NamedVar> state() const;
  void zero_grad();
  // Toggles gradient accumulation on every parameter.
  void set_trainable(bool on);
};

std::size_t count_parameters(const Module& m);

// Truncated normal: draws outside +-2 sigma are rejected.
void init_truncated_normal(Tensor& t, Scalar stddev, Rng& rng);

class Conv2d : public Module {
 public:
  Conv2d(int in, int out, int kernel, ConvGeometry geometry, Rng& rng,
         Scalar init_std = 0.02, bool bias = true);

  Var forward(const Var& x) const;
  const ConvGeometry& geometry() const { return geometry_; }
  int kernel() const { return kernel_; }

  std::vector<NamedVar> named_parameters() const override;

  Var weight;
  Var bias;

 private:
  int kernel_;
  ConvGeometry geometry_;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d(int in, int out, int kernel, int stride, int pad, Rng& rng,
                  Scalar init_std = 0.02);

  Var forward(const Var& x) const;
  std::vector<NamedVar> named_parameters() const override;

  Var weight;
  Var bias;

 private:
  int stride_;
  int pad_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int channels, Scalar momentum = 0.1, Scalar eps = 1e-5);

  // Mutates running statistics only in BatchNormMode::kTrain.
  Var forward(const Var& x, BatchNormMode mode) const;

  std::vector<NamedVar> named_parameters() const override;
  std::vector<NamedVar> named_buffers() const override;

  Var gamma;
  Var beta;
  Var running_mean;
  Var running_var;

 private:
  Scalar momentum_;
  Scalar eps_;
};

class Linear : public Module {
 public:
  Linear(int in, int out, Rng& rng, Scalar init_std = 0.02);

  Var forward(const Var& x) const;
  std::vector<NamedVar> named_parameters() const override;

  Var weight;
  Var bias;
};

// Plain container of owned modules; parameter names are "<index>.<name>".
class ModuleList : public Module {
 public:
  template <class M>
  M& add(std::unique_ptr<M> m) {
    M& ref = *m;
    modules_.push_back(std::move(m));
    return ref;
  }
  std::size_t size() const { return modules_.size(); }

  std::vector<NamedVar> named_parameters() const override;
  std::vector<NamedVar> named_buffers() const override;

 private:
  std::vector<std::unique_ptr<Module>> modules_;
};

// Appends `from` to `into` with every name prefixed by "<prefix>.".
void append_prefixed(std::vector<NamedVar>& into, const std::string& prefix,
                     const std::vector<NamedVar>& from);

}  // namespace inpaint
