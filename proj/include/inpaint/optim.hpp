#pragma once

#include <cstdint>
#include <vector>

#include "inpaint/nn.hpp"

namespace inpaint {

struct AdamOptions {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<NamedVar> params, AdamOptions options = {});

  // One bias-corrected update from the gradients currently held by the
  // parameters. Parameters without a gradient are left unchanged.
  void step(Scalar lr);

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }

  // First and second moments as "m.<param>" / "v.<param>" handles, writable
  // in place when restoring a checkpoint.
  std::vector<NamedVar> state() const;

 private:
  std::vector<NamedVar> params_;
  std::vector<Var> m_;
  std::vector<Var> v_;
  AdamOptions options_;
  std::int64_t t_ = 0;
};

}  // namespace inpaint
