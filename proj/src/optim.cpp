#include "inpaint/optim.hpp"

#include <cmath>

namespace inpaint {

Adam::Adam(std::vector<NamedVar> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(Tensor(p.var.shape(), 0), false);
    v_.emplace_back(Tensor(p.var.shape(), 0), false);
  }
}

void Adam::step(Scalar lr) {
  ++t_;
  const Scalar b1 = options_.beta1, b2 = options_.beta2;
  const Scalar c1 = 1 - std::pow(b1, static_cast<Scalar>(t_));
  const Scalar c2 = 1 - std::pow(b2, static_cast<Scalar>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& p = params_[k].var;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& w = p.mutable_value();
    Tensor& m = m_[k].mutable_value();
    Tensor& v = v_[k].mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
    }
  }
}

std::vector<NamedVar> Adam::state() const {
  std::vector<NamedVar> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out.push_back({"m." + params_[k].name, m_[k]});
    out.push_back({"v." + params_[k].name, v_[k]});
  }
  return out;
}

}  // namespace inpaint
