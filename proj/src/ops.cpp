#include "inpaint/ops.hpp"

// Small products would otherwise take Eigen's coefficient-wise path, whose
// reductions peel to the first aligned address; results would then depend on
// where the allocator put the buffers.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "inpaint/errors.hpp"

namespace inpaint {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

using detail::input_grad;
using detail::Node;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + a.shape().str() +
                          " vs " + b.shape().str());
  }
}

template <class F>
Var unary(const Var& x, F&& f, std::function<Scalar(Scalar, Scalar)> dfdx) {
  Tensor out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [dfdx = std::move(dfdx)](Node& self) {
    Tensor* gx = input_grad(self, 0);
    if (!gx) return;
    const Tensor& xin = self.inputs[0]->value;
    for (std::size_t i = 0; i < gx->size(); ++i) {
      (*gx)[i] += self.grad[i] * dfdx(xin[i], self.value[i]);
    }
  });
}

// Mask value for element i of a tensor of shape s; mask is (N,1,H,W) or s.
inline Scalar mask_at(const Tensor& mask, const Shape& s, std::size_t i) {
  if (mask.shape().c == s.c) return mask[i];
  const std::size_t plane = s.plane();
  const std::size_t n = i / s.item();
  return mask[n * plane + i % plane];
}

void check_mask_shape(const Tensor& mask, const Shape& s, const char* op) {
  const Shape& m = mask.shape();
  if (m.n != s.n || m.h != s.h || m.w != s.w || (m.c != 1 && m.c != s.c)) {
    throw ValidationError(std::string(op) + ": mask shape " + m.str() +
                          " does not match " + s.str());
  }
}

// Unfolds one image (C, H, W) into columns (C*k*k, Ho*Wo).
void im2col(const Scalar* img, int c, int h, int w, int k, ConvGeometry g,
            int ho, int wo, Scalar* cols) {
  const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * out_plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          Scalar* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, Scalar(0));
            continue;
          }
          const Scalar* src = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into img.
void col2im(const Scalar* cols, int c, int h, int w, int k, ConvGeometry g,
            int ho, int wo, Scalar* img) {
  const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row =
            cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * out_plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= h) continue;
          const Scalar* src = row + static_cast<std::size_t>(oy) * wo;
          Scalar* dst = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

int conv_out_size(int in, int k, ConvGeometry g) {
  return (in + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
}

inline Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

inline Scalar stable_sigmoid(Scalar x) {
  if (x >= 0) return 1 / (1 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, Scalar factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Var sum(const Var& a) {
  Tensor out(Shape{1, 1, 1, 1}, a.value().sum());
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      const Scalar d = self.grad[0];
      for (auto& v : g->values()) v += d;
    }
  });
}

Var mean(const Var& a) {
  if (a.value().empty()) throw ValidationError("mean of empty tensor");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

Var relu(const Var& x) {
  return unary(
      x, [](Scalar v) { return v > 0 ? v : Scalar(0); },
      [](Scalar v, Scalar) { return v > 0 ? Scalar(1) : Scalar(0); });
}

Var leaky_relu(const Var& x, Scalar slope) {
  return unary(
      x, [slope](Scalar v) { return v > 0 ? v : slope * v; },
      [slope](Scalar v, Scalar) { return v > 0 ? Scalar(1) : slope; });
}

Var tanh(const Var& x) {
  return unary(
      x, [](Scalar v) { return std::tanh(v); },
      [](Scalar, Scalar y) { return 1 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](Scalar v) { return stable_sigmoid(v); },
      [](Scalar, Scalar y) { return y * (1 - y); });
}

Var smooth_l1(const Var& x) {
  return unary(
      x,
      [](Scalar v) {
        const Scalar a = std::abs(v);
        return a < 1 ? Scalar(0.5) * v * v : a - Scalar(0.5);
      },
      [](Scalar v, Scalar) {
        if (std::abs(v) < 1) return v;
        return v > 0 ? Scalar(1) : Scalar(-1);
      });
}

Var apply_mask(const Var& x, const Tensor& mask) {
  const Shape s = x.shape();
  check_mask_shape(mask, s, "apply_mask");
  Tensor out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mask_at(mask, s, i) != 0 ? x.value()[i] : Scalar(0);
  }
  return make_result(std::move(out), {x}, [mask, s](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (mask_at(mask, s, i) != 0) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var compose(const Var& generated, const Tensor& gt, const Tensor& mask) {
  const Shape s = generated.shape();
  if (gt.shape() != s) {
    throw ValidationError("compose: generated " + s.str() + " vs gt " + gt.shape().str());
  }
  check_mask_shape(mask, s, "compose");
  Tensor out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mask_at(mask, s, i) != 0 ? generated.value()[i] : gt[i];
  }
  return make_result(std::move(out), {generated}, [mask, s](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (mask_at(mask, s, i) != 0) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ValidationError("conv2d: weight " + ws.str() + " incompatible with input " +
                          xs.str());
  }
  const int k = ws.h;
  const int ho = conv_out_size(xs.h, k, g);
  const int wo = conv_out_size(xs.w, k, g);
  if (ho < 1 || wo < 1) {
    throw ResolutionError("conv2d: input " + xs.str() + " too small for kernel " +
                          std::to_string(k));
  }
  const int cout = ws.n;
  const int kdim = xs.c * k * k;
  const int npix = ho * wo;

  Tensor out(Shape{xs.n, cout, ho, wo});
  std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * npix);
  ConstMapMat wmat(weight.value().data(), cout, kdim);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.value().data() + n * xs.item(), xs.c, xs.h, xs.w, k, g, ho, wo, cols.data());
    MapMat o(out.data() + static_cast<std::size_t>(n) * cout * npix, cout, npix);
    o.noalias() = wmat * ConstMapMat(cols.data(), kdim, npix);
    if (bias.defined()) {
      for (int c = 0; c < cout; ++c) o.row(c).array() += bias.value()[c];
    }
  }

  return make_result(std::move(out), {x, weight, bias},
                     [g, k, ho, wo, kdim, npix, cout](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    const Shape xs = xv.shape();
    Tensor* gx = input_grad(self, 0);
    Tensor* gw = input_grad(self, 1);
    Tensor* gb = self.inputs[2] ? input_grad(self, 2) : nullptr;
    std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * npix);
    ConstMapMat wmat(wv.data(), cout, kdim);
    for (int n = 0; n < xs.n; ++n) {
      ConstMapMat go(self.grad.data() + static_cast<std::size_t>(n) * cout * npix, cout, npix);
      if (gw) {
        im2col(xv.data() + n * xs.item(), xs.c, xs.h, xs.w, k, g, ho, wo, cols.data());
        MapMat(gw->data(), cout, kdim).noalias() +=
            go * ConstMapMat(cols.data(), kdim, npix).transpose();
      }
      if (gb) {
        const Scalar* gp = self.grad.data() + static_cast<std::size_t>(n) * cout * npix;
        for (int c = 0; c < cout; ++c) {
          Scalar acc = 0;
          for (int i = 0; i < npix; ++i) acc += gp[static_cast<std::size_t>(c) * npix + i];
          (*gb)[c] += acc;
        }
      }
      if (gx) {
        MapMat(cols.data(), kdim, npix).noalias() = wmat.transpose() * go;
        col2im(cols.data(), xs.c, xs.h, xs.w, k, g, ho, wo, gx->data() + n * xs.item());
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride,
                     int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c || ws.h != ws.w) {
    throw ValidationError("conv_transpose2d: weight " + ws.str() +
                          " incompatible with input " + xs.str());
  }
  const int k = ws.h;
  const int cout = ws.c;
  const int ho = (xs.h - 1) * stride - 2 * pad + k;
  const int wo = (xs.w - 1) * stride - 2 * pad + k;
  if (ho < 1 || wo < 1) throw ResolutionError("conv_transpose2d: empty output");
  const ConvGeometry g{stride, pad, 1};
  const int kdim = cout * k * k;
  const int npix = xs.h * xs.w;
  const std::size_t out_item = static_cast<std::size_t>(cout) * ho * wo;

  Tensor out(Shape{xs.n, cout, ho, wo});
  std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * npix);
  ConstMapMat wmat(weight.value().data(), xs.c, kdim);
  for (int n = 0; n < xs.n; ++n) {
    MapMat(cols.data(), kdim, npix).noalias() =
        wmat.transpose() * ConstMapMat(x.value().data() + n * xs.item(), xs.c, npix);
    Scalar* o = out.data() + n * out_item;
    col2im(cols.data(), cout, ho, wo, k, g, xs.h, xs.w, o);
    if (bias.defined()) {
      for (int c = 0; c < cout; ++c) {
        Scalar* p = o + static_cast<std::size_t>(c) * ho * wo;
        std::for_each(p, p + ho * wo, [b = bias.value()[c]](Scalar& v) { v += b; });
      }
    }
  }

  return make_result(std::move(out), {x, weight, bias},
                     [g, k, ho, wo, kdim, npix, cout, out_item](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    const Shape xs = xv.shape();
    Tensor* gx = input_grad(self, 0);
    Tensor* gw = input_grad(self, 1);
    Tensor* gb = self.inputs[2] ? input_grad(self, 2) : nullptr;
    std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * npix);
    ConstMapMat wmat(wv.data(), xs.c, kdim);
    for (int n = 0; n < xs.n; ++n) {
      const Scalar* go = self.grad.data() + n * out_item;
      if (gb) {
        for (int c = 0; c < cout; ++c) {
          const Scalar* p = go + static_cast<std::size_t>(c) * ho * wo;
          Scalar s = 0;
          for (int i = 0; i < ho * wo; ++i) s += p[i];
          (*gb)[c] += s;
        }
      }
      if (!gx && !gw) continue;
      im2col(go, cout, ho, wo, k, g, xs.h, xs.w, cols.data());
      ConstMapMat cm(cols.data(), kdim, npix);
      if (gx) {
        MapMat(gx->data() + n * xs.item(), xs.c, npix).noalias() += wmat * cm;
      }
      if (gw) {
        MapMat(gw->data(), xs.c, kdim).noalias() +=
            ConstMapMat(xv.data() + n * xs.item(), xs.c, npix) * cm.transpose();
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Var& running_mean,
               Var& running_var, BatchNormMode mode, Scalar momentum, Scalar eps) {
  const Shape s = x.shape();
  const int channels = s.c;
  const std::size_t plane = s.plane();
  const std::size_t count = static_cast<std::size_t>(s.n) * plane;
  std::vector<Scalar> mu(channels), inv_std(channels);

  const bool batch_stats = mode != BatchNormMode::kEval;
  for (int c = 0; c < channels; ++c) {
    if (batch_stats) {
      Scalar m = 0;
      for (int n = 0; n < s.n; ++n) {
        const Scalar* p = x.value().data() + x.value().index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) m += p[i];
      }
      m /= static_cast<Scalar>(count);
      Scalar v = 0;
      for (int n = 0; n < s.n; ++n) {
        const Scalar* p = x.value().data() + x.value().index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const Scalar biased = v / static_cast<Scalar>(count);
      mu[c] = m;
      inv_std[c] = 1 / std::sqrt(biased + eps);
      if (mode == BatchNormMode::kTrain) {
        const Scalar unbiased = count > 1 ? v / static_cast<Scalar>(count - 1) : biased;
        Scalar& rm = running_mean.mutable_value()[c];
        Scalar& rv = running_var.mutable_value()[c];
        rm = (1 - momentum) * rm + momentum * m;
        rv = (1 - momentum) * rv + momentum * unbiased;
      }
    } else {
      mu[c] = running_mean.value()[c];
      inv_std[c] = 1 / std::sqrt(running_var.value()[c] + eps);
    }
  }

  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t off = x.value().index(n, c, 0, 0);
      const Scalar gm = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t i = 0; i < plane; ++i) {
        out[off + i] = gm * (x.value()[off + i] - mu[c]) * inv_std[c] + bt;
      }
    }
  }

  return make_result(std::move(out), {x, gamma, beta},
                     [mu, inv_std, batch_stats, plane, count](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    const Shape s = xv.shape();
    Tensor* gx = input_grad(self, 0);
    Tensor* gg = input_grad(self, 1);
    Tensor* gb = input_grad(self, 2);
    for (int c = 0; c < s.c; ++c) {
      Scalar sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < s.n; ++n) {
        const std::size_t off = xv.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          const Scalar xhat = (xv[off + i] - mu[c]) * inv_std[c];
          sum_dy += self.grad[off + i];
          sum_dy_xhat += self.grad[off + i] * xhat;
        }
      }
      if (gg) (*gg)[c] += sum_dy_xhat;
      if (gb) (*gb)[c] += sum_dy;
      if (!gx) continue;
      const Scalar gm = gv[c];
      const Scalar m = static_cast<Scalar>(count);
      for (int n = 0; n < s.n; ++n) {
        const std::size_t off = xv.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          const Scalar dy = self.grad[off + i];
          if (batch_stats) {
            const Scalar xhat = (xv[off + i] - mu[c]) * inv_std[c];
            (*gx)[off + i] += gm * inv_std[c] * (dy - sum_dy / m - xhat * sum_dy_xhat / m);
          } else {
            (*gx)[off + i] += gm * inv_std[c] * dy;
          }
        }
      }
    }
  });
}

Var max_pool2x2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ResolutionError("max_pool2x2: odd spatial size " + s.str());
  }
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  std::vector<std::size_t> argmax(os.size());
  const Tensor& v = x.value();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          std::size_t best = v.index(n, c, 2 * oy, 2 * ox);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t j = v.index(n, c, 2 * oy + dy, 2 * ox + dx);
              if (v[j] > v[best]) best = j;
            }
          }
          const std::size_t o = out.index(n, c, oy, ox);
          out[o] = v[best];
          argmax[o] = best;
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t o = 0; o < argmax.size(); ++o) (*g)[argmax[o]] += self.grad[o];
    }
  });
}

Var flatten(const Var& x) {
  const Shape s = x.shape();
  const Shape fs{s.n, static_cast<int>(s.item()), 1, 1};
  return make_result(x.value().reshaped(fs), {x}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int features = static_cast<int>(xs.item());
  if (static_cast<int>(ws.item()) != features) {
    throw ValidationError("linear: weight " + ws.str() + " incompatible with input " +
                          xs.str());
  }
  const int outs = ws.n;
  Tensor out(Shape{xs.n, outs, 1, 1});
  ConstMapMat xm(x.value().data(), xs.n, features);
  ConstMapMat wm(weight.value().data(), outs, features);
  MapMat om(out.data(), xs.n, outs);
  om.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    for (int n = 0; n < xs.n; ++n) {
      for (int o = 0; o < outs; ++o) om(n, o) += bias.value()[o];
    }
  }
  return make_result(std::move(out), {x, weight, bias}, [features, outs](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    const int batch = xv.shape().n;
    ConstMapMat go(self.grad.data(), batch, outs);
    if (Tensor* gx = input_grad(self, 0)) {
      MapMat(gx->data(), batch, features).noalias() +=
          go * ConstMapMat(wv.data(), outs, features);
    }
    if (Tensor* gw = input_grad(self, 1)) {
      MapMat(gw->data(), outs, features).noalias() +=
          go.transpose() * ConstMapMat(xv.data(), batch, features);
    }
    if (self.inputs[2]) {
      if (Tensor* gb = input_grad(self, 2)) {
        for (int o = 0; o < outs; ++o) {
          Scalar acc = 0;
          for (int b = 0; b < batch; ++b) acc += self.grad[static_cast<std::size_t>(b) * outs + o];
          (*gb)[o] += acc;
        }
      }
    }
  });
}

Var channel_affine(const Var& x, std::span<const Scalar> scale_c,
                   std::span<const Scalar> shift_c) {
  const Shape s = x.shape();
  if (scale_c.size() != static_cast<std::size_t>(s.c) || shift_c.size() != scale_c.size()) {
    throw ValidationError("channel_affine: expected " + std::to_string(s.c) +
                          " per-channel coefficients");
  }
  std::vector<Scalar> sc(scale_c.begin(), scale_c.end());
  Tensor out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int c = static_cast<int>((i / s.plane()) % s.c);
    out[i] = x.value()[i] * scale_c[c] + shift_c[c];
  }
  return make_result(std::move(out), {x}, [sc = std::move(sc), s](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += self.grad[i] * sc[(i / s.plane()) % s.c];
      }
    }
  });
}

Var bce_with_logits(const Var& logits, std::span<const Scalar> targets, Scalar eps) {
  const std::size_t n = logits.value().size();
  if (targets.size() != n) {
    throw ValidationError("bce_with_logits: " + std::to_string(n) + " logits but " +
                          std::to_string(targets.size()) + " targets");
  }
  const Scalar lo = std::log(eps);
  const Scalar hi = std::log1p(-eps);
  std::vector<Scalar> y(targets.begin(), targets.end());
  std::vector<Scalar> dlogit(n);
  Scalar total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar z = logits.value()[i];
    const Scalar log_p = -softplus(-z);
    const Scalar log_q = -softplus(z);
    const Scalar cp = std::clamp(log_p, lo, hi);
    const Scalar cq = std::clamp(log_q, lo, hi);
    total += -(y[i] * cp + (1 - y[i]) * cq);
    // d log_p / dz = 1 - sigmoid(z); d log_q / dz = -sigmoid(z)
    const Scalar dp = (log_p > lo && log_p < hi) ? stable_sigmoid(-z) : Scalar(0);
    const Scalar dq = (log_q > lo && log_q < hi) ? -stable_sigmoid(z) : Scalar(0);
    dlogit[i] = -(y[i] * dp + (1 - y[i]) * dq) / static_cast<Scalar>(n);
  }
  Tensor out(Shape{1, 1, 1, 1}, total / static_cast<Scalar>(n));
  return make_result(std::move(out), {logits}, [dlogit = std::move(dlogit)](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < dlogit.size(); ++i) (*g)[i] += self.grad[0] * dlogit[i];
    }
  });
}

}  // namespace inpaint
