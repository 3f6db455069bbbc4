#pragma once
// Reverse-mode differentiation over NCHW tensors. The operator set is
// closed over what the segmentation network and its loss need: conv2d
// (grouped, dilated), max pooling, bilinear upsampling, relu, channel
// concat, global average pooling, batch norm, and the masked NLL loss.
//
// Templated on the scalar type: float for training, double for
// finite-difference verification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "cldnet/kernels.hpp"
#include "cldnet/raster.hpp"

namespace cldnet::ag {

struct Shape {
  int n = 1, c = 1, h = 1, w = 1;
  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
};

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string name;
  std::vector<Var<T>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
  void zero_grad() { grad.assign(value.size(), T(0)); }
};

inline bool& grad_mode() {
  thread_local bool mode = true;
  return mode;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
};

template <typename T>
Var<T> make_var(Shape s, bool requires_grad = false, std::string name = {}) {
  auto n = std::make_shared<Node<T>>();
  n->shape = s;
  n->value.assign(s.size(), T(0));
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

template <typename T>
Var<T> make_result(Shape s, std::vector<Var<T>> parents) {
  auto n = std::make_shared<Node<T>>();
  n->shape = s;
  n->value.assign(s.size(), T(0));
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  n->requires_grad = needs && grad_mode();
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

// Runs reverse-topological replay from `loss` (scalar), accumulating into
// node.grad of every reachable requires_grad tensor.
template <typename T>
void backward(const Var<T>& loss) {
  if (loss->value.size() != 1)
    throw std::invalid_argument("backward() expects a scalar loss");
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node<T>* n : order) n->ensure_grad();
  loss->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------
// generic scalar gemm for the double path
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::sgemm_acc(a, b, c, m, k, n);
  } else {
    for (int i = 0; i < m; ++i) {
      T* crow = c + static_cast<std::size_t>(i) * n;
      const T* arow = a + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const T av = arow[p];
        const T* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* src, int rows, int cols) {
  std::vector<T> out(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<std::size_t>(c) * rows + r] =
          src[static_cast<std::size_t>(r) * cols + c];
  return out;
}

struct ConvSpec {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;
};

namespace detail {

template <typename T>
void conv2d_forward_plane_general(const T* x, const T* w, T* y, int cin_g,
                                  int hin, int win, int hout, int wout, int kh,
                                  int kw, const ConvSpec& cs,
                                  std::size_t x_chan_stride) {
  for (int r = 0; r < hout; ++r) {
    for (int c = 0; c < wout; ++c) {
      T acc = 0;
      for (int ic = 0; ic < cin_g; ++ic) {
        const T* xc = x + ic * x_chan_stride;
        const T* wc = w + static_cast<std::size_t>(ic) * kh * kw;
        for (int p = 0; p < kh; ++p) {
          const int rr = r * cs.stride - cs.padding + p * cs.dilation;
          if (rr < 0 || rr >= hin) continue;
          for (int q = 0; q < kw; ++q) {
            const int cc = c * cs.stride - cs.padding + q * cs.dilation;
            if (cc < 0 || cc >= win) continue;
            acc += wc[p * kw + q] * xc[static_cast<std::size_t>(rr) * win + cc];
          }
        }
      }
      y[static_cast<std::size_t>(r) * wout + c] = acc;
    }
  }
}

}  // namespace detail

// weight shape: (Cout, Cin/groups, kh, kw); bias may be null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const ConvSpec& cs = {}) {
  const Shape xs = x->shape;
  const int cout = weight->shape.n;
  const int cin_g = weight->shape.c;
  const int kh = weight->shape.h;
  const int kw = weight->shape.w;
  if (cs.groups < 1 || xs.c % cs.groups != 0 || cout % cs.groups != 0)
    throw std::invalid_argument("conv2d: invalid group count");
  if (cin_g != xs.c / cs.groups)
    throw std::invalid_argument("conv2d: weight channels do not match input");
  if (bias && !(bias->shape == Shape{1, cout, 1, 1}))
    throw std::invalid_argument("conv2d: bias shape mismatch");
  const int hout = (xs.h + 2 * cs.padding - cs.dilation * (kh - 1) - 1) / cs.stride + 1;
  const int wout = (xs.w + 2 * cs.padding - cs.dilation * (kw - 1) - 1) / cs.stride + 1;
  if (hout <= 0 || wout <= 0)
    throw std::invalid_argument("conv2d: empty output");

  auto out = make_result<T>({xs.n, cout, hout, wout},
                            bias ? std::vector<Var<T>>{x, weight, bias}
                                 : std::vector<Var<T>>{x, weight});

  const std::size_t xplane = xs.plane();
  const std::size_t yplane = static_cast<std::size_t>(hout) * wout;
  const bool pointwise = kh == 1 && kw == 1 && cs.stride == 1 &&
                         cs.padding == 0 && cs.groups == 1;
  const bool depthwise3 = kh == 3 && kw == 3 && cs.stride == 1 &&
                          cs.groups == xs.c && cout == xs.c &&
                          cs.padding == cs.dilation;

  for (int n = 0; n < xs.n; ++n) {
    const T* xn = x->value.data() + n * xplane * xs.c;
    T* yn = out->value.data() + n * yplane * cout;
    if (pointwise) {
      if constexpr (std::is_same_v<T, float>) {
        kernels::sgemm(weight->value.data(), xn, yn, cout, xs.c,
                       static_cast<int>(xplane));
      } else {
        std::fill(yn, yn + yplane * cout, T(0));
        gemm_acc(weight->value.data(), xn, yn, cout, xs.c,
                 static_cast<int>(xplane));
      }
    } else if (depthwise3) {
      for (int ch = 0; ch < xs.c; ++ch) {
        if constexpr (std::is_same_v<T, float>) {
          kernels::dwconv3x3(xn + ch * xplane, weight->value.data() + ch * 9,
                             yn + ch * yplane, xs.h, xs.w, cs.dilation);
        } else {
          detail::conv2d_forward_plane_general(
              xn + ch * xplane, weight->value.data() + ch * 9, yn + ch * yplane,
              1, xs.h, xs.w, hout, wout, 3, 3, cs, xplane);
        }
      }
    } else {
      const int cout_g = cout / cs.groups;
      for (int g = 0; g < cs.groups; ++g) {
        for (int oc = 0; oc < cout_g; ++oc) {
          const int out_ch = g * cout_g + oc;
          detail::conv2d_forward_plane_general(
              xn + (g * cin_g) * xplane,
              weight->value.data() +
                  static_cast<std::size_t>(out_ch) * cin_g * kh * kw,
              yn + out_ch * yplane, cin_g, xs.h, xs.w, hout, wout, kh, kw, cs,
              xplane);
        }
      }
    }
    if (bias) {
      for (int oc = 0; oc < cout; ++oc) {
        const T bv = bias->value[oc];
        T* yc = yn + oc * yplane;
        for (std::size_t i = 0; i < yplane; ++i) yc[i] += bv;
      }
    }
  }

  if (out->requires_grad) {
    Var<T> xv = x, wv = weight, bv = bias;
    out->backward_fn = [xv, wv, bv, cs, kh, kw, hout, wout](Node<T>& self) {
      const Shape xs = xv->shape;
      const int cout = wv->shape.n;
      const int cin_g = wv->shape.c;
      const std::size_t xplane = xs.plane();
      const std::size_t yplane = static_cast<std::size_t>(hout) * wout;
      const int cout_g = cout / cs.groups;
      if (xv->requires_grad) xv->ensure_grad();
      if (wv->requires_grad) wv->ensure_grad();
      if (bv && bv->requires_grad) bv->ensure_grad();

      for (int n = 0; n < xs.n; ++n) {
        const T* xn = xv->value.data() + n * xplane * xs.c;
        const T* gy = self.grad.data() + n * yplane * cout;
        T* gx = xv->requires_grad ? xv->grad.data() + n * xplane * xs.c : nullptr;
        if (bv && bv->requires_grad) {
          for (int oc = 0; oc < cout; ++oc) {
            T acc = 0;
            const T* gyc = gy + oc * yplane;
            for (std::size_t i = 0; i < yplane; ++i) acc += gyc[i];
            bv->grad[oc] += acc;
          }
        }
        const bool pointwise = kh == 1 && kw == 1 && cs.stride == 1 &&
                               cs.padding == 0 && cs.groups == 1;
        if (pointwise) {
          if (gx) {
            // dX += W^T * dY
            auto wt = transpose(wv->value.data(), cout, xs.c);
            gemm_acc(wt.data(), gy, gx, xs.c, cout, static_cast<int>(yplane));
          }
          if (wv->requires_grad) {
            // dW += dY * X^T
            auto xt = transpose(xn, xs.c, static_cast<int>(xplane));
            gemm_acc(gy, xt.data(), wv->grad.data(), cout,
                     static_cast<int>(yplane), xs.c);
          }
          continue;
        }
        for (int g = 0; g < cs.groups; ++g) {
          for (int oc = 0; oc < cout_g; ++oc) {
            const int out_ch = g * cout_g + oc;
            const T* gyc = gy + out_ch * yplane;
            T* wg = wv->requires_grad
                        ? wv->grad.data() +
                              static_cast<std::size_t>(out_ch) * cin_g * kh * kw
                        : nullptr;
            const T* wval = wv->value.data() +
                            static_cast<std::size_t>(out_ch) * cin_g * kh * kw;
            for (int r = 0; r < hout; ++r) {
              for (int c = 0; c < wout; ++c) {
                const T g0 = gyc[static_cast<std::size_t>(r) * wout + c];
                if (g0 == T(0)) continue;
                for (int ic = 0; ic < cin_g; ++ic) {
                  const int in_ch = g * cin_g + ic;
                  const T* xc = xn + in_ch * xplane;
                  T* gxc = gx ? gx + in_ch * xplane : nullptr;
                  for (int p = 0; p < kh; ++p) {
                    const int rr = r * cs.stride - cs.padding + p * cs.dilation;
                    if (rr < 0 || rr >= xs.h) continue;
                    for (int q = 0; q < kw; ++q) {
                      const int cc = c * cs.stride - cs.padding + q * cs.dilation;
                      if (cc < 0 || cc >= xs.w) continue;
                      const std::size_t xi =
                          static_cast<std::size_t>(rr) * xs.w + cc;
                      const std::size_t wi =
                          static_cast<std::size_t>(ic) * kh * kw + p * kw + q;
                      if (gxc) gxc[xi] += wval[wi] * g0;
                      if (wg) wg[wi] += xc[xi] * g0;
                    }
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
Var<T> max_pool2d(const Var<T>& x, int k = 2, int stride = 2) {
  const Shape xs = x->shape;
  if (k != stride)
    throw std::invalid_argument("max_pool2d: only k == stride supported");
  if (xs.h % stride != 0 || xs.w % stride != 0)
    throw std::invalid_argument("max_pool2d: spatial size not divisible by stride");
  const int hout = xs.h / stride;
  const int wout = xs.w / stride;
  auto out = make_result<T>({xs.n, xs.c, hout, wout}, {x});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(out->value.size());

  const std::size_t xplane = xs.plane();
  const std::size_t yplane = static_cast<std::size_t>(hout) * wout;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* xc = x->value.data() + (static_cast<std::size_t>(n) * xs.c + c) * xplane;
      T* yc = out->value.data() + (static_cast<std::size_t>(n) * xs.c + c) * yplane;
      std::int32_t* am = argmax->data() + (static_cast<std::size_t>(n) * xs.c + c) * yplane;
      for (int r = 0; r < hout; ++r) {
        for (int cc = 0; cc < wout; ++cc) {
          T best = xc[static_cast<std::size_t>(r * stride) * xs.w + cc * stride];
          std::int32_t best_i =
              static_cast<std::int32_t>(r * stride * xs.w + cc * stride);
          for (int p = 0; p < k; ++p) {
            for (int q = 0; q < k; ++q) {
              const std::size_t xi =
                  static_cast<std::size_t>(r * stride + p) * xs.w + cc * stride + q;
              // First occurrence wins ties.
              if (xc[xi] > best) {
                best = xc[xi];
                best_i = static_cast<std::int32_t>(xi);
              }
            }
          }
          yc[static_cast<std::size_t>(r) * wout + cc] = best;
          am[static_cast<std::size_t>(r) * wout + cc] = best_i;
        }
      }
    }
  }
  if (out->requires_grad) {
    Var<T> xv = x;
    out->backward_fn = [xv, argmax, yplane, xplane](Node<T>& self) {
      xv->ensure_grad();
      const int planes = self.shape.n * self.shape.c;
      for (int pc = 0; pc < planes; ++pc) {
        T* gx = xv->grad.data() + pc * xplane;
        const T* gy = self.grad.data() + pc * yplane;
        const std::int32_t* am = argmax->data() + pc * yplane;
        for (std::size_t i = 0; i < yplane; ++i) gx[am[i]] += gy[i];
      }
    };
  }
  return out;
}

// Half-pixel-center bilinear upsampling by an integer factor.
template <typename T>
Var<T> bilinear_upsample(const Var<T>& x, int scale) {
  if (scale < 2) throw std::invalid_argument("bilinear_upsample: scale >= 2");
  const Shape xs = x->shape;
  const int hout = xs.h * scale;
  const int wout = xs.w * scale;
  auto out = make_result<T>({xs.n, xs.c, hout, wout}, {x});

  // Per-axis interpolation tables (depend only on o mod scale and clamping).
  std::vector<int> r0(hout), r1(hout), c0(wout), c1(wout);
  std::vector<T> rw(hout), cw(wout);  // weight of the "1" neighbor
  auto fill_axis = [scale](int nout, int nin, std::vector<int>& i0,
                           std::vector<int>& i1, std::vector<T>& wgt) {
    for (int o = 0; o < nout; ++o) {
      const double src = (o + 0.5) / scale - 0.5;
      double f = std::floor(src);
      double frac = src - f;
      int a = static_cast<int>(f);
      int b = a + 1;
      if (a < 0) { a = 0; b = std::min(1, nin - 1); frac = 0.0; }
      if (b > nin - 1) { b = nin - 1; a = nin - 1; frac = 0.0; }
      i0[o] = a;
      i1[o] = b;
      wgt[o] = static_cast<T>(frac);
    }
  };
  fill_axis(hout, xs.h, r0, r1, rw);
  fill_axis(wout, xs.w, c0, c1, cw);

  const std::size_t xplane = xs.plane();
  const std::size_t yplane = static_cast<std::size_t>(hout) * wout;
  const int planes = xs.n * xs.c;
  for (int pc = 0; pc < planes; ++pc) {
    const T* xc = x->value.data() + pc * xplane;
    T* yc = out->value.data() + pc * yplane;
    for (int r = 0; r < hout; ++r) {
      const T wr = rw[r];
      const T* row0 = xc + static_cast<std::size_t>(r0[r]) * xs.w;
      const T* row1 = xc + static_cast<std::size_t>(r1[r]) * xs.w;
      for (int c = 0; c < wout; ++c) {
        const T wc = cw[c];
        const T v00 = row0[c0[c]], v01 = row0[c1[c]];
        const T v10 = row1[c0[c]], v11 = row1[c1[c]];
        const T top = v00 + wc * (v01 - v00);
        const T bot = v10 + wc * (v11 - v10);
        yc[static_cast<std::size_t>(r) * wout + c] = top + wr * (bot - top);
      }
    }
  }
  if (out->requires_grad) {
    Var<T> xv = x;
    out->backward_fn = [xv, r0, r1, c0, c1, rw, cw, yplane, xplane,
                        wout = wout](Node<T>& self) {
      xv->ensure_grad();
      const Shape xs = xv->shape;
      const int planes = xs.n * xs.c;
      const int hout = self.shape.h;
      for (int pc = 0; pc < planes; ++pc) {
        T* gx = xv->grad.data() + pc * xplane;
        const T* gy = self.grad.data() + pc * yplane;
        for (int r = 0; r < hout; ++r) {
          const T wr = rw[r];
          for (int c = 0; c < wout; ++c) {
            const T g = gy[static_cast<std::size_t>(r) * wout + c];
            if (g == T(0)) continue;
            const T wc = cw[c];
            gx[static_cast<std::size_t>(r0[r]) * xs.w + c0[c]] +=
                (T(1) - wr) * (T(1) - wc) * g;
            gx[static_cast<std::size_t>(r0[r]) * xs.w + c1[c]] +=
                (T(1) - wr) * wc * g;
            gx[static_cast<std::size_t>(r1[r]) * xs.w + c0[c]] +=
                wr * (T(1) - wc) * g;
            gx[static_cast<std::size_t>(r1[r]) * xs.w + c1[c]] += wr * wc * g;
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  auto out = make_result<T>(x->shape, {x});
  for (std::size_t i = 0; i < x->value.size(); ++i)
    out->value[i] = x->value[i] > T(0) ? x->value[i] : T(0);
  if (out->requires_grad) {
    Var<T> xv = x;
    out->backward_fn = [xv](Node<T>& self) {
      xv->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (xv->value[i] > T(0)) xv->grad[i] += self.grad[i];
    };
  }
  return out;
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  const Shape s0 = xs[0]->shape;
  int ctotal = 0;
  for (const auto& x : xs) {
    if (x->shape.n != s0.n || x->shape.h != s0.h || x->shape.w != s0.w)
      throw std::invalid_argument("concat: non-channel axis mismatch");
    ctotal += x->shape.c;
  }
  auto out = make_result<T>({s0.n, ctotal, s0.h, s0.w}, xs);
  const std::size_t plane = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    std::size_t off = static_cast<std::size_t>(n) * ctotal * plane;
    for (const auto& x : xs) {
      const std::size_t sz = static_cast<std::size_t>(x->shape.c) * plane;
      std::copy_n(x->value.data() + static_cast<std::size_t>(n) * sz, sz,
                  out->value.data() + off);
      off += sz;
    }
  }
  if (out->requires_grad) {
    auto inputs = xs;
    out->backward_fn = [inputs, plane, ctotal](Node<T>& self) {
      for (int n = 0; n < self.shape.n; ++n) {
        std::size_t off = static_cast<std::size_t>(n) * ctotal * plane;
        for (const auto& x : inputs) {
          const std::size_t sz = static_cast<std::size_t>(x->shape.c) * plane;
          if (x->requires_grad) {
            x->ensure_grad();
            T* gx = x->grad.data() + static_cast<std::size_t>(n) * sz;
            const T* gy = self.grad.data() + off;
            for (std::size_t i = 0; i < sz; ++i) gx[i] += gy[i];
          }
          off += sz;
        }
      }
    };
  }
  return out;
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape xs = x->shape;
  auto out = make_result<T>({xs.n, xs.c, 1, 1}, {x});
  const std::size_t plane = xs.plane();
  for (int pc = 0; pc < xs.n * xs.c; ++pc) {
    const T* xc = x->value.data() + pc * plane;
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += xc[i];
    out->value[pc] = acc / static_cast<T>(plane);
  }
  if (out->requires_grad) {
    Var<T> xv = x;
    out->backward_fn = [xv, plane](Node<T>& self) {
      xv->ensure_grad();
      const int planes = xv->shape.n * xv->shape.c;
      for (int pc = 0; pc < planes; ++pc) {
        const T g = self.grad[pc] / static_cast<T>(plane);
        T* gx = xv->grad.data() + pc * plane;
        for (std::size_t i = 0; i < plane; ++i) gx[i] += g;
      }
    };
  }
  return out;
}

// Broadcast an N x C x 1 x 1 tensor across a spatial extent.
template <typename T>
Var<T> broadcast_hw(const Var<T>& x, int h, int w) {
  const Shape xs = x->shape;
  if (xs.h != 1 || xs.w != 1)
    throw std::invalid_argument("broadcast_hw: input must be N x C x 1 x 1");
  auto out = make_result<T>({xs.n, xs.c, h, w}, {x});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int pc = 0; pc < xs.n * xs.c; ++pc)
    std::fill_n(out->value.data() + pc * plane, plane, x->value[pc]);
  if (out->requires_grad) {
    Var<T> xv = x;
    out->backward_fn = [xv, plane](Node<T>& self) {
      xv->ensure_grad();
      const int planes = xv->shape.n * xv->shape.c;
      for (int pc = 0; pc < planes; ++pc) {
        T acc = 0;
        const T* gy = self.grad.data() + pc * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += gy[i];
        xv->grad[pc] += acc;
      }
    };
  }
  return out;
}

// Per-channel batch normalization. In training mode the batch statistics
// are used and optionally reported through saved_mean/saved_var (biased);
// running statistics are the caller's concern (see nn::BatchNorm2d). In
// eval mode the provided running statistics are treated as constants.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  const std::vector<T>& running_mean,
                  const std::vector<T>& running_var, bool training,
                  T eps = T(1e-5), std::vector<T>* saved_mean = nullptr,
                  std::vector<T>* saved_var = nullptr) {
  const Shape xs = x->shape;
  const int C = xs.c;
  if (static_cast<int>(gamma->value.size()) != C ||
      static_cast<int>(beta->value.size()) != C)
    throw std::invalid_argument("batch_norm: parameter size mismatch");
  auto out = make_result<T>(xs, {x, gamma, beta});
  const std::size_t plane = xs.plane();
  const std::size_t m = static_cast<std::size_t>(xs.n) * plane;

  std::vector<T> mean(C), invstd(C), var(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      T acc = 0;
      for (int n = 0; n < xs.n; ++n) {
        const T* xc = x->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += xc[i];
      }
      mean[c] = acc / static_cast<T>(m);
      T acc2 = 0;
      for (int n = 0; n < xs.n; ++n) {
        const T* xc = x->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = xc[i] - mean[c];
          acc2 += d * d;
        }
      }
      var[c] = acc2 / static_cast<T>(m);
      invstd[c] = T(1) / std::sqrt(var[c] + eps);
    }
    if (saved_mean) *saved_mean = mean;
    if (saved_var) *saved_var = var;
  } else {
    if (static_cast<int>(running_mean.size()) != C ||
        static_cast<int>(running_var.size()) != C)
      throw std::invalid_argument("batch_norm: running statistics missing");
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = T(1) / std::sqrt(running_var[c] + eps);
    }
  }

  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* xc = x->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      T* yc = out->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      const T g = gamma->value[c], b = beta->value[c];
      const T mu = mean[c], is = invstd[c];
      for (std::size_t i = 0; i < plane; ++i)
        yc[i] = g * (xc[i] - mu) * is + b;
    }
  }

  if (out->requires_grad) {
    Var<T> xv = x, gv = gamma, bv = beta;
    auto mean_c = std::make_shared<std::vector<T>>(std::move(mean));
    auto invstd_c = std::make_shared<std::vector<T>>(std::move(invstd));
    out->backward_fn = [xv, gv, bv, mean_c, invstd_c, plane, m,
                        training](Node<T>& self) {
      const int C = xv->shape.c;
      const int N = xv->shape.n;
      if (xv->requires_grad) xv->ensure_grad();
      gv->ensure_grad();
      bv->ensure_grad();
      for (int c = 0; c < C; ++c) {
        const T mu = (*mean_c)[c], is = (*invstd_c)[c];
        T sum_gy = 0, sum_gy_xhat = 0;
        for (int n = 0; n < N; ++n) {
          const T* xc = xv->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
          const T* gy = self.grad.data() + (static_cast<std::size_t>(n) * C + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            sum_gy += gy[i];
            sum_gy_xhat += gy[i] * (xc[i] - mu) * is;
          }
        }
        gv->grad[c] += sum_gy_xhat;
        bv->grad[c] += sum_gy;
        if (!xv->requires_grad) continue;
        const T g = gv->value[c];
        for (int n = 0; n < N; ++n) {
          const T* xc = xv->value.data() + (static_cast<std::size_t>(n) * C + c) * plane;
          const T* gy = self.grad.data() + (static_cast<std::size_t>(n) * C + c) * plane;
          T* gx = xv->grad.data() + (static_cast<std::size_t>(n) * C + c) * plane;
          if (training) {
            const T inv_m = T(1) / static_cast<T>(m);
            for (std::size_t i = 0; i < plane; ++i) {
              const T xhat = (xc[i] - mu) * is;
              gx[i] += g * is *
                       (gy[i] - inv_m * (sum_gy + xhat * sum_gy_xhat));
            }
          } else {
            for (std::size_t i = 0; i < plane; ++i) gx[i] += g * is * gy[i];
          }
        }
      }
    };
  }
  return out;
}

enum class LossReduction { mean, sum };

struct MaskedLossInfo {
  std::size_t labeled_count = 0;
  bool all_unlabeled = false;
};

// Negative log-likelihood over labeled pixels only. Labels: one code per
// pixel, row-major per batch element; kUnlabeled contributes nothing to
// value or gradient. Mean reduction divides by the labeled-pixel count.
template <typename T>
Var<T> masked_log_softmax_nll(const Var<T>& logits,
                              const std::vector<std::uint8_t>& labels,
                              LossReduction reduction = LossReduction::mean,
                              MaskedLossInfo* info = nullptr) {
  const Shape xs = logits->shape;
  const std::size_t plane = xs.plane();
  if (labels.size() != static_cast<std::size_t>(xs.n) * plane)
    throw std::invalid_argument("masked loss: label count mismatch");
  for (std::uint8_t l : labels)
    if (l >= xs.c && l != kUnlabeled)
      throw std::invalid_argument("masked loss: label code out of range");

  auto out = make_result<T>({1, 1, 1, 1}, {logits});
  std::size_t labeled = 0;
  T total = 0;
  for (int n = 0; n < xs.n; ++n) {
    const T* xn = logits->value.data() + static_cast<std::size_t>(n) * xs.c * plane;
    const std::uint8_t* ln = labels.data() + static_cast<std::size_t>(n) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint8_t lab = ln[i];
      if (lab == kUnlabeled) continue;
      ++labeled;
      T mx = xn[i];
      for (int c = 1; c < xs.c; ++c) mx = std::max(mx, xn[c * plane + i]);
      T lse = 0;
      for (int c = 0; c < xs.c; ++c) lse += std::exp(xn[c * plane + i] - mx);
      lse = mx + std::log(lse);
      total += lse - xn[static_cast<std::size_t>(lab) * plane + i];
    }
  }
  if (info) {
    info->labeled_count = labeled;
    info->all_unlabeled = labeled == 0;
  }
  if (labeled == 0) {
    out->value[0] = T(0);
    return out;  // zero loss, zero gradients
  }
  out->value[0] =
      reduction == LossReduction::mean ? total / static_cast<T>(labeled) : total;

  if (out->requires_grad) {
    Var<T> xv = logits;
    out->backward_fn = [xv, labels, labeled, reduction, plane](Node<T>& self) {
      xv->ensure_grad();
      const Shape xs = xv->shape;
      const T scale =
          self.grad[0] * (reduction == LossReduction::mean
                              ? T(1) / static_cast<T>(labeled)
                              : T(1));
      for (int n = 0; n < xs.n; ++n) {
        const T* xn = xv->value.data() + static_cast<std::size_t>(n) * xs.c * plane;
        T* gx = xv->grad.data() + static_cast<std::size_t>(n) * xs.c * plane;
        const std::uint8_t* ln = labels.data() + static_cast<std::size_t>(n) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const std::uint8_t lab = ln[i];
          if (lab == kUnlabeled) continue;
          T mx = xn[i];
          for (int c = 1; c < xs.c; ++c) mx = std::max(mx, xn[c * plane + i]);
          T denom = 0;
          for (int c = 0; c < xs.c; ++c)
            denom += std::exp(xn[c * plane + i] - mx);
          for (int c = 0; c < xs.c; ++c) {
            const T p = std::exp(xn[c * plane + i] - mx) / denom;
            gx[c * plane + i] += scale * (p - (c == lab ? T(1) : T(0)));
          }
        }
      }
    };
  }
  return out;
}

// Per-pixel argmax over the class axis; ties break toward the lowest code.
template <typename T>
std::vector<std::uint8_t> argmax_classes(const Var<T>& logits) {
  const Shape xs = logits->shape;
  const std::size_t plane = xs.plane();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(xs.n) * plane);
  for (int n = 0; n < xs.n; ++n) {
    const T* xn = logits->value.data() + static_cast<std::size_t>(n) * xs.c * plane;
    std::uint8_t* on = out.data() + static_cast<std::size_t>(n) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      T best = xn[i];
      int best_c = 0;
      for (int c = 1; c < xs.c; ++c) {
        const T v = xn[c * plane + i];
        if (v > best) {
          best = v;
          best_c = c;
        }
      }
      on[i] = static_cast<std::uint8_t>(best_c);
    }
  }
  return out;
}

}  // namespace cldnet::ag
