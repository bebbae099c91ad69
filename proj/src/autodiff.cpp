#include "posekit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "posekit/errors.hpp"
#include "posekit/kernels.hpp"

namespace posekit::ad {
namespace {

namespace k = posekit::kernels;

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& v : inputs) {
    n->inputs.push_back(v.node());
    n->requires_grad = n->requires_grad || v.requires_grad();
  }
  if (n->requires_grad) n->backward = std::move(bwd);
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val()))
    throw ConfigError(std::string(op) + ": shape mismatch " + a.val().shape_str() + " vs " +
                      b.val().shape_str());
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var Var::leaf_shared(const Tensor& value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = value;  // shares storage
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.val().numel() != 1) throw ConfigError("backward: root must be scalar");
  // Iterative post-order DFS; reversing the finish order gives nodes in
  // root-to-leaf order for gradient propagation.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->inputs.size()) {
      Node* in = n->inputs[idx++].get();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.emplace_back(in, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.allocated()) n->backward(*n);
  }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::uninit(a.val().shape());
  k::add(a.val().data(), b.val().data(), out.data(), static_cast<std::size_t>(out.numel()));
  return make_node(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node& n) {
    const std::size_t sz = static_cast<std::size_t>(n.value.numel());
    if (an->requires_grad) k::axpy(1.0, n.grad.data(), an->ensure_grad().data(), sz);
    if (bn->requires_grad) k::axpy(1.0, n.grad.data(), bn->ensure_grad().data(), sz);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::uninit(a.val().shape());
  k::sub(a.val().data(), b.val().data(), out.data(), static_cast<std::size_t>(out.numel()));
  return make_node(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node& n) {
    const std::size_t sz = static_cast<std::size_t>(n.value.numel());
    if (an->requires_grad) k::axpy(1.0, n.grad.data(), an->ensure_grad().data(), sz);
    if (bn->requires_grad) k::axpy(-1.0, n.grad.data(), bn->ensure_grad().data(), sz);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::uninit(a.val().shape());
  const std::size_t sz = static_cast<std::size_t>(out.numel());
  k::mul(a.val().data(), b.val().data(), out.data(), sz);
  return make_node(std::move(out), {a, b}, [an = a.node(), bn = b.node(), sz](Node& n) {
    const double* g = n.grad.data();
    if (an->requires_grad) {
      double* ga = an->ensure_grad().data();
      const double* bv = bn->value.data();
      for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * bv[i];
    }
    if (bn->requires_grad) {
      double* gb = bn->ensure_grad().data();
      const double* av = an->value.data();
      for (std::size_t i = 0; i < sz; ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.val().clone();
  double* d = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) d[i] += s;
  return make_node(std::move(out), {a}, [an = a.node()](Node& n) {
    k::axpy(1.0, n.grad.data(), an->ensure_grad().data(),
            static_cast<std::size_t>(n.value.numel()));
  });
}

Var mul_scalar(const Var& a, double s) {
  Tensor out = a.val().clone();
  k::scale(s, out.data(), static_cast<std::size_t>(out.numel()));
  return make_node(std::move(out), {a}, [an = a.node(), s](Node& n) {
    k::axpy(s, n.grad.data(), an->ensure_grad().data(),
            static_cast<std::size_t>(n.value.numel()));
  });
}

Var relu(const Var& a) {
  Tensor out = Tensor::uninit(a.val().shape());
  const std::size_t sz = static_cast<std::size_t>(out.numel());
  k::relu(a.val().data(), out.data(), sz);
  return make_node(std::move(out), {a}, [an = a.node(), sz](Node& n) {
    k::relu_grad(an->value.data(), n.grad.data(), an->ensure_grad().data(), sz);
  });
}

Var sigmoid(const Var& a) {
  Tensor out = Tensor::uninit(a.val().shape());
  const std::size_t sz = static_cast<std::size_t>(out.numel());
  const double* x = a.val().data();
  double* y = out.data();
  for (std::size_t i = 0; i < sz; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  Tensor saved = out;  // shares storage with the node value
  return make_node(std::move(out), {a}, [an = a.node(), saved, sz](Node& n) {
    double* ga = an->ensure_grad().data();
    const double* g = n.grad.data();
    const double* s = saved.data();
    for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var abs(const Var& a) {
  Tensor out = Tensor::uninit(a.val().shape());
  const std::size_t sz = static_cast<std::size_t>(out.numel());
  const double* x = a.val().data();
  double* y = out.data();
  for (std::size_t i = 0; i < sz; ++i) y[i] = std::fabs(x[i]);
  return make_node(std::move(out), {a}, [an = a.node(), sz](Node& n) {
    double* ga = an->ensure_grad().data();
    const double* g = n.grad.data();
    const double* x = an->value.data();
    // subgradient 0 at x == 0
    for (std::size_t i = 0; i < sz; ++i)
      ga[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
  });
}

Var mul_bcast0(const Var& x, const Var& w) {
  if (x.val().ndim() < 2 || w.val().ndim() != x.val().ndim() || w.val().dim(0) != 1)
    throw ConfigError("mul_bcast0: weight must have leading dimension 1");
  const std::int64_t slab = x.val().numel() / x.val().dim(0);
  if (w.val().numel() != slab) throw ConfigError("mul_bcast0: trailing shape mismatch");
  const int lead = x.val().dim(0);
  Tensor out = Tensor::uninit(x.val().shape());
  for (int c = 0; c < lead; ++c)
    k::mul(x.val().data() + c * slab, w.val().data(), out.data() + c * slab,
           static_cast<std::size_t>(slab));
  return make_node(std::move(out), {x, w}, [xn = x.node(), wn = w.node(), lead, slab](Node& n) {
    const double* g = n.grad.data();
    if (xn->requires_grad) {
      double* gx = xn->ensure_grad().data();
      const double* wv = wn->value.data();
      for (int c = 0; c < lead; ++c)
        for (std::int64_t i = 0; i < slab; ++i) gx[c * slab + i] += g[c * slab + i] * wv[i];
    }
    if (wn->requires_grad) {
      double* gw = wn->ensure_grad().data();
      const double* xv = xn->value.data();
      for (int c = 0; c < lead; ++c)
        for (std::int64_t i = 0; i < slab; ++i) gw[i] += g[c * slab + i] * xv[c * slab + i];
    }
  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
  if (a.val().ndim() != 2 || b.val().ndim() != 2 || a.val().dim(1) != b.val().dim(0))
    throw ConfigError("matmul: incompatible shapes " + a.val().shape_str() + " * " +
                      b.val().shape_str());
  const int m = a.val().dim(0), kk = a.val().dim(1), n = b.val().dim(1);
  Tensor out({m, n});
  if (n <= 16 && kk >= 64) {
    // skinny right operand (graph features, coordinate reductions): keep a
    // transposed copy so both passes run on contiguous dot products
    Tensor bt = Tensor::uninit({n, kk});
    for (int p = 0; p < kk; ++p)
      for (int j = 0; j < n; ++j) bt.at2(j, p) = b.val().at2(p, j);
    k::matmul_nt(a.val().data(), bt.data(), out.data(), m, kk, n);
    return make_node(std::move(out), {a, b},
                     [an = a.node(), bn = b.node(), bt, m, kk, n](Node& nd) {
                       const double* g = nd.grad.data();
                       if (an->requires_grad)  // ga += g * b^T, bt already is b^T
                         k::matmul(g, bt.data(), an->ensure_grad().data(), m, n, kk);
                       if (bn->requires_grad)  // gb += a^T * g
                         k::matmul_tn(an->value.data(), g, bn->ensure_grad().data(), m, kk, n);
                     });
  }
  k::matmul(a.val().data(), b.val().data(), out.data(), m, kk, n);
  return make_node(std::move(out), {a, b}, [an = a.node(), bn = b.node(), m, kk, n](Node& nd) {
    const double* g = nd.grad.data();
    if (an->requires_grad)  // ga += g * b^T
      k::matmul_nt(g, bn->value.data(), an->ensure_grad().data(), m, n, kk);
    if (bn->requires_grad)  // gb += a^T * g
      k::matmul_tn(an->value.data(), g, bn->ensure_grad().data(), m, kk, n);
  });
}

Var transpose(const Var& a) {
  if (a.val().ndim() != 2) throw ConfigError("transpose: expected 2-D tensor");
  const int r = a.val().dim(0), c = a.val().dim(1);
  Tensor out = Tensor::uninit({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(j, i) = a.val().at2(i, j);
  return make_node(std::move(out), {a}, [an = a.node(), r, c](Node& n) {
    Tensor& ga = an->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ga.at2(i, j) += n.grad.at2(j, i);
  });
}

Var add_bias_cols(const Var& x, const Var& bias) {
  if (x.val().ndim() != 2 || bias.val().numel() != x.val().dim(0))
    throw ConfigError("add_bias_cols: bias length must equal row count");
  const int r = x.val().dim(0), c = x.val().dim(1);
  Tensor out = x.val().clone();
  for (int i = 0; i < r; ++i) {
    const double bv = bias.val()[i];
    double* row = out.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) row[j] += bv;
  }
  return make_node(std::move(out), {x, bias}, [xn = x.node(), bn = bias.node(), r, c](Node& n) {
    if (xn->requires_grad)
      k::axpy(1.0, n.grad.data(), xn->ensure_grad().data(), static_cast<std::size_t>(n.value.numel()));
    if (bn->requires_grad) {
      Tensor& gb = bn->ensure_grad();
      for (int i = 0; i < r; ++i)
        gb[i] += k::sum(n.grad.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c));
    }
  });
}

Var linear_cols(const Var& w, const Var& x, const Var& bias) {
  return add_bias_cols(matmul(w, x), bias);
}

// ------------------------------------------------------------------ reductions

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(k::sum(a.val().data(), static_cast<std::size_t>(a.val().numel())));
  return make_node(std::move(out), {a}, [an = a.node()](Node& n) {
    const double g = n.grad[0];
    Tensor& ga = an->ensure_grad();
    double* d = ga.data();
    for (std::int64_t i = 0; i < ga.numel(); ++i) d[i] += g;
  });
}

Var softmax_rows(const Var& a) {
  if (a.val().ndim() != 2) throw ConfigError("softmax_rows: expected 2-D tensor");
  const int r = a.val().dim(0), c = a.val().dim(1);
  Tensor out = Tensor::uninit({r, c});
  for (int i = 0; i < r; ++i) {
    const double* x = a.val().data() + static_cast<std::size_t>(i) * c;
    double* y = out.data() + static_cast<std::size_t>(i) * c;
    double m = x[0];
    for (int j = 1; j < c; ++j) m = std::max(m, x[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - m);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < c; ++j) y[j] *= inv;
  }
  Tensor saved = out;
  return make_node(std::move(out), {a}, [an = a.node(), saved, r, c](Node& n) {
    Tensor& ga = an->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* y = saved.data() + static_cast<std::size_t>(i) * c;
      const double* g = n.grad.data() + static_cast<std::size_t>(i) * c;
      double* gx = ga.data() + static_cast<std::size_t>(i) * c;
      const double dotgy = k::dot(g, y, static_cast<std::size_t>(c));
      for (int j = 0; j < c; ++j) gx[j] += y[j] * (g[j] - dotgy);
    }
  });
}

Var row_max(const Var& a) {
  if (a.val().ndim() != 2) throw ConfigError("row_max: expected 2-D tensor");
  const int r = a.val().dim(0), c = a.val().dim(1);
  Tensor out = Tensor::uninit({r, 1});
  auto arg = std::make_shared<std::vector<int>>(r);
  for (int i = 0; i < r; ++i) {
    const double* x = a.val().data() + static_cast<std::size_t>(i) * c;
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (x[j] > x[best]) best = j;
    (*arg)[i] = best;
    out[i] = x[best];
  }
  return make_node(std::move(out), {a}, [an = a.node(), arg, c](Node& n) {
    Tensor& ga = an->ensure_grad();
    for (int i = 0; i < n.value.dim(0); ++i)
      ga[static_cast<std::size_t>(i) * c + (*arg)[i]] += n.grad[i];
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = Tensor::uninit(shape);
  if (out.numel() != a.val().numel())
    throw ConfigError("reshape: element count mismatch " + a.val().shape_str());
  std::memcpy(out.data(), a.val().data(), static_cast<std::size_t>(out.numel()) * sizeof(double));
  return make_node(std::move(out), {a}, [an = a.node()](Node& n) {
    k::axpy(1.0, n.grad.data(), an->ensure_grad().data(),
            static_cast<std::size_t>(n.value.numel()));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  const int cols = parts[0].val().dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    if (p.val().ndim() != 2 || p.val().dim(1) != cols)
      throw ConfigError("concat_rows: column mismatch");
    rows += p.val().dim(0);
  }
  Tensor out = Tensor::uninit({rows, cols});
  int r0 = 0;
  for (const auto& p : parts) {
    std::memcpy(out.data() + static_cast<std::size_t>(r0) * cols, p.val().data(),
                static_cast<std::size_t>(p.val().numel()) * sizeof(double));
    r0 += p.val().dim(0);
  }
  return make_node(std::move(out), parts, [cols](Node& n) {
    int r0 = 0;
    for (auto& in : n.inputs) {
      const int r = in->value.dim(0);
      if (in->requires_grad)
        k::axpy(1.0, n.grad.data() + static_cast<std::size_t>(r0) * cols,
                in->ensure_grad().data(), static_cast<std::size_t>(r) * cols);
      r0 += r;
    }
  });
}

Var slice_rows(const Var& a, int r0, int r1) {
  if (a.val().ndim() != 2 || r0 < 0 || r1 > a.val().dim(0) || r0 >= r1)
    throw ConfigError("slice_rows: bad range");
  const int cols = a.val().dim(1);
  Tensor out = Tensor::uninit({r1 - r0, cols});
  std::memcpy(out.data(), a.val().data() + static_cast<std::size_t>(r0) * cols,
              static_cast<std::size_t>(out.numel()) * sizeof(double));
  return make_node(std::move(out), {a}, [an = a.node(), r0, cols](Node& n) {
    k::axpy(1.0, n.grad.data(), an->ensure_grad().data() + static_cast<std::size_t>(r0) * cols,
            static_cast<std::size_t>(n.value.numel()));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  const int rows = parts[0].val().dim(0);
  int cols = 0;
  for (const auto& p : parts) {
    if (p.val().ndim() != 2 || p.val().dim(0) != rows)
      throw ConfigError("concat_cols: row mismatch");
    cols += p.val().dim(1);
  }
  Tensor out = Tensor::uninit({rows, cols});
  int c0 = 0;
  for (const auto& p : parts) {
    const int pc = p.val().dim(1);
    for (int i = 0; i < rows; ++i)
      std::memcpy(out.data() + static_cast<std::size_t>(i) * cols + c0,
                  p.val().data() + static_cast<std::size_t>(i) * pc,
                  static_cast<std::size_t>(pc) * sizeof(double));
    c0 += pc;
  }
  return make_node(std::move(out), parts, [rows, cols](Node& n) {
    int c0 = 0;
    for (auto& in : n.inputs) {
      const int pc = in->value.dim(1);
      if (in->requires_grad) {
        Tensor& g = in->ensure_grad();
        for (int i = 0; i < rows; ++i)
          k::axpy(1.0, n.grad.data() + static_cast<std::size_t>(i) * cols + c0,
                  g.data() + static_cast<std::size_t>(i) * pc, static_cast<std::size_t>(pc));
      }
      c0 += pc;
    }
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  if (a.val().ndim() != 2 || c0 < 0 || c1 > a.val().dim(1) || c0 >= c1)
    throw ConfigError("slice_cols: bad range");
  const int rows = a.val().dim(0), cols = a.val().dim(1), w = c1 - c0;
  Tensor out = Tensor::uninit({rows, w});
  for (int i = 0; i < rows; ++i)
    std::memcpy(out.data() + static_cast<std::size_t>(i) * w,
                a.val().data() + static_cast<std::size_t>(i) * cols + c0,
                static_cast<std::size_t>(w) * sizeof(double));
  return make_node(std::move(out), {a}, [an = a.node(), c0, cols, w, rows](Node& n) {
    Tensor& ga = an->ensure_grad();
    for (int i = 0; i < rows; ++i)
      k::axpy(1.0, n.grad.data() + static_cast<std::size_t>(i) * w,
              ga.data() + static_cast<std::size_t>(i) * cols + c0, static_cast<std::size_t>(w));
  });
}

// ------------------------------------------------------------------ image ops

namespace {

void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int out_h, int out_w,
            Tensor& col) {
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cols = out_h * out_w;
  double* cd = col.data();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* row = cd + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * out_w + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at3(c, iy, ix) : 0.0;
          }
        }
      }
}

void col2im_acc(const Tensor& col, int c_in, int h, int w, int kh, int kw, int stride, int pad,
                int out_h, int out_w, Tensor& gx) {
  const int cols = out_h * out_w;
  const double* cd = col.data();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* row = cd + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) gx.at3(c, iy, ix) += row[oy * out_w + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
  if (x.val().ndim() != 3 || w.val().ndim() != 4)
    throw ConfigError("conv2d: expected 3-D input and 4-D weight");
  const int c_in = x.val().dim(0), h = x.val().dim(1), ww = x.val().dim(2);
  const int c_out = w.val().dim(0), kh = w.val().dim(2), kw = w.val().dim(3);
  if (w.val().dim(1) != c_in)
    throw ConfigError("conv2d: weight expects " + std::to_string(w.val().dim(1)) +
                      " input channels, got " + std::to_string(c_in));
  if (bias.val().numel() != c_out) throw ConfigError("conv2d: bias length mismatch");
  const int out_h = (h + 2 * pad - kh) / stride + 1;
  const int out_w = (ww + 2 * pad - kw) / stride + 1;
  if (out_h <= 0 || out_w <= 0) throw ConfigError("conv2d: empty output");

  const int q = c_in * kh * kw, p = out_h * out_w;
  Tensor col = Tensor::uninit({q, p});
  im2col(x.val(), kh, kw, stride, pad, out_h, out_w, col);
  Tensor out({c_out, out_h, out_w});
  k::matmul(w.val().data(), col.data(), out.data(), c_out, q, p);
  for (int o = 0; o < c_out; ++o) {
    const double bv = bias.val()[o];
    double* od = out.data() + static_cast<std::size_t>(o) * p;
    for (int i = 0; i < p; ++i) od[i] += bv;
  }
  return make_node(
      std::move(out), {x, w, bias},
      [xn = x.node(), wn = w.node(), bn = bias.node(), col, c_in, h, ww, kh, kw, stride, pad,
       out_h, out_w, c_out, q, p](Node& n) {
        const double* g = n.grad.data();
        if (wn->requires_grad)
          k::matmul_nt(g, col.data(), wn->ensure_grad().data(), c_out, p, q);
        if (bn->requires_grad) {
          Tensor& gb = bn->ensure_grad();
          for (int o = 0; o < c_out; ++o)
            gb[o] += k::sum(g + static_cast<std::size_t>(o) * p, static_cast<std::size_t>(p));
        }
        if (xn->requires_grad) {
          Tensor gcol({q, p});
          k::matmul_tn(wn->value.data(), g, gcol.data(), c_out, q, p);
          col2im_acc(gcol, c_in, h, ww, kh, kw, stride, pad, out_h, out_w, xn->ensure_grad());
        }
      });
}

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  if (x.val().ndim() != 3) throw ConfigError("bilinear_resize: expected 3-D tensor");
  const int c = x.val().dim(0), h = x.val().dim(1), w = x.val().dim(2);
  // align-corners-false sample positions, border clamped
  struct Lin {
    int i0, i1;
    double f;
  };
  auto axis = [](int in, int out) {
    std::vector<Lin> v(out);
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * static_cast<double>(in) / out - 0.5;
      s = std::min(std::max(s, 0.0), static_cast<double>(in - 1));
      const int i0 = std::min(static_cast<int>(s), in - 2 >= 0 ? in - 2 : 0);
      v[o] = {i0, std::min(i0 + 1, in - 1), s - i0};
    }
    return v;
  };
  auto ax = std::make_shared<std::vector<Lin>>(axis(w, out_w));
  auto ay = std::make_shared<std::vector<Lin>>(axis(h, out_h));
  Tensor out = Tensor::uninit({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h; ++oy) {
      const Lin& ly = (*ay)[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const Lin& lx = (*ax)[ox];
        const double v00 = x.val().at3(ch, ly.i0, lx.i0), v01 = x.val().at3(ch, ly.i0, lx.i1);
        const double v10 = x.val().at3(ch, ly.i1, lx.i0), v11 = x.val().at3(ch, ly.i1, lx.i1);
        out.at3(ch, oy, ox) = (1 - ly.f) * ((1 - lx.f) * v00 + lx.f * v01) +
                              ly.f * ((1 - lx.f) * v10 + lx.f * v11);
      }
    }
  return make_node(std::move(out), {x}, [xn = x.node(), ax, ay, c, out_h, out_w](Node& n) {
    Tensor& gx = xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < out_h; ++oy) {
        const Lin& ly = (*ay)[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const Lin& lx = (*ax)[ox];
          const double g = n.grad.at3(ch, oy, ox);
          gx.at3(ch, ly.i0, lx.i0) += (1 - ly.f) * (1 - lx.f) * g;
          gx.at3(ch, ly.i0, lx.i1) += (1 - ly.f) * lx.f * g;
          gx.at3(ch, ly.i1, lx.i0) += ly.f * (1 - lx.f) * g;
          gx.at3(ch, ly.i1, lx.i1) += ly.f * lx.f * g;
        }
      }
  });
}

Var grid_sample(const Var& featmap, const Var& coords) {
  if (featmap.val().ndim() != 3 || coords.val().ndim() != 2 || coords.val().dim(0) != 2)
    throw ConfigError("grid_sample: expected (C x h x w) map and (2 x N) coords");
  const int c = featmap.val().dim(0), h = featmap.val().dim(1), w = featmap.val().dim(2);
  const int npts = coords.val().dim(1);
  if (h < 2 || w < 2) throw ConfigError("grid_sample: map must be at least 2x2");
  if (!coords.val().all_finite()) throw NumericError("grid_sample: non-finite coordinates");

  struct Pt {
    int x0, y0;
    double fx, fy;
    double dudx, dvdy;  // 0 when clamped at the border
  };
  auto pts = std::make_shared<std::vector<Pt>>(npts);
  Tensor out = Tensor::uninit({c, npts});
  for (int i = 0; i < npts; ++i) {
    const double xn = coords.val().at2(0, i), yn = coords.val().at2(1, i);
    double u = ((xn + 1.0) * w - 1.0) * 0.5;
    double v = ((yn + 1.0) * h - 1.0) * 0.5;
    double dudx = 0.5 * w, dvdy = 0.5 * h;
    if (u < 0.0 || u > w - 1) {
      u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
      dudx = 0.0;
    }
    if (v < 0.0 || v > h - 1) {
      v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
      dvdy = 0.0;
    }
    const int x0 = std::min(static_cast<int>(u), w - 2);
    const int y0 = std::min(static_cast<int>(v), h - 2);
    (*pts)[i] = {x0, y0, u - x0, v - y0, dudx, dvdy};
    const Pt& pt = (*pts)[i];
    for (int ch = 0; ch < c; ++ch) {
      const double v00 = featmap.val().at3(ch, pt.y0, pt.x0);
      const double v01 = featmap.val().at3(ch, pt.y0, pt.x0 + 1);
      const double v10 = featmap.val().at3(ch, pt.y0 + 1, pt.x0);
      const double v11 = featmap.val().at3(ch, pt.y0 + 1, pt.x0 + 1);
      out.at2(ch, i) = (1 - pt.fy) * ((1 - pt.fx) * v00 + pt.fx * v01) +
                       pt.fy * ((1 - pt.fx) * v10 + pt.fx * v11);
    }
  }
  return make_node(std::move(out), {featmap, coords},
                   [fn = featmap.node(), cn = coords.node(), pts, c, npts](Node& n) {
                     for (int i = 0; i < npts; ++i) {
                       const Pt& pt = (*pts)[i];
                       double gx = 0.0, gy = 0.0;
                       for (int ch = 0; ch < c; ++ch) {
                         const double g = n.grad.at2(ch, i);
                         const double v00 = fn->value.at3(ch, pt.y0, pt.x0);
                         const double v01 = fn->value.at3(ch, pt.y0, pt.x0 + 1);
                         const double v10 = fn->value.at3(ch, pt.y0 + 1, pt.x0);
                         const double v11 = fn->value.at3(ch, pt.y0 + 1, pt.x0 + 1);
                         if (fn->requires_grad) {
                           Tensor& gf = fn->ensure_grad();
                           gf.at3(ch, pt.y0, pt.x0) += (1 - pt.fy) * (1 - pt.fx) * g;
                           gf.at3(ch, pt.y0, pt.x0 + 1) += (1 - pt.fy) * pt.fx * g;
                           gf.at3(ch, pt.y0 + 1, pt.x0) += pt.fy * (1 - pt.fx) * g;
                           gf.at3(ch, pt.y0 + 1, pt.x0 + 1) += pt.fy * pt.fx * g;
                         }
                         gx += g * ((v01 - v00) * (1 - pt.fy) + (v11 - v10) * pt.fy);
                         gy += g * ((v10 - v00) * (1 - pt.fx) + (v11 - v01) * pt.fx);
                       }
                       if (cn->requires_grad) {
                         Tensor& gc = cn->ensure_grad();
                         gc.at2(0, i) += gx * pt.dudx;
                         gc.at2(1, i) += gy * pt.dvdy;
                       }
                     }
                   });
}

}  // namespace posekit::ad
