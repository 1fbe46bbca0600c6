#include "smoe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace smoe {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_node(Shape{}, std::vector<double>{value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = node_->shape;
  if (s.size() != 4) throw ShapeError("at(n,c,h,w) requires rank 4, got " + shape_str(s));
  return node_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  node_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->data, false)); }
Tensor Tensor::clone() const { return detach(); }
bool Tensor::is_leaf() const { return !node_->backward; }

namespace {
thread_local bool g_no_grad = false;
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                   BackwardFn backward_fn) {
  bool any = !g_no_grad && std::any_of(parents.begin(), parents.end(),
                         [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  auto node = new_node(std::move(shape), std::move(data), any);
  if (any) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on an undefined tensor");
  if (loss.numel() != 1) throw GraphError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  auto root = loss.node();
  if (root->consumed) throw GraphError("graph already consumed: backward called twice without a new forward pass");
  if (!root->requires_grad) throw GraphError("loss does not require a gradient");

  // Iterative post-order DFS gives a topological order of the recorded ops.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (node->backward) node->grad.assign(node->data.size(), 0.0);
    else if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
  }
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    ParentGrads pg(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      auto* p = node->parents[i].get();
      if (p && p->requires_grad) pg[i] = &p->grad;
    }
    node->backward(node->grad, pg);
  }

  for (auto* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->consumed = true;
    }
  }
  root->consumed = true;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

// Valid output range [lo, hi) along one axis for input offset `off`
// (input index = out * stride + off).
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_range(std::ptrdiff_t out_extent, std::ptrdiff_t in_extent,
                                                      std::ptrdiff_t stride, std::ptrdiff_t off) {
  std::ptrdiff_t lo = 0;
  if (off < 0) lo = (-off + stride - 1) / stride;
  std::ptrdiff_t hi = out_extent;
  // out*stride + off <= in_extent - 1
  std::ptrdiff_t max_out = in_extent - 1 - off;
  if (max_out < 0) return {0, 0};
  hi = std::min(hi, max_out / stride + 1);
  return {lo, std::max(lo, hi)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dOptions opt) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (opt.dilation < 1 || opt.stride < 1) throw ShapeError("conv2d stride and dilation must be >= 1");
  const auto n_batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.numel() != cout)) {
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(weight.shape()));
  }
  const auto s = static_cast<std::ptrdiff_t>(opt.stride);
  const auto p = static_cast<std::ptrdiff_t>(opt.padding);
  const auto d = static_cast<std::ptrdiff_t>(opt.dilation);
  const std::ptrdiff_t span_h = static_cast<std::ptrdiff_t>(h) + 2 * p - d * (static_cast<std::ptrdiff_t>(kh) - 1) - 1;
  const std::ptrdiff_t span_w = static_cast<std::ptrdiff_t>(w) + 2 * p - d * (static_cast<std::ptrdiff_t>(kw) - 1) - 1;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d output extent is non-positive for input " + shape_str(input.shape()) + " and weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t ho = static_cast<std::size_t>(span_h / s + 1);
  const std::size_t wo = static_cast<std::size_t>(span_w / s + 1);

  const double* x = input.data().data();
  const double* wt = weight.data().data();
  std::vector<double> out(n_batch * cout * ho * wo, 0.0);

  const auto in_plane = h * w, out_plane = ho * wo;
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* o = out.data() + (n * cout + co) * out_plane;
      if (bias.defined()) std::fill(o, o + out_plane, bias.data()[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xi = x + (n * cin + ci) * in_plane;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t offy = static_cast<std::ptrdiff_t>(ky) * d - p;
          auto [y0, y1] = valid_range(static_cast<std::ptrdiff_t>(ho), static_cast<std::ptrdiff_t>(h), s, offy);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double wv = wt[((co * cin + ci) * kh + ky) * kw + kx];
            const std::ptrdiff_t offx = static_cast<std::ptrdiff_t>(kx) * d - p;
            auto [x0, x1] = valid_range(static_cast<std::ptrdiff_t>(wo), static_cast<std::ptrdiff_t>(w), s, offx);
            for (std::ptrdiff_t oy = y0; oy < y1; ++oy) {
              const double* xr = xi + (oy * s + offy) * static_cast<std::ptrdiff_t>(w) + offx;
              double* orow = o + oy * static_cast<std::ptrdiff_t>(wo);
              if (s == 1) {
                for (std::ptrdiff_t ox = x0; ox < x1; ++ox) orow[ox] += wv * xr[ox];
              } else {
                for (std::ptrdiff_t ox = x0; ox < x1; ++ox) orow[ox] += wv * xr[ox * s];
              }
            }
          }
        }
      }
    }
  }

  return make_result(
      {n_batch, cout, ho, wo}, std::move(out), {input, weight, bias},
      [input, weight, n_batch, cin, h, w, cout, kh, kw, ho, wo, s, p, d](std::span<const double> g,
                                                                          ParentGrads& pg) {
        const double* x = input.data().data();
        const double* wt = weight.data().data();
        double* gx = pg[0] ? pg[0]->data() : nullptr;
        double* gw = pg[1] ? pg[1]->data() : nullptr;
        double* gb = pg.size() > 2 && pg[2] ? pg[2]->data() : nullptr;
        const auto in_plane = h * w, out_plane = ho * wo;
        for (std::size_t n = 0; n < n_batch; ++n) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* go = g.data() + (n * cout + co) * out_plane;
            if (gb) {
              double acc = 0.0;
              for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
              gb[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* xi = x + (n * cin + ci) * in_plane;
              double* gxi = gx ? gx + (n * cin + ci) * in_plane : nullptr;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t offy = static_cast<std::ptrdiff_t>(ky) * d - p;
                auto [y0, y1] = valid_range(static_cast<std::ptrdiff_t>(ho), static_cast<std::ptrdiff_t>(h), s, offy);
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::size_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
                  const double wv = wt[widx];
                  const std::ptrdiff_t offx = static_cast<std::ptrdiff_t>(kx) * d - p;
                  auto [x0, x1] = valid_range(static_cast<std::ptrdiff_t>(wo), static_cast<std::ptrdiff_t>(w), s, offx);
                  double wacc = 0.0;
                  for (std::ptrdiff_t oy = y0; oy < y1; ++oy) {
                    const std::ptrdiff_t row = (oy * s + offy) * static_cast<std::ptrdiff_t>(w) + offx;
                    const double* xr = xi + row;
                    const double* grow = go + oy * static_cast<std::ptrdiff_t>(wo);
                    if (s == 1) {
                      for (std::ptrdiff_t ox = x0; ox < x1; ++ox) wacc += grow[ox] * xr[ox];
                      if (gxi) {
                        double* gr = gxi + row;
                        for (std::ptrdiff_t ox = x0; ox < x1; ++ox) gr[ox] += wv * grow[ox];
                      }
                    } else {
                      for (std::ptrdiff_t ox = x0; ox < x1; ++ox) wacc += grow[ox] * xr[ox * s];
                      if (gxi) {
                        double* gr = gxi + row;
                        for (std::ptrdiff_t ox = x0; ox < x1; ++ox) gr[ox * s] += wv * grow[ox];
                      }
                    }
                  }
                  if (gw) gw[widx] += wacc;
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling, resampling, channel plumbing
// ---------------------------------------------------------------------------

Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 4, "max_pool2d input");
  const auto nb = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window == 0 || stride == 0) throw ShapeError("max_pool2d window and stride must be positive");
  if (h % stride != 0 || w % stride != 0 || h < window || w < window) {
    throw ShapeError("max_pool2d: extents of " + shape_str(input.shape()) + " must be divisible by stride " +
                     std::to_string(stride));
  }
  const auto ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
  const double* x = input.data().data();
  std::vector<double> out(nb * c * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t plane = 0; plane < nb * c; ++plane) {
    const double* xp = x + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            std::size_t idx = (oy * stride + ky) * w + ox * stride + kx;
            if (xp[idx] > xp[best]) best = idx;
          }
        }
        const std::size_t o = (plane * ho + oy) * wo + ox;
        out[o] = xp[best];
        argmax[o] = plane * h * w + best;
      }
    }
  }
  return make_result({nb, c, ho, wo}, std::move(out), {input},
                     [argmax = std::move(argmax)](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       auto& gx = *pg[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                     });
}

Tensor upsample2x(const Tensor& input) {
  if (input.rank() < 2) throw ShapeError("upsample2x needs at least two axes, got " + shape_str(input.shape()));
  Shape out_shape = input.shape();
  const auto r = out_shape.size();
  const auto h = out_shape[r - 2], w = out_shape[r - 1];
  out_shape[r - 2] = 2 * h;
  out_shape[r - 1] = 2 * w;
  const std::size_t planes = input.numel() / (h * w);
  const double* x = input.data().data();
  std::vector<double> out(input.numel() * 4);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* xp = x + pl * h * w;
    double* op = out.data() + pl * 4 * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      double* r0 = op + (2 * y) * (2 * w);
      double* r1 = r0 + 2 * w;
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double v = xp[y * w + xx];
        r0[2 * xx] = r0[2 * xx + 1] = r1[2 * xx] = r1[2 * xx + 1] = v;
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {input},
                     [planes, h, w](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       auto& gx = *pg[0];
                       for (std::size_t pl = 0; pl < planes; ++pl) {
                         const double* gp = g.data() + pl * 4 * h * w;
                         for (std::size_t y = 0; y < h; ++y) {
                           const double* r0 = gp + (2 * y) * (2 * w);
                           const double* r1 = r0 + 2 * w;
                           for (std::size_t xx = 0; xx < w; ++xx) {
                             gx[pl * h * w + y * w + xx] += r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1];
                           }
                         }
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: mismatched shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto nb = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<double> out(nb * (ca + cb) * plane);
  for (std::size_t n = 0; n < nb; ++n) {
    std::copy_n(a.data().data() + n * ca * plane, ca * plane, out.data() + n * (ca + cb) * plane);
    std::copy_n(b.data().data() + n * cb * plane, cb * plane, out.data() + (n * (ca + cb) + ca) * plane);
  }
  return make_result({nb, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                     [nb, ca, cb, plane](std::span<const double> g, ParentGrads& pg) {
                       for (std::size_t n = 0; n < nb; ++n) {
                         const double* gn = g.data() + n * (ca + cb) * plane;
                         if (pg[0]) {
                           double* ga = pg[0]->data() + n * ca * plane;
                           for (std::size_t i = 0; i < ca * plane; ++i) ga[i] += gn[i];
                         }
                         if (pg[1]) {
                           double* gb = pg[1]->data() + n * cb * plane;
                           for (std::size_t i = 0; i < cb * plane; ++i) gb[i] += gn[ca * plane + i];
                         }
                       }
                     });
}

Tensor slice_channels(const Tensor& input, std::size_t begin, std::size_t count) {
  require_rank(input, 4, "slice_channels");
  const auto nb = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (count == 0 || begin + count > c) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") out of " + shape_str(input.shape()));
  }
  std::vector<double> out(nb * count * plane);
  for (std::size_t n = 0; n < nb; ++n) {
    std::copy_n(input.data().data() + (n * c + begin) * plane, count * plane, out.data() + n * count * plane);
  }
  return make_result({nb, count, input.dim(2), input.dim(3)}, std::move(out), {input},
                     [nb, c, begin, count, plane](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t n = 0; n < nb; ++n) {
                         double* gx = pg[0]->data() + (n * c + begin) * plane;
                         const double* gn = g.data() + n * count * plane;
                         for (std::size_t i = 0; i < count * plane; ++i) gx[i] += gn[i];
                       }
                     });
}

Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  require_rank(input, 4, "crop2d");
  const auto nb = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (height == 0 || width == 0 || top + height > h || left + width > w) {
    throw ShapeError("crop2d window out of bounds for " + shape_str(input.shape()));
  }
  if (top == 0 && left == 0 && height == h && width == w) return input;
  std::vector<double> out(nb * c * height * width);
  for (std::size_t pl = 0; pl < nb * c; ++pl) {
    for (std::size_t y = 0; y < height; ++y) {
      std::copy_n(input.data().data() + pl * h * w + (top + y) * w + left, width,
                  out.data() + (pl * height + y) * width);
    }
  }
  return make_result({nb, c, height, width}, std::move(out), {input},
                     [nb, c, h, w, top, left, height, width](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t pl = 0; pl < nb * c; ++pl) {
                         for (std::size_t y = 0; y < height; ++y) {
                           double* gx = pg[0]->data() + pl * h * w + (top + y) * w + left;
                           const double* gr = g.data() + (pl * height + y) * width;
                           for (std::size_t x = 0; x < width; ++x) gx[x] += gr[x];
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor map_unary(const Tensor& input, UnaryOp op) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  switch (op) {
    case UnaryOp::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
      break;
    case UnaryOp::exp:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]);
      break;
    case UnaryOp::neg:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
      break;
    case UnaryOp::square:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
      break;
    case UnaryOp::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
  }
  // sigmoid and exp derive from their own output; keep a copy for backward.
  std::vector<double> saved;
  if (op == UnaryOp::sigmoid || op == UnaryOp::exp) saved = out;
  return make_result(input.shape(), std::move(out), {input},
                     [input, op, saved = std::move(saved)](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       auto& gx = *pg[0];
                       const auto x = input.data();
                       switch (op) {
                         case UnaryOp::sigmoid:
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
                           break;
                         case UnaryOp::exp:
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * saved[i];
                           break;
                         case UnaryOp::neg:
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
                           break;
                         case UnaryOp::square:
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.0 * x[i] * g[i];
                           break;
                         case UnaryOp::relu:
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (x[i] > 0.0) gx[i] += g[i];
                           }
                           break;
                       }
                     });
}

namespace {

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;  // 0 on broadcast axes
};

std::vector<std::size_t> contiguous_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size());
  std::size_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw ShapeError("incompatible shapes for broadcasting: " + shape_str(a) + " and " + shape_str(b));
  }
  BroadcastPlan plan;
  plan.out.resize(a.size());
  auto sa = contiguous_strides(a), sb = contiguous_strides(b);
  plan.stride_a.resize(a.size());
  plan.stride_b.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) {
      throw ShapeError("incompatible shapes for broadcasting: " + shape_str(a) + " and " + shape_str(b));
    }
    plan.out[i] = std::max(a[i], b[i]);
    plan.stride_a[i] = a[i] == 1 ? 0 : sa[i];
    plan.stride_b[i] = b[i] == 1 ? 0 : sb[i];
  }
  return plan;
}

// Calls fn(out_index, a_index, b_index) for every output element in row-major order.
template <typename Fn>
void for_each_broadcast(const BroadcastPlan& plan, Fn&& fn) {
  const auto r = plan.out.size();
  if (r == 0) {
    fn(0, 0, 0);
    return;
  }
  const std::size_t inner = plan.out[r - 1];
  const std::size_t ia = plan.stride_a[r - 1], ib = plan.stride_b[r - 1];
  const std::size_t outer = shape_numel(plan.out) / inner;
  std::vector<std::size_t> idx(r, 0);
  std::size_t base_a = 0, base_b = 0, o = 0;
  for (std::size_t it = 0; it < outer; ++it) {
    for (std::size_t k = 0; k < inner; ++k) fn(o + k, base_a + k * ia, base_b + k * ib);
    o += inner;
    // advance the outer multi-index (axes 0..r-2)
    for (std::size_t ax = r - 1; ax-- > 0;) {
      if (++idx[ax] < plan.out[ax]) {
        base_a += plan.stride_a[ax];
        base_b += plan.stride_b[ax];
        break;
      }
      base_a -= plan.stride_a[ax] * (plan.out[ax] - 1);
      base_b -= plan.stride_b[ax] * (plan.out[ax] - 1);
      idx[ax] = 0;
    }
  }
}

double apply(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::div: return a / b;
  }
  return 0.0;
}

}  // namespace

Tensor zip_binary(const Tensor& a, const Tensor& b, BinaryOp op) {
  const auto xa = a.data(), xb = b.data();
  // Single-element operands broadcast against any rank.
  Shape sa = a.shape(), sb = b.shape();
  if (sa.size() != sb.size()) {
    if (a.numel() == 1) sa.assign(sb.size(), 1);
    else if (b.numel() == 1) sb.assign(sa.size(), 1);
  }
  auto plan = plan_broadcast(sa, sb);
  std::vector<double> out(shape_numel(plan.out));
  if (sa == sb) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, xa[i], xb[i]);
  } else {
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = apply(op, xa[ia], xb[ib]); });
  }
  Shape out_shape = plan.out;
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [a, b, op, plan = std::move(plan), same = (sa == sb)](std::span<const double> g,
                                                                           ParentGrads& pg) {
                       const auto xa = a.data(), xb = b.data();
                       double* ga = pg[0] ? pg[0]->data() : nullptr;
                       double* gb = pg[1] ? pg[1]->data() : nullptr;
                       if (same && op == BinaryOp::mul) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           if (ga) ga[i] += g[i] * xb[i];
                           if (gb) gb[i] += g[i] * xa[i];
                         }
                         return;
                       }
                       for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                         const double go = g[o];
                         switch (op) {
                           case BinaryOp::add:
                             if (ga) ga[ia] += go;
                             if (gb) gb[ib] += go;
                             break;
                           case BinaryOp::sub:
                             if (ga) ga[ia] += go;
                             if (gb) gb[ib] -= go;
                             break;
                           case BinaryOp::mul:
                             if (ga) ga[ia] += go * xb[ib];
                             if (gb) gb[ib] += go * xa[ia];
                             break;
                           case BinaryOp::div:
                             if (ga) ga[ia] += go / xb[ib];
                             if (gb) gb[ib] -= go * xa[ia] / (xb[ib] * xb[ib]);
                             break;
                         }
                       });
                     });
}

Tensor reduce(const Tensor& input, ReduceMode mode) {
  double acc = 0.0;
  for (double v : input.data()) acc += v;
  const double n = static_cast<double>(input.numel());
  const double factor = mode == ReduceMode::mean ? 1.0 / n : 1.0;
  return make_result({}, {acc * factor}, {input}, [factor](std::span<const double> g, ParentGrads& pg) {
    if (!pg[0]) return;
    const double v = g[0] * factor;
    for (double& gx : *pg[0]) gx += v;
  });
}

Tensor sum_channels(const Tensor& input, bool order_invariant) {
  require_rank(input, 4, "sum_channels");
  const auto nb = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  std::vector<double> out(nb * plane, 0.0);
  const double* x = input.data().data();
  if (order_invariant) {
    std::vector<double> terms(c);
    for (std::size_t n = 0; n < nb; ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) terms[ch] = x[(n * c + ch) * plane + i];
        std::sort(terms.begin(), terms.end());
        double acc = 0.0;
        for (double t : terms) acc += t;
        out[n * plane + i] = acc;
      }
    }
  }
  for (std::size_t n = 0; n < nb && !order_invariant; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* xp = x + (n * c + ch) * plane;
      double* op = out.data() + n * plane;
      for (std::size_t i = 0; i < plane; ++i) op[i] += xp[i];
    }
  }
  return make_result({nb, 1, input.dim(2), input.dim(3)}, std::move(out), {input},
                     [nb, c, plane](std::span<const double> g, ParentGrads& pg) {
                       if (!pg[0]) return;
                       for (std::size_t n = 0; n < nb; ++n) {
                         for (std::size_t ch = 0; ch < c; ++ch) {
                           double* gx = pg[0]->data() + (n * c + ch) * plane;
                           const double* gn = g.data() + n * plane;
                           for (std::size_t i = 0; i < plane; ++i) gx[i] += gn[i];
                         }
                       }
                     });
}

Tensor scale(const Tensor& x, double factor) { return mul(x, Tensor::scalar(factor)); }
Tensor add_scalar(const Tensor& x, double value) { return add(x, Tensor::scalar(value)); }

}  // namespace smoe
