#include "ms3d/ops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ms3d::ad {
namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

std::string shapes(const Tensor& a, const Tensor& b) {
  return shape_str(a.shape()) + " vs " + shape_str(b.shape());
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      shape_error(op, "incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` laid out against `out` (rank-aligned); broadcast dims get 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t src = in.size() - 1 - k;
    const std::size_t dst = out.size() - 1 - k;
    strides[dst] = in[src] == 1 ? 0 : stride;
    stride *= in[src];
  }
  return strides;
}

// Calls visit(out_index, offset_a, offset_b) for every element of `out`.
template <class Visit>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Visit visit) {
  const std::size_t n = numel_of(out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    visit(i, oa, ob);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) {
        oa += sa[d];
        ob += sb[d];
        break;
      }
      oa -= sa[d] * (out[d] - 1);
      ob -= sb[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
}

template <class F>
std::pair<Shape, std::vector<double>> binary_values(const Tensor& a, const Tensor& b,
                                                    const char* op, F f) {
  const auto va = a.values();
  const auto vb = b.values();
  if (a.shape() == b.shape()) {
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(va[i], vb[i]);
    return {a.shape(), std::move(out)};
  }
  Shape shape = broadcast_shape(a.shape(), b.shape(), op);
  std::vector<double> out(numel_of(shape));
  if (vb.size() == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(va[i], vb[0]);
  } else if (va.size() == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(va[0], vb[i]);
  } else {
    for_each_broadcast(shape, broadcast_strides(a.shape(), shape),
                       broadcast_strides(b.shape(), shape),
                       [&](std::size_t i, std::size_t oa, std::size_t ob) {
                         out[i] = f(va[oa], vb[ob]);
                       });
  }
  return {std::move(shape), std::move(out)};
}

template <class F>
std::vector<double> map_values(const Tensor& x, F f) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return out;
}

Tensor constant_like(const Tensor& x, std::vector<double> values) {
  return Tensor::from(x.shape(), std::move(values));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_spatial(const Tensor& x, const char* op) {
  if (x.dim() < 2) shape_error(op, "needs at least 2 dims, got " + shape_str(x.shape()));
}

struct Spatial {
  std::size_t planes, h, w;
};

Spatial spatial_of(const Shape& s) {
  const std::size_t r = s.size();
  return {numel_of(s) / (s[r - 2] * s[r - 1]), s[r - 2], s[r - 1]};
}

Shape with_spatial(Shape s, std::size_t h, std::size_t w) {
  s[s.size() - 2] = h;
  s[s.size() - 1] = w;
  return s;
}

struct ConvDims {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const Shape& x, const Shape& w, std::size_t stride, std::size_t padding,
                   const char* op) {
  if (x.size() != 4 || w.size() != 4) {
    shape_error(op, "expects x [N,C,H,W] and w [O,C,kh,kw], got " + shape_str(x) + " and " +
                        shape_str(w));
  }
  if (x[1] != w[1]) {
    shape_error(op, "channel mismatch " + shape_str(x) + " vs " + shape_str(w));
  }
  if (stride == 0) shape_error(op, "stride must be positive");
  const std::size_t hp = x[2] + 2 * padding, wp = x[3] + 2 * padding;
  if (w[2] > hp || w[3] > wp) {
    shape_error(op, "kernel " + shape_str(w) + " larger than padded input " + shape_str(x));
  }
  return {x[0], x[1], x[2], x[3], w[0], w[2], w[3], (hp - w[2]) / stride + 1,
          (wp - w[3]) / stride + 1};
}

// Visits every (output, input, weight) index triple of a cross-correlation
// whose input index falls inside the unpadded image.
template <class Visit>
void conv_visit(const ConvDims& d, std::size_t stride, std::size_t padding, Visit visit) {
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t o = 0; o < d.cout; ++o)
      for (std::size_t i = 0; i < d.ho; ++i)
        for (std::size_t j = 0; j < d.wo; ++j) {
          const std::size_t yi = ((n * d.cout + o) * d.ho + i) * d.wo + j;
          for (std::size_t c = 0; c < d.cin; ++c)
            for (std::size_t u = 0; u < d.kh; ++u) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i * stride + u) -
                                       static_cast<std::ptrdiff_t>(padding);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t v = 0; v < d.kw; ++v) {
                const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(j * stride + v) -
                                         static_cast<std::ptrdiff_t>(padding);
                if (q < 0 || q >= static_cast<std::ptrdiff_t>(d.w)) continue;
                const std::size_t xi =
                    ((n * d.cin + c) * d.h + static_cast<std::size_t>(r)) * d.w +
                    static_cast<std::size_t>(q);
                const std::size_t wi = ((o * d.cin + c) * d.kh + u) * d.kw + v;
                visit(yi, xi, wi);
              }
            }
        }
}

std::size_t check_reduce_axis(const Tensor& x, std::size_t from_axis, const char* op) {
  if (from_axis > x.dim() || (from_axis == x.dim() && from_axis != 0)) {
    shape_error(op, "axis " + std::to_string(from_axis) + " out of range for " +
                        shape_str(x.shape()));
  }
  std::size_t groups = 1;
  for (std::size_t d = 0; d < from_axis; ++d) groups *= x.shape()[d];
  return groups;
}

Shape reduced_shape(const Shape& s, std::size_t from_axis) {
  if (from_axis == 0) return {};
  Shape out(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(from_axis));
  out.resize(s.size(), 1);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  auto [shape, values] = binary_values(a, b, "add", [](double x, double y) { return x + y; });
  return Tensor::make_result(std::move(shape), std::move(values), "add", {a, b},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{sum_to(g, in[0].shape()),
                                                          sum_to(g, in[1].shape())};
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto [shape, values] = binary_values(a, b, "sub", [](double x, double y) { return x - y; });
  return Tensor::make_result(std::move(shape), std::move(values), "sub", {a, b},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               std::vector<Tensor> out(2);
                               if (in[0].requires_grad()) out[0] = sum_to(g, in[0].shape());
                               if (in[1].requires_grad()) out[1] = sum_to(neg(g), in[1].shape());
                               return out;
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto [shape, values] = binary_values(a, b, "mul", [](double x, double y) { return x * y; });
  return Tensor::make_result(std::move(shape), std::move(values), "mul", {a, b},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               std::vector<Tensor> out(2);
                               if (in[0].requires_grad())
                                 out[0] = sum_to(mul(g, in[1]), in[0].shape());
                               if (in[1].requires_grad())
                                 out[1] = sum_to(mul(g, in[0]), in[1].shape());
                               return out;
                             });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
  return Tensor::make_result(x.shape(), map_values(x, [factor](double v) { return v * factor; }),
                             "scale", {x},
                             [factor](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{scale(g, factor)};
                             });
}

Tensor add_scalar(const Tensor& x, double value) {
  return Tensor::make_result(x.shape(), map_values(x, [value](double v) { return v + value; }),
                             "add_scalar", {x}, [](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{g};
                             });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator-(const Tensor& x) { return neg(x); }
Tensor operator*(const Tensor& x, double c) { return scale(x, c); }
Tensor operator*(double c, const Tensor& x) { return scale(x, c); }
Tensor operator+(const Tensor& x, double c) { return add_scalar(x, c); }
Tensor operator+(double c, const Tensor& x) { return add_scalar(x, c); }
Tensor operator-(const Tensor& x, double c) { return add_scalar(x, -c); }
Tensor operator-(double c, const Tensor& x) { return add_scalar(neg(x), c); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0)) {
    shape_error("matmul", "incompatible shapes " + shapes(a, b));
  }
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = va[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = vb.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), "matmul", {a, b},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               std::vector<Tensor> grads(2);
                               if (in[0].requires_grad()) grads[0] = matmul(g, transpose(in[1]));
                               if (in[1].requires_grad()) grads[1] = matmul(transpose(in[0]), g);
                               return grads;
                             });
}

Tensor transpose(const Tensor& x) {
  if (x.dim() != 2) shape_error("transpose", "expects 2 dims, got " + shape_str(x.shape()));
  const std::size_t r = x.size(0), c = x.size(1);
  const auto v = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return Tensor::make_result({c, r}, std::move(out), "transpose", {x},
                             [](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{transpose(g)};
                             });
}

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding) {
  const ConvDims d = conv_dims(x.shape(), w.shape(), stride, padding, "conv2d");
  const auto vx = x.values();
  const auto vw = w.values();
  std::vector<double> out(d.n * d.cout * d.ho * d.wo, 0.0);
  conv_visit(d, stride, padding,
             [&](std::size_t yi, std::size_t xi, std::size_t wi) { out[yi] += vx[xi] * vw[wi]; });
  return Tensor::make_result(
      {d.n, d.cout, d.ho, d.wo}, std::move(out), "conv2d", {x, w},
      [stride, padding](const Tensor& g, const std::vector<Tensor>& in) {
        std::vector<Tensor> grads(2);
        if (in[0].requires_grad())
          grads[0] = conv2d_input_grad(g, in[1], in[0].shape(), stride, padding);
        if (in[1].requires_grad())
          grads[1] = conv2d_weight_grad(in[0], g, in[1].shape(), stride, padding);
        return grads;
      });
}

Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& w, const Shape& input_shape,
                         std::size_t stride, std::size_t padding) {
  const ConvDims d = conv_dims(input_shape, w.shape(), stride, padding, "conv2d_input_grad");
  if (grad_out.shape() != Shape{d.n, d.cout, d.ho, d.wo}) {
    shape_error("conv2d_input_grad", "gradient shape " + shape_str(grad_out.shape()) +
                                         " does not match output of " + shape_str(input_shape));
  }
  const auto vg = grad_out.values();
  const auto vw = w.values();
  std::vector<double> out(numel_of(input_shape), 0.0);
  conv_visit(d, stride, padding,
             [&](std::size_t yi, std::size_t xi, std::size_t wi) { out[xi] += vg[yi] * vw[wi]; });
  return Tensor::make_result(
      input_shape, std::move(out), "conv2d_input_grad", {grad_out, w},
      [stride, padding](const Tensor& g, const std::vector<Tensor>& in) {
        std::vector<Tensor> grads(2);
        if (in[0].requires_grad()) grads[0] = conv2d(g, in[1], stride, padding);
        if (in[1].requires_grad())
          grads[1] = conv2d_weight_grad(g, in[0], in[1].shape(), stride, padding);
        return grads;
      });
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, const Shape& weight_shape,
                          std::size_t stride, std::size_t padding) {
  const ConvDims d = conv_dims(x.shape(), weight_shape, stride, padding, "conv2d_weight_grad");
  if (grad_out.shape() != Shape{d.n, d.cout, d.ho, d.wo}) {
    shape_error("conv2d_weight_grad", "gradient shape " + shape_str(grad_out.shape()) +
                                          " does not match output of " + shape_str(x.shape()));
  }
  const auto vg = grad_out.values();
  const auto vx = x.values();
  std::vector<double> out(numel_of(weight_shape), 0.0);
  conv_visit(d, stride, padding,
             [&](std::size_t yi, std::size_t xi, std::size_t wi) { out[wi] += vg[yi] * vx[xi]; });
  return Tensor::make_result(
      weight_shape, std::move(out), "conv2d_weight_grad", {x, grad_out},
      [stride, padding](const Tensor& g, const std::vector<Tensor>& in) {
        std::vector<Tensor> grads(2);
        if (in[0].requires_grad())
          grads[0] = conv2d_input_grad(in[1], g, in[0].shape(), stride, padding);
        if (in[1].requires_grad()) grads[1] = conv2d(in[0], g, stride, padding);
        return grads;
      });
}

Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  require_spatial(x, "avg_pool2d");
  const Spatial s = spatial_of(x.shape());
  if (kernel == 0 || stride == 0 || kernel > s.h || kernel > s.w) {
    shape_error("avg_pool2d", "kernel " + std::to_string(kernel) + " stride " +
                                  std::to_string(stride) + " invalid for " +
                                  shape_str(x.shape()));
  }
  const std::size_t ho = (s.h - kernel) / stride + 1, wo = (s.w - kernel) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  const auto v = x.values();
  std::vector<double> out(s.planes * ho * wo, 0.0);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        double acc = 0.0;
        for (std::size_t u = 0; u < kernel; ++u) {
          const double* row = v.data() + (p * s.h + i * stride + u) * s.w + j * stride;
          for (std::size_t q = 0; q < kernel; ++q) acc += row[q];
        }
        out[(p * ho + i) * wo + j] = acc * inv;
      }
  return Tensor::make_result(with_spatial(x.shape(), ho, wo), std::move(out), "avg_pool2d", {x},
                             [kernel, stride](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{
                                   avg_pool2d_adjoint(g, in[0].shape(), kernel, stride)};
                             });
}

Tensor avg_pool2d_adjoint(const Tensor& grad_out, const Shape& input_shape, std::size_t kernel,
                          std::size_t stride) {
  if (input_shape.size() < 2 || kernel == 0 || stride == 0) {
    shape_error("avg_pool2d_adjoint", "invalid input shape " + shape_str(input_shape));
  }
  const Spatial s = spatial_of(input_shape);
  const std::size_t ho = (s.h - kernel) / stride + 1, wo = (s.w - kernel) / stride + 1;
  if (grad_out.shape() != with_spatial(input_shape, ho, wo)) {
    shape_error("avg_pool2d_adjoint", "gradient shape " + shape_str(grad_out.shape()) +
                                          " does not match pooled " + shape_str(input_shape));
  }
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  const auto g = grad_out.values();
  std::vector<double> out(numel_of(input_shape), 0.0);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        const double gv = g[(p * ho + i) * wo + j] * inv;
        for (std::size_t u = 0; u < kernel; ++u) {
          double* row = out.data() + (p * s.h + i * stride + u) * s.w + j * stride;
          for (std::size_t q = 0; q < kernel; ++q) row[q] += gv;
        }
      }
  return Tensor::make_result(input_shape, std::move(out), "avg_pool2d_adjoint", {grad_out},
                             [kernel, stride](const Tensor& g2, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{avg_pool2d(g2, kernel, stride)};
                             });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require_spatial(x, "upsample_nearest");
  if (factor == 0) shape_error("upsample_nearest", "factor must be positive");
  const Spatial s = spatial_of(x.shape());
  const std::size_t ho = s.h * factor, wo = s.w * factor;
  const auto v = x.values();
  std::vector<double> out(s.planes * ho * wo);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < ho; ++i) {
      const double* src = v.data() + (p * s.h + i / factor) * s.w;
      double* dst = out.data() + (p * ho + i) * wo;
      for (std::size_t j = 0; j < wo; ++j) dst[j] = src[j / factor];
    }
  return Tensor::make_result(with_spatial(x.shape(), ho, wo), std::move(out), "upsample_nearest",
                             {x}, [factor](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{sum_pool2d(g, factor)};
                             });
}

Tensor sum_pool2d(const Tensor& x, std::size_t factor) {
  require_spatial(x, "sum_pool2d");
  const Spatial s = spatial_of(x.shape());
  if (factor == 0 || s.h % factor != 0 || s.w % factor != 0) {
    shape_error("sum_pool2d", "factor " + std::to_string(factor) + " does not tile " +
                                  shape_str(x.shape()));
  }
  const std::size_t ho = s.h / factor, wo = s.w / factor;
  const auto v = x.values();
  std::vector<double> out(s.planes * ho * wo, 0.0);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < s.h; ++i) {
      const double* src = v.data() + (p * s.h + i) * s.w;
      double* dst = out.data() + (p * ho + i / factor) * wo;
      for (std::size_t j = 0; j < s.w; ++j) dst[j / factor] += src[j];
    }
  return Tensor::make_result(with_spatial(x.shape(), ho, wo), std::move(out), "sum_pool2d", {x},
                             [factor](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{upsample_nearest(g, factor)};
                             });
}

namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto m = static_cast<std::ptrdiff_t>(n);
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= m) return static_cast<std::size_t>(2 * m - 2 - i);
  return static_cast<std::size_t>(i);
}

// Calls visit(out_index, in_index, kernel_weight) for every stencil tap.
template <class Visit>
void stencil_visit(const Spatial& s, const std::array<double, 9>& kernel, Visit visit) {
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j)
        for (int u = -1; u <= 1; ++u) {
          const std::size_t r = reflect_index(static_cast<std::ptrdiff_t>(i) + u, s.h);
          for (int v = -1; v <= 1; ++v) {
            const std::size_t q = reflect_index(static_cast<std::ptrdiff_t>(j) + v, s.w);
            visit((p * s.h + i) * s.w + j, (p * s.h + r) * s.w + q,
                  kernel[static_cast<std::size_t>((u + 1) * 3 + (v + 1))]);
          }
        }
}

}  // namespace

Tensor stencil3x3_reflect(const Tensor& x, const std::array<double, 9>& kernel) {
  require_spatial(x, "stencil3x3_reflect");
  const Spatial s = spatial_of(x.shape());
  const auto v = x.values();
  std::vector<double> out(v.size(), 0.0);
  stencil_visit(s, kernel,
                [&](std::size_t o, std::size_t i, double k) { out[o] += k * v[i]; });
  return Tensor::make_result(x.shape(), std::move(out), "stencil3x3_reflect", {x},
                             [kernel](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{stencil3x3_reflect_adjoint(g, kernel)};
                             });
}

Tensor stencil3x3_reflect_adjoint(const Tensor& grad_out, const std::array<double, 9>& kernel) {
  require_spatial(grad_out, "stencil3x3_reflect_adjoint");
  const Spatial s = spatial_of(grad_out.shape());
  const auto g = grad_out.values();
  std::vector<double> out(g.size(), 0.0);
  stencil_visit(s, kernel,
                [&](std::size_t o, std::size_t i, double k) { out[i] += k * g[o]; });
  return Tensor::make_result(grad_out.shape(), std::move(out), "stencil3x3_reflect_adjoint",
                             {grad_out}, [kernel](const Tensor& g2, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{stencil3x3_reflect(g2, kernel)};
                             });
}

Tensor decimate(const Tensor& x, std::size_t factor) {
  require_spatial(x, "decimate");
  const Spatial s = spatial_of(x.shape());
  if (factor == 0 || s.h % factor != 0 || s.w % factor != 0) {
    shape_error("decimate", "factor " + std::to_string(factor) + " does not tile " +
                                shape_str(x.shape()));
  }
  const std::size_t ho = s.h / factor, wo = s.w / factor;
  const auto v = x.values();
  std::vector<double> out(s.planes * ho * wo);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j)
        out[(p * ho + i) * wo + j] = v[(p * s.h + i * factor) * s.w + j * factor];
  return Tensor::make_result(with_spatial(x.shape(), ho, wo), std::move(out), "decimate", {x},
                             [factor](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{decimate_adjoint(g, factor)};
                             });
}

Tensor decimate_adjoint(const Tensor& grad_out, std::size_t factor) {
  require_spatial(grad_out, "decimate_adjoint");
  if (factor == 0) shape_error("decimate_adjoint", "factor must be positive");
  const Spatial s = spatial_of(grad_out.shape());
  const std::size_t ho = s.h * factor, wo = s.w * factor;
  const auto g = grad_out.values();
  std::vector<double> out(s.planes * ho * wo, 0.0);
  for (std::size_t p = 0; p < s.planes; ++p)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j)
        out[(p * ho + i * factor) * wo + j * factor] = g[(p * s.h + i) * s.w + j];
  return Tensor::make_result(with_spatial(grad_out.shape(), ho, wo), std::move(out),
                             "decimate_adjoint", {grad_out},
                             [factor](const Tensor& g2, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{decimate(g2, factor)};
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    shape_error("reshape", "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> values(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(values), "reshape", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{reshape(g, in[0].shape())};
                             });
}

Tensor pad_zero(const Tensor& x, std::size_t new_size) {
  if (x.dim() == 0 || new_size < x.shape().back()) {
    shape_error("pad_zero", "cannot pad " + shape_str(x.shape()) + " to last dim " +
                                std::to_string(new_size));
  }
  const std::size_t old = x.shape().back();
  const std::size_t rows = x.numel() / std::max<std::size_t>(old, 1);
  Shape shape = x.shape();
  shape.back() = new_size;
  const auto v = x.values();
  std::vector<double> out(rows * new_size, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(v.data() + r * old, old, out.data() + r * new_size);
  return Tensor::make_result(std::move(shape), std::move(out), "pad_zero", {x},
                             [old](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{crop_last(g, old)};
                             });
}

Tensor crop_last(const Tensor& x, std::size_t new_size) {
  if (x.dim() == 0 || new_size > x.shape().back()) {
    shape_error("crop_last", "cannot crop " + shape_str(x.shape()) + " to last dim " +
                                 std::to_string(new_size));
  }
  const std::size_t old = x.shape().back();
  const std::size_t rows = old == 0 ? 0 : x.numel() / old;
  Shape shape = x.shape();
  shape.back() = new_size;
  const auto v = x.values();
  std::vector<double> out(rows * new_size);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(v.data() + r * old, new_size, out.data() + r * new_size);
  return Tensor::make_result(std::move(shape), std::move(out), "crop_last", {x},
                             [old](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{pad_zero(g, old)};
                             });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shape(x.shape(), shape, "broadcast_to") != shape) {
    shape_error("broadcast_to", "cannot broadcast " + shape_str(x.shape()) + " to " +
                                    shape_str(shape));
  }
  const auto v = x.values();
  std::vector<double> out(numel_of(shape));
  const auto zero = std::vector<std::size_t>(shape.size(), 0);
  for_each_broadcast(shape, broadcast_strides(x.shape(), shape), zero,
                     [&](std::size_t i, std::size_t ox, std::size_t) { out[i] = v[ox]; });
  return Tensor::make_result(shape, std::move(out), "broadcast_to", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{sum_to(g, in[0].shape())};
                             });
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shape(shape, x.shape(), "sum_to") != x.shape()) {
    shape_error("sum_to", "cannot reduce " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  const auto v = x.values();
  std::vector<double> out(numel_of(shape), 0.0);
  const auto zero = std::vector<std::size_t>(x.dim(), 0);
  for_each_broadcast(x.shape(), broadcast_strides(shape, x.shape()), zero,
                     [&](std::size_t i, std::size_t o, std::size_t) { out[o] += v[i]; });
  return Tensor::make_result(shape, std::move(out), "sum_to", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{broadcast_to(g, in[0].shape())};
                             });
}

Tensor sum_reduce(const Tensor& x, std::size_t from_axis) {
  const std::size_t groups = check_reduce_axis(x, from_axis, "sum_reduce");
  const std::size_t len = groups == 0 ? 0 : x.numel() / groups;
  const auto v = x.values();
  std::vector<double> out(groups, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += v[g * len + i];
    out[g] = acc;
  }
  return Tensor::make_result(reduced_shape(x.shape(), from_axis), std::move(out), "sum_reduce",
                             {x}, [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{broadcast_to(g, in[0].shape())};
                             });
}

Tensor mean_reduce(const Tensor& x, std::size_t from_axis) {
  const std::size_t groups = check_reduce_axis(x, from_axis, "mean_reduce");
  const std::size_t len = groups == 0 ? 0 : x.numel() / groups;
  if (len == 0) shape_error("mean_reduce", "empty reduction over " + shape_str(x.shape()));
  const double inv = 1.0 / static_cast<double>(len);
  const auto v = x.values();
  std::vector<double> out(groups, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += v[g * len + i];
    out[g] = acc * inv;
  }
  return Tensor::make_result(reduced_shape(x.shape(), from_axis), std::move(out), "mean_reduce",
                             {x}, [inv](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{
                                   scale(broadcast_to(g, in[0].shape()), inv)};
                             });
}

Tensor max_reduce(const Tensor& x, std::size_t from_axis) {
  const std::size_t groups = check_reduce_axis(x, from_axis, "max_reduce");
  const std::size_t len = groups == 0 ? 0 : x.numel() / groups;
  if (len == 0) shape_error("max_reduce", "empty reduction over " + shape_str(x.shape()));
  const auto v = x.values();
  std::vector<double> out(groups);
  std::vector<double> mask(x.numel(), 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t best = g * len;
    for (std::size_t i = 1; i < len; ++i)
      if (v[g * len + i] > v[best]) best = g * len + i;
    out[g] = v[best];
    mask[best] = 1.0;
  }
  Tensor m = constant_like(x, std::move(mask));
  return Tensor::make_result(reduced_shape(x.shape(), from_axis), std::move(out), "max_reduce",
                             {x}, [m](const Tensor& g, const std::vector<Tensor>&) {
                               return std::vector<Tensor>{mul(m, g)};
                             });
}

Tensor abs(const Tensor& x) {
  return Tensor::make_result(
      x.shape(), map_values(x, [](double v) { return std::abs(v); }), "abs", {x},
      [](const Tensor& g, const std::vector<Tensor>& in) {
        Tensor sign = constant_like(in[0], map_values(in[0], [](double v) {
                                      return v < 0.0 ? -1.0 : 1.0;
                                    }));
        return std::vector<Tensor>{mul(g, sign)};
      });
}

Tensor square(const Tensor& x) {
  return Tensor::make_result(x.shape(), map_values(x, [](double v) { return v * v; }), "square",
                             {x}, [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{mul(g, scale(in[0], 2.0))};
                             });
}

Tensor tanh(const Tensor& x) {
  return Tensor::make_result(x.shape(), map_values(x, [](double v) { return std::tanh(v); }),
                             "tanh", {x}, [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{
                                   mul(g, 1.0 - square(tanh(in[0])))};
                             });
}

Tensor sigmoid(const Tensor& x) {
  return Tensor::make_result(x.shape(), map_values(x, sigmoid_value), "sigmoid", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               Tensor s = sigmoid(in[0]);
                               return std::vector<Tensor>{mul(g, mul(s, 1.0 - s))};
                             });
}

Tensor softplus(const Tensor& x) {
  return Tensor::make_result(x.shape(), map_values(x, softplus_value), "softplus", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{mul(g, sigmoid(in[0]))};
                             });
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  return Tensor::make_result(
      x.shape(), map_values(x, [alpha](double v) { return v >= 0.0 ? v : alpha * v; }),
      "leaky_relu", {x}, [alpha](const Tensor& g, const std::vector<Tensor>& in) {
        Tensor slope = constant_like(
            in[0], map_values(in[0], [alpha](double v) { return v >= 0.0 ? 1.0 : alpha; }));
        return std::vector<Tensor>{mul(g, slope)};
      });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor reciprocal(const Tensor& x) {
  return Tensor::make_result(x.shape(), map_values(x, [](double v) { return 1.0 / v; }),
                             "reciprocal", {x},
                             [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{neg(mul(g, square(reciprocal(in[0]))))};
                             });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: non-positive entry " + std::to_string(v) + " in tensor " +
                              shape_str(x.shape()));
    }
  }
  return Tensor::make_result(x.shape(), map_values(x, [](double v) { return std::log(v); }), "log",
                             {x}, [](const Tensor& g, const std::vector<Tensor>& in) {
                               return std::vector<Tensor>{mul(g, reciprocal(in[0]))};
                             });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mse", "shape mismatch " + shapes(a, b));
  return mean_reduce(square(sub(a, b)));
}

}  // namespace ms3d::ad
