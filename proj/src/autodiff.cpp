#include "jscc/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace jscc::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Flat index maps for a broadcast binary op. When both shapes match the
// maps are left empty and the identity mapping is implied.
struct BroadcastMap {
  Shape out;
  bool identity = false;
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;

  std::size_t ia(std::size_t i) const { return identity ? i : a[i]; }
  std::size_t ib(std::size_t i) const { return identity ? i : b[i]; }
};

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  // Strides of `in` aligned to the trailing axes of `out`; zero on
  // broadcast axes.
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    std::size_t axis_in = in.size() - 1 - k;
    std::size_t axis_out = out.size() - 1 - k;
    strides[axis_out] = in[axis_in] == 1 ? 0 : stride;
    stride *= in[axis_in];
  }
  return strides;
}

BroadcastMap make_broadcast(const Shape& a, const Shape& b) {
  BroadcastMap map;
  map.out = broadcast_shape(a, b);
  if (a == b) {
    map.identity = true;
    return map;
  }
  const std::size_t n = element_count(map.out);
  auto sa = broadcast_strides(a, map.out);
  auto sb = broadcast_strides(b, map.out);
  map.a.resize(n);
  map.b.resize(n);
  std::vector<std::size_t> index(map.out.size(), 0);
  std::size_t fa = 0;
  std::size_t fb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    map.a[i] = fa;
    map.b[i] = fb;
    for (std::size_t axis = map.out.size(); axis-- > 0;) {
      if (++index[axis] < map.out[axis]) {
        fa += sa[axis];
        fb += sb[axis];
        break;
      }
      fa -= sa[axis] * (map.out[axis] - 1);
      fb -= sb[axis] * (map.out[axis] - 1);
      index[axis] = 0;
    }
  }
  return map;
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

void require_complex(const Shape& s, const char* op) {
  require(!s.empty() && s.back() == 2,
          std::string(op) + ": expected trailing complex axis of extent 2, got " + to_string(s));
}

template <typename Forward, typename Partials>
Var unary(Var a, Forward forward, Partials partial) {
  // partial(x, y) returns dy/dx given input x and output y.
  const RealGrid& x = a.value();
  RealGrid out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, partial](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    const RealGrid& x = t.value(ia);
    const RealGrid& y = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * partial(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unitary transform of each length-n complex row; sign -1 is the forward DFT.
void transform_rows(const double* in, double* out, std::size_t rows, std::size_t n, int sign) {
  std::vector<double> c(n), s(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
    c[m] = std::cos(angle);
    s[m] = sign * std::sin(angle);
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + 2 * n * r;
    double* y = out + 2 * n * r;
    for (std::size_t k = 0; k < n; ++k) {
      double re = 0.0;
      double im = 0.0;
      std::size_t m = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double xr = x[2 * j];
        const double xi = x[2 * j + 1];
        re += xr * c[m] - xi * s[m];
        im += xr * s[m] + xi * c[m];
        m += k;
        if (m >= n) m -= n;
      }
      y[2 * k] = re * norm;
      y[2 * k + 1] = im * norm;
    }
  }
}

Var unitary_transform(Var a, int sign) {
  require_complex(a.shape(), sign < 0 ? "dft" : "idft");
  require(a.shape().size() >= 2, "dft: expected at least (N, 2)");
  const Shape& shape = a.shape();
  const std::size_t n = shape[shape.size() - 2];
  const std::size_t rows = a.size() / (2 * n);
  RealGrid out(shape);
  transform_rows(a.value().data(), out.data(), rows, n, sign);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, n, sign](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    std::vector<double> back(g.size());
    transform_rows(g.data(), back.data(), rows, n, -sign);
    for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
  });
}

struct ConvGeometry {
  std::size_t channels, height, width;   // image side
  std::size_t kh, kw, stride, padding;
  std::size_t out_h, out_w;              // patch grid side
  std::size_t patch_rows() const { return channels * kh * kw; }
  std::size_t patches() const { return out_h * out_w; }
};

// cols[(c, ky, kx), (oy, ox)] = image[c, oy*s - p + ky, ox*s - p + kx]
void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::size_t p = g.patches();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
        double* dst = cols + row * p;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                                ix < static_cast<long>(g.width);
            dst[oy * g.out_w + ox] =
                inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                               static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patches back into the image.
void col2im(const double* cols, const ConvGeometry& g, double* image) {
  const std::size_t p = g.patches();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
        const double* src = cols + row * p;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                  static_cast<std::size_t>(ix)] += src[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                        const char* what) {
  if (in + 2 * pad < k || (in + 2 * pad - k) % stride != 0) {
    throw std::invalid_argument(std::string("conv2d: ") + what + " extent " + std::to_string(in) +
                                " with kernel " + std::to_string(k) + ", stride " +
                                std::to_string(stride) + ", padding " + std::to_string(pad) +
                                " gives a non-integral output extent");
  }
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

// --- Var / Tape ------------------------------------------------------------

const RealGrid& Var::value() const {
  if (!tape_) throw std::logic_error("Var: use of an unbound variable");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::constant(RealGrid value) {
  nodes_.push_back(Node{std::move(value), {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(RealGrid value) {
  nodes_.push_back(Node{std::move(value), {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(RealGrid value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(RealGrid value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw std::logic_error("Tape: op mixes variables from different tapes");
    needs = needs || nodes_[v.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs ? std::move(backward) : Backward{}, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw std::logic_error("Tape::backward: root belongs to another tape");
  if (nodes_[root.id_].value.size() != 1) {
    throw std::invalid_argument("Tape::backward: root must be scalar, got shape " +
                                to_string(nodes_[root.id_].value.shape()));
  }
  for (Node& n : nodes_) n.value.drop_grad();
  visits_ = 0;
  if (!nodes_[root.id_].requires_grad) return;
  nodes_[root.id_].value.enable_grad();
  nodes_[root.id_].value.grad()[0] = 1.0;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    ++visits_;
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.value.has_grad() || !node.backward) continue;
    node.backward(*this, i);
  }
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (!n.value.has_grad()) return {};
  return n.value.grad();
}

std::span<const double> Tape::output_grad(std::size_t self) const {
  return nodes_[self].value.grad();
}

std::span<double> Tape::input_grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  if (!n.value.has_grad()) n.value.enable_grad();
  return n.value.grad();
}

Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw std::logic_error("same_tape: unbound variable");
    if (tape && &v.tape() != tape) throw std::logic_error("same_tape: variables on different tapes");
    tape = &v.tape();
  }
  if (!tape) throw std::logic_error("same_tape: no variables");
  return *tape;
}

// --- elementwise --------------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t ea = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t eb = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw std::invalid_argument("shape mismatch: cannot broadcast " + to_string(a) + " with " +
                                  to_string(b));
    }
    out[rank - 1 - k] = ea == 1 ? eb : ea;
  }
  return out;
}

namespace {

template <typename F, typename B>
Var binary(Var a, Var b, F forward, B back) {
  // back(g, x, y, z, gx, gy): accumulate partials of z = f(x, y).
  Tape& tape = same_tape({a, b});
  auto map = make_broadcast(a.shape(), b.shape());
  const RealGrid& x = a.value();
  const RealGrid& y = b.value();
  RealGrid out(map.out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(x[map.ia(i)], y[map.ib(i)]);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib, map = std::move(map), back](Tape& t, std::size_t self) {
                       auto g = t.output_grad(self);
                       auto gx = t.input_grad(ia);
                       auto gy = t.input_grad(ib);
                       const RealGrid& x = t.value(ia);
                       const RealGrid& y = t.value(ib);
                       const RealGrid& z = t.value(self);
                       double dummy = 0.0;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t ja = map.ia(i);
                         const std::size_t jb = map.ib(i);
                         back(g[i], x[ja], y[jb], z[i], gx.empty() ? dummy : gx[ja],
                              gy.empty() ? dummy : gy[jb]);
                       }
                     });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double, double& gx, double& gy) {
        gx += g;
        gy += g;
      });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double, double& gx, double& gy) {
        gx += g;
        gy -= g;
      });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double, double& gx, double& gy) {
        gx += g * y;
        gy += g * x;
      });
}

Var div(Var a, Var b) {
  for (double v : b.value().values()) {
    if (v == 0.0) throw std::domain_error("div: division by zero");
  }
  return binary(
      a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y, double z, double& gx, double& gy) {
        gx += g / y;
        gy -= g * z / y;
      });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x >= 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  for (double v : a.value().values()) {
    if (v < 0.0) throw std::domain_error("sqrt: negative input");
  }
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) {
        if (y == 0.0) throw std::domain_error("sqrt: derivative undefined at zero");
        return 0.5 / y;
      });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var elementwise(Unary kind, Var a) {
  switch (kind) {
    case Unary::relu: return relu(a);
    case Unary::sigmoid: return sigmoid(a);
    case Unary::tanh: return tanh(a);
    case Unary::square: return square(a);
    case Unary::sqrt: return sqrt(a);
    case Unary::softplus: return softplus(a);
  }
  throw std::invalid_argument("elementwise: unknown unary op");
}

Var elementwise(Binary kind, Var a, Var b) {
  switch (kind) {
    case Binary::add: return add(a, b);
    case Binary::sub: return sub(a, b);
    case Binary::mul: return mul(a, b);
    case Binary::div: return div(a, b);
  }
  throw std::invalid_argument("elementwise: unknown binary op");
}

// --- reductions and layout ---------------------------------------------------

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(RealGrid::scalar(total), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.output_grad(self)[0];
    for (double& v : t.input_grad(ia)) v += g;
  });
}

Var mean(Var a) {
  require(a.size() > 0, "mean: empty input");
  const double n = static_cast<double>(a.size());
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(RealGrid::scalar(total / n), {a}, [ia, n](Tape& t, std::size_t self) {
    const double g = t.output_grad(self)[0] / n;
    for (double& v : t.input_grad(ia)) v += g;
  });
}

Var sum_rows(Var a) {
  require(a.shape().size() >= 1, "sum_rows: expected rank >= 1");
  const std::size_t rows = a.shape()[0];
  Shape rest(a.shape().begin() + 1, a.shape().end());
  const std::size_t inner = element_count(rest);
  RealGrid out(rest);
  const RealGrid& x = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < inner; ++i) out[i] += x[r * inner + i];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, inner](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < inner; ++i) gx[r * inner + i] += g[i];
    }
  });
}

Var reshape(Var a, Shape shape) {
  RealGrid out = a.value();
  out.drop_grad();
  out.reshape(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Shape& first = parts[0].shape();
  require(!first.empty(), "concat_rows: scalar input");
  Shape tail(first.begin() + 1, first.end());
  std::size_t rows = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    require(s.size() == first.size() && Shape(s.begin() + 1, s.end()) == tail,
            "concat_rows: shape mismatch " + to_string(first) + " vs " + to_string(s));
    rows += s[0];
  }
  Shape out_shape = first;
  out_shape[0] = rows;
  RealGrid out(out_shape);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += p.size();
  }
  Tape& tape = parts[0].tape();
  return tape.record(std::move(out), parts, [ids, offsets](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto gx = t.input_grad(ids[k]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[offsets[k] + i];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  require(!a.shape().empty() && begin <= end && end <= a.shape()[0],
          "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") invalid for shape " + to_string(a.shape()));
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  const std::size_t inner = a.size() / std::max<std::size_t>(a.shape()[0], 1);
  RealGrid out(out_shape);
  const double* src = a.value().data() + begin * inner;
  std::copy(src, src + out.size(), out.data());
  const std::size_t ia = a.id();
  const std::size_t offset = begin * inner;
  return a.tape().record(std::move(out), {a}, [ia, offset](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

// --- complex ---------------------------------------------------------------------

Var planes_to_complex(Var a) {
  require(!a.shape().empty() && a.shape()[0] == 2,
          "planes_to_complex: expected leading axis of extent 2, got " + to_string(a.shape()));
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  out_shape.push_back(2);
  const std::size_t m = a.size() / 2;
  RealGrid out(out_shape);
  const RealGrid& x = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    out[2 * i] = x[i];
    out[2 * i + 1] = x[m + i];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      gx[i] += g[2 * i];
      gx[m + i] += g[2 * i + 1];
    }
  });
}

Var complex_to_planes(Var a) {
  require_complex(a.shape(), "complex_to_planes");
  Shape out_shape{2};
  out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end() - 1);
  const std::size_t m = a.size() / 2;
  RealGrid out(out_shape);
  const RealGrid& x = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = x[2 * i];
    out[m + i] = x[2 * i + 1];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      gx[2 * i] += g[i];
      gx[2 * i + 1] += g[m + i];
    }
  });
}

namespace {

// conj_b selects a * conj(b) instead of a * b.
Var complex_product(Var a, Var b, bool conj_b) {
  const char* name = conj_b ? "complex_conj_mul" : "complex_mul";
  require_complex(a.shape(), name);
  require_complex(b.shape(), name);
  Tape& tape = same_tape({a, b});
  auto map = make_broadcast(drop_last(a.shape()), drop_last(b.shape()));
  Shape out_shape = map.out;
  out_shape.push_back(2);
  RealGrid out(out_shape);
  const RealGrid& x = a.value();
  const RealGrid& y = b.value();
  const double sb = conj_b ? -1.0 : 1.0;
  const std::size_t n = element_count(map.out);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ja = 2 * map.ia(i);
    const std::size_t jb = 2 * map.ib(i);
    const double ar = x[ja], ai = x[ja + 1], br = y[jb], bi = sb * y[jb + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib, sb, n, map = std::move(map)](Tape& t, std::size_t self) {
                       auto g = t.output_grad(self);
                       auto gx = t.input_grad(ia);
                       auto gy = t.input_grad(ib);
                       const RealGrid& x = t.value(ia);
                       const RealGrid& y = t.value(ib);
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t ja = 2 * map.ia(i);
                         const std::size_t jb = 2 * map.ib(i);
                         const double gr = g[2 * i], gi = g[2 * i + 1];
                         const double ar = x[ja], ai = x[ja + 1];
                         const double br = y[jb], bi = sb * y[jb + 1];
                         if (!gx.empty()) {
                           // g * conj(b')
                           gx[ja] += gr * br + gi * bi;
                           gx[ja + 1] += gi * br - gr * bi;
                         }
                         if (!gy.empty()) {
                           // d/d(b') is g * conj(a); map back through b' = (br, sb*bi).
                           gy[jb] += gr * ar + gi * ai;
                           gy[jb + 1] += sb * (gi * ar - gr * ai);
                         }
                       }
                     });
}

}  // namespace

Var complex_mul(Var a, Var b) { return complex_product(a, b, false); }

Var complex_conj_mul(Var a, Var b) { return complex_product(a, b, true); }

Var complex_conj(Var a) {
  require_complex(a.shape(), "complex_conj");
  RealGrid out = a.value();
  out.drop_grad();
  for (std::size_t i = 1; i < out.size(); i += 2) out[i] = -out[i];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (i % 2 ? -g[i] : g[i]);
  });
}

Var complex_abs2(Var a) {
  require_complex(a.shape(), "complex_abs2");
  RealGrid out(drop_last(a.shape()));
  const RealGrid& x = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1];
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    const RealGrid& x = t.value(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[2 * i] += 2.0 * g[i] * x[2 * i];
      gx[2 * i + 1] += 2.0 * g[i] * x[2 * i + 1];
    }
  });
}

Var dft(Var a) { return unitary_transform(a, -1); }

Var idft(Var a) { return unitary_transform(a, +1); }

Var add_cyclic_prefix(Var a, std::size_t cp) {
  const Shape& s = a.shape();
  require(s.size() == 3 && s[2] == 2, "add_cyclic_prefix: expected (S, N, 2), got " + to_string(s));
  const std::size_t rows = s[0], n = s[1];
  require(cp <= n, "add_cyclic_prefix: prefix longer than symbol");
  const std::size_t m = n + cp;
  RealGrid out(Shape{rows, m, 2});
  const RealGrid& x = a.value();
  auto source = [n, cp](std::size_t t) { return t < cp ? n - cp + t : t - cp; };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < m; ++t) {
      out[2 * (r * m + t)] = x[2 * (r * n + source(t))];
      out[2 * (r * m + t) + 1] = x[2 * (r * n + source(t)) + 1];
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, n, m, source](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        gx[2 * (r * n + source(k))] += g[2 * (r * m + k)];
        gx[2 * (r * n + source(k)) + 1] += g[2 * (r * m + k) + 1];
      }
    }
  });
}

Var remove_cyclic_prefix(Var a, std::size_t cp) {
  const Shape& s = a.shape();
  require(s.size() == 3 && s[2] == 2 && s[1] >= cp,
          "remove_cyclic_prefix: expected (S, N + cp, 2), got " + to_string(s));
  const std::size_t rows = s[0], m = s[1], n = m - cp;
  RealGrid out(Shape{rows, n, 2});
  const RealGrid& x = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(x.data() + 2 * (r * m + cp), x.data() + 2 * (r * m + m), out.data() + 2 * r * n);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, n, m, cp](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < 2 * n; ++k) gx[2 * (r * m + cp) + k] += g[2 * r * n + k];
    }
  });
}

Var causal_filter(Var in, const RealGrid& taps) {
  const Shape& s = in.shape();
  require(s.size() == 2 && s[1] == 2, "causal_filter: expected (N, 2) input, got " + to_string(s));
  require(taps.rank() == 2 && taps.shape()[1] == 2,
          "causal_filter: expected (L, 2) taps, got " + to_string(taps.shape()));
  const std::size_t n = s[0];
  require(n > 0, "causal_filter: empty input");
  const std::size_t l_count = taps.shape()[0];
  RealGrid out(s);
  const RealGrid& x = in.value();
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    const std::size_t last = std::min(l_count - 1, k);
    for (std::size_t l = 0; l <= last; ++l) {
      const double hr = taps[2 * l], hi = taps[2 * l + 1];
      const double xr = x[2 * (k - l)], xi = x[2 * (k - l) + 1];
      re += hr * xr - hi * xi;
      im += hr * xi + hi * xr;
    }
    out[2 * k] = re;
    out[2 * k + 1] = im;
  }
  const std::size_t ia = in.id();
  return in.tape().record(std::move(out), {in}, [ia, n, l_count, taps](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    for (std::size_t m = 0; m < n; ++m) {
      double re = 0.0, im = 0.0;
      for (std::size_t l = 0; l < l_count && m + l < n; ++l) {
        // conj(h[l]) * g[m + l]
        const double hr = taps[2 * l], hi = -taps[2 * l + 1];
        const double gr = g[2 * (m + l)], gi = g[2 * (m + l) + 1];
        re += hr * gr - hi * gi;
        im += hr * gi + hi * gr;
      }
      gx[2 * m] += re;
      gx[2 * m + 1] += im;
    }
  });
}

Var clip_amplitude(Var in, Var threshold) {
  const Shape& s = in.shape();
  require(s.size() == 2 && s[1] == 2, "clip_amplitude: expected (N, 2) input, got " + to_string(s));
  require(threshold.size() == 1, "clip_amplitude: threshold must be a scalar");
  Tape& tape = same_tape({in, threshold});
  const double limit = threshold.value()[0];
  if (!(limit > 0.0)) throw std::domain_error("clip_amplitude: threshold must be positive");
  const std::size_t n = s[0];
  RealGrid out(s);
  const RealGrid& x = in.value();
  for (std::size_t k = 0; k < n; ++k) {
    const double re = x[2 * k], im = x[2 * k + 1];
    const double amp = std::hypot(re, im);
    if (amp <= limit) {
      out[2 * k] = re;
      out[2 * k + 1] = im;
      continue;
    }
    double factor = limit / amp;
    while (std::hypot(re * factor, im * factor) > limit) factor = std::nextafter(factor, 0.0);
    out[2 * k] = re * factor;
    out[2 * k + 1] = im * factor;
  }
  const std::size_t ia = in.id();
  const std::size_t it = threshold.id();
  return tape.record(std::move(out), {in, threshold}, [ia, it, n](Tape& t, std::size_t self) {
    auto g = t.output_grad(self);
    auto gx = t.input_grad(ia);
    auto gt = t.input_grad(it);
    const RealGrid& x = t.value(ia);
    const double limit = t.value(it)[0];
    double g_limit = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double re = x[2 * k], im = x[2 * k + 1];
      const double amp = std::hypot(re, im);
      const double gr = g[2 * k], gi = g[2 * k + 1];
      if (amp < limit) {
        if (!gx.empty()) {
          gx[2 * k] += gr;
          gx[2 * k + 1] += gi;
        }
        continue;
      }
      // out = limit * u with u = x / |x|; Jacobian (limit / |x|) (I - u u^T).
      const double ur = re / amp, ui = im / amp;
      const double along = gr * ur + gi * ui;
      if (!gx.empty()) {
        gx[2 * k] += limit / amp * (gr - along * ur);
        gx[2 * k + 1] += limit / amp * (gi - along * ui);
      }
      g_limit += along;
    }
    if (!gt.empty()) gt[0] += g_limit;
  });
}

// --- convolution -----------------------------------------------------------------

Var conv2d(Var input, Var kernel, std::optional<Var> bias, ConvOptions options) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  require(is.size() == 3, "conv2d: input must be (C, H, W), got " + to_string(is));
  require(ks.size() == 4 && ks[1] == is[0],
          "conv2d: kernel " + to_string(ks) + " incompatible with input " + to_string(is));
  require(options.stride >= 1, "conv2d: stride must be positive");
  if (bias) require(bias->shape() == Shape{ks[0]}, "conv2d: bias must be (Cout)");
  Tape& tape = bias ? same_tape({input, kernel, *bias}) : same_tape({input, kernel});

  ConvGeometry geo{is[0], is[1], is[2], ks[2], ks[3], options.stride, options.padding, 0, 0};
  geo.out_h = conv_extent(is[1], ks[2], options.stride, options.padding, "height");
  geo.out_w = conv_extent(is[2], ks[3], options.stride, options.padding, "width");
  const std::size_t cout = ks[0], k = geo.patch_rows(), p = geo.patches();

  std::vector<double> cols(k * p);
  im2col(input.value().data(), geo, cols.data());
  RealGrid out(Shape{cout, geo.out_h, geo.out_w});
  MatrixMap y(out.data(), cout, p);
  y.noalias() = ConstMatrixMap(kernel.value().data(), cout, k) * ConstMatrixMap(cols.data(), k, p);
  if (bias) {
    for (std::size_t c = 0; c < cout; ++c) y.row(c).array() += bias->value()[c];
  }

  const std::size_t ii = input.id(), ik = kernel.id();
  const std::optional<std::size_t> ib = bias ? std::optional<std::size_t>(bias->id()) : std::nullopt;
  std::vector<Var> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return tape.record(
      std::move(out), std::span<const Var>(inputs),
      [ii, ik, ib, geo, cout, k, p, cols = std::move(cols)](Tape& t, std::size_t self) {
        ConstMatrixMap g(t.output_grad(self).data(), cout, p);
        auto gk = t.input_grad(ik);
        if (!gk.empty()) {
          MatrixMap(gk.data(), cout, k).noalias() += g * ConstMatrixMap(cols.data(), k, p).transpose();
        }
        if (ib) {
          auto gb = t.input_grad(*ib);
          for (std::size_t c = 0; c < cout && !gb.empty(); ++c) gb[c] += g.row(c).sum();
        }
        auto gx = t.input_grad(ii);
        if (!gx.empty()) {
          RowMatrix dcols = ConstMatrixMap(t.value(ik).data(), cout, k).transpose() * g;
          col2im(dcols.data(), geo, gx.data());
        }
      });
}

Var conv_transpose2d(Var input, Var kernel, std::optional<Var> bias, ConvOptions options) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  require(is.size() == 3, "conv_transpose2d: input must be (C, H, W), got " + to_string(is));
  require(ks.size() == 4 && ks[0] == is[0],
          "conv_transpose2d: kernel " + to_string(ks) + " incompatible with input " + to_string(is));
  require(options.stride >= 1, "conv_transpose2d: stride must be positive");
  const std::size_t cin = is[0], cout = ks[1];
  if (bias) require(bias->shape() == Shape{cout}, "conv_transpose2d: bias must be (Cout)");
  const long oh = static_cast<long>((is[1] - 1) * options.stride + ks[2]) -
                  2 * static_cast<long>(options.padding);
  const long ow = static_cast<long>((is[2] - 1) * options.stride + ks[3]) -
                  2 * static_cast<long>(options.padding);
  require(oh > 0 && ow > 0, "conv_transpose2d: padding too large for input " + to_string(is));
  Tape& tape = bias ? same_tape({input, kernel, *bias}) : same_tape({input, kernel});

  // Geometry of the equivalent forward conv that maps the output back to the input.
  ConvGeometry geo{cout,          static_cast<std::size_t>(oh), static_cast<std::size_t>(ow),
                   ks[2],         ks[3],                         options.stride,
                   options.padding, is[1],                       is[2]};
  const std::size_t k = geo.patch_rows(), p = geo.patches();

  RowMatrix cols = ConstMatrixMap(kernel.value().data(), cin, k).transpose() *
                   ConstMatrixMap(input.value().data(), cin, p);
  RealGrid out(Shape{cout, geo.height, geo.width});
  col2im(cols.data(), geo, out.data());
  if (bias) {
    const std::size_t plane = geo.height * geo.width;
    for (std::size_t c = 0; c < cout; ++c) {
      for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += bias->value()[c];
    }
  }

  const std::size_t ii = input.id(), ik = kernel.id();
  const std::optional<std::size_t> ib = bias ? std::optional<std::size_t>(bias->id()) : std::nullopt;
  std::vector<Var> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return tape.record(std::move(out), std::span<const Var>(inputs),
                     [ii, ik, ib, geo, cin, cout, k, p](Tape& t, std::size_t self) {
                       auto g = t.output_grad(self);
                       std::vector<double> gcols(k * p);
                       im2col(g.data(), geo, gcols.data());
                       ConstMatrixMap gc(gcols.data(), k, p);
                       auto gk = t.input_grad(ik);
                       if (!gk.empty()) {
                         MatrixMap(gk.data(), cin, k).noalias() +=
                             ConstMatrixMap(t.value(ii).data(), cin, p) * gc.transpose();
                       }
                       auto gx = t.input_grad(ii);
                       if (!gx.empty()) {
                         MatrixMap(gx.data(), cin, p).noalias() +=
                             ConstMatrixMap(t.value(ik).data(), cin, k) * gc;
                       }
                       if (ib) {
                         auto gb = t.input_grad(*ib);
                         const std::size_t plane = geo.height * geo.width;
                         for (std::size_t c = 0; c < cout && !gb.empty(); ++c) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < plane; ++i) acc += g[c * plane + i];
                           gb[c] += acc;
                         }
                       }
                     });
}

}  // namespace jscc::ad
