#include "hpf/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hpf/autodiff/kernels.hpp"

namespace hpf::ad {
namespace {

[[noreturn]] void shape_error(Op op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

int normalize_axis(Op op, int axis, const Shape& shape) {
  const int rank = static_cast<int>(shape.size());
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw std::invalid_argument(std::string(op_name(op)) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(shape));
  }
  return a;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
  s.len = static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
    s.inner *= static_cast<std::size_t>(shape[i]);
  return s;
}

Shape without_axis(const Shape& shape, int axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (static_cast<int>(i) != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::multiply: return "multiply";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::reshape: return "reshape";
    case Op::relu: return "relu";
    case Op::elu: return "elu";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::abs: return "abs";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sum: return "sum";
    case Op::sum_axis: return "sum_axis";
    case Op::mean: return "mean";
    case Op::max_over_axis: return "max_over_axis";
    case Op::softmax_over_axis: return "softmax_over_axis";
    case Op::log_softmax_over_axis: return "log_softmax_over_axis";
    case Op::gather_along_axis: return "gather_along_axis";
    case Op::squared_error: return "squared_error";
    case Op::stop_gradient: return "stop_gradient";
    case Op::gru_cell: return "gru_cell";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }
const Shape& Var::shape() const { return value().shape(); }
bool Var::requires_grad() const { return graph->requires_grad(id); }

Graph::Graph(bool track_gradients) : track_(track_gradients) {}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.param ? n.param->value : n.value;
}

Graph::Node& Graph::node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
const Graph::Node& Graph::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

Var Graph::push(Node n) {
  if (n.op != Op::leaf && n.op != Op::constant && n.op != Op::stop_gradient && track_) {
    n.needs_grad = std::any_of(n.inputs.begin(), n.inputs.end(),
                               [&](int i) { return nodes_[static_cast<std::size_t>(i)].needs_grad; });
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0f);
  Node n;
  n.op = Op::leaf;
  n.param = &p;
  n.needs_grad = track_ && p.requires_grad;
  return push(std::move(n));
}

namespace {

Graph* same_graph(Var a, Var b, Op op) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::invalid_argument(std::string(op_name(op)) + ": operands belong to different graphs");
  return a.graph;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward ops

Var matmul(Var a, Var b) {
  Graph* g = same_graph(a, b, Op::matmul);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) shape_error(Op::matmul, sa, sb);
  const int m = sa[sa.size() - 2];
  const int k = sa.back();
  const int kb = sb[sb.size() - 2];
  const int n = sb.back();
  if (k != kb) shape_error(Op::matmul, sa, sb);
  const bool shared_rhs = sb.size() == 2;
  if (!shared_rhs && (sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin())))
    shape_error(Op::matmul, sa, sb);

  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  Graph::Node node;
  node.op = Op::matmul;
  node.inputs = {a.id, b.id};
  node.value = Tensor(out_shape);
  node.swapped = shared_rhs;
  const float* pa = a.value().data().data();
  const float* pb = b.value().data().data();
  float* pc = node.value.data().data();
  if (shared_rhs) {
    const int rows = static_cast<int>(a.value().size() / static_cast<std::size_t>(k));
    kernels::gemm(pa, pb, pc, rows, k, n);
  } else {
    const std::size_t batches = a.value().size() / (static_cast<std::size_t>(m) * k);
    for (std::size_t i = 0; i < batches; ++i)
      kernels::gemm(pa + i * m * k, pb + i * k * n, pc + i * m * n, m, k, n);
  }
  return g->push(std::move(node));
}

static Var binary(Var a, Var b, Op op) {
  Graph* g = same_graph(a, b, op);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t na = a.value().size();
  const std::size_t nb = b.value().size();
  bool swapped = false;
  if (sa != sb) {
    if (nb == 1 || (na >= nb && is_suffix(sb, sa))) {
      swapped = false;
    } else if (na == 1 || is_suffix(sa, sb)) {
      swapped = true;
    } else {
      shape_error(op, sa, sb);
    }
  }
  const Shape& out_shape = swapped ? sb : sa;
  Tensor out(out_shape);
  const float* pa = a.value().data().data();
  const float* pb = b.value().data().data();
  float* po = out.data().data();
  // The broadcast operand repeats in whole chunks, so loop over chunks.
  const std::size_t n = out.size();
  const std::size_t chunk = swapped ? na : nb;
  auto run = [&](auto f) {
    for (std::size_t base = 0; base < n; base += chunk) {
      const float* x = swapped ? pa : pa + base;
      const float* y = swapped ? pb + base : pb;
      float* o = po + base;
      for (std::size_t j = 0; j < chunk; ++j) o[j] = f(x[j], y[j]);
    }
  };
  switch (op) {
    case Op::add: run([](float x, float y) { return x + y; }); break;
    case Op::sub: run([](float x, float y) { return x - y; }); break;
    default: run([](float x, float y) { return x * y; }); break;
  }
  Graph::Node node;
  node.op = op;
  node.inputs = {a.id, b.id};
  node.value = std::move(out);
  node.swapped = swapped;
  return g->push(std::move(node));
}

Var add(Var a, Var b) { return binary(a, b, Op::add); }
Var sub(Var a, Var b) { return binary(a, b, Op::sub); }
Var multiply(Var a, Var b) { return binary(a, b, Op::multiply); }

Var scale(Var a, float s) {
  Graph::Node node;
  node.op = Op::scale;
  node.inputs = {a.id};
  node.scalar = s;
  node.value = a.value();
  for (float& x : node.value.data()) x *= s;
  return a.graph->push(std::move(node));
}

Var add_scalar(Var a, float s) {
  Graph::Node node;
  node.op = Op::add_scalar;
  node.inputs = {a.id};
  node.scalar = s;
  node.value = a.value();
  for (float& x : node.value.data()) x += s;
  return a.graph->push(std::move(node));
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Graph* g = parts.front().graph;
  const Shape& first = parts.front().shape();
  const int ax = normalize_axis(Op::concat, axis, first);
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(ax)] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (p.graph != g || s.size() != first.size()) shape_error(Op::concat, first, s);
    for (std::size_t d = 0; d < s.size(); ++d)
      if (static_cast<int>(d) != ax && s[d] != first[d]) shape_error(Op::concat, first, s);
    out_shape[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
  }
  Tensor out(out_shape);
  const AxisSplit os = split(out_shape, ax);
  std::size_t offset = 0;
  Graph::Node node;
  node.op = Op::concat;
  node.axis = ax;
  for (const Var& p : parts) {
    const AxisSplit ps = split(p.shape(), ax);
    const float* src = p.value().data().data();
    const std::size_t chunk = ps.len * ps.inner;
    for (std::size_t o = 0; o < ps.outer; ++o)
      std::copy_n(src + o * chunk, chunk, out.data().data() + o * os.len * os.inner + offset * os.inner);
    offset += ps.len;
    node.inputs.push_back(p.id);
  }
  node.value = std::move(out);
  return g->push(std::move(node));
}

Var slice(Var a, int axis, int start, int length) {
  const Shape& s = a.shape();
  const int ax = normalize_axis(Op::slice, axis, s);
  if (start < 0 || length <= 0 || start + length > s[static_cast<std::size_t>(ax)]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") out of bounds for shape " + shape_str(s));
  }
  Shape out_shape = s;
  out_shape[static_cast<std::size_t>(ax)] = length;
  Tensor out(out_shape);
  const AxisSplit is = split(s, ax);
  const std::size_t chunk = static_cast<std::size_t>(length) * is.inner;
  for (std::size_t o = 0; o < is.outer; ++o) {
    std::copy_n(a.value().data().data() + o * is.len * is.inner + static_cast<std::size_t>(start) * is.inner, chunk,
                out.data().data() + o * chunk);
  }
  Graph::Node node;
  node.op = Op::slice;
  node.inputs = {a.id};
  node.axis = ax;
  node.start = start;
  node.value = std::move(out);
  return a.graph->push(std::move(node));
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.value().size()) shape_error(Op::reshape, a.shape(), shape);
  Graph::Node node;
  node.op = Op::reshape;
  node.inputs = {a.id};
  node.value = a.value().reshaped(std::move(shape));
  return a.graph->push(std::move(node));
}

Var unary(Var a, Op op) {
  Graph::Node node;
  node.op = op;
  node.inputs = {a.id};
  node.value = a.value();
  const std::span<float> v = node.value.data();
  switch (op) {
    case Op::relu:
      for (float& x : v) x = x > 0.0f ? x : 0.0f;
      break;
    case Op::elu:
      for (float& x : v) x = x > 0.0f ? x : std::expm1(x);
      break;
    case Op::tanh: kernels::tanh_map(v.data(), v.data(), v.size()); break;
    case Op::sigmoid: kernels::sigmoid_map(v.data(), v.data(), v.size()); break;
    case Op::abs:
      for (float& x : v) x = std::fabs(x);
      break;
    case Op::exp:
      for (float& x : v) x = std::exp(x);
      break;
    case Op::log:
      for (float& x : v) x = std::log(std::max(x, kLogEpsilon));
      break;
    default: throw std::invalid_argument(std::string(op_name(op)) + " is not a unary op");
  }
  return a.graph->push(std::move(node));
}

Var sum(Var a) {
  float acc = 0.0f;
  for (float x : a.value().data()) acc += x;
  Graph::Node node;
  node.op = Op::sum;
  node.inputs = {a.id};
  node.value = Tensor::scalar(acc);
  return a.graph->push(std::move(node));
}

Var mean(Var a) {
  float acc = 0.0f;
  for (float x : a.value().data()) acc += x;
  Graph::Node node;
  node.op = Op::mean;
  node.inputs = {a.id};
  node.value = Tensor::scalar(acc / static_cast<float>(a.value().size()));
  return a.graph->push(std::move(node));
}

Var sum_axis(Var a, int axis) {
  const int ax = normalize_axis(Op::sum_axis, axis, a.shape());
  const AxisSplit s = split(a.shape(), ax);
  Tensor out(without_axis(a.shape(), ax));
  const float* src = a.value().data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += src[(o * s.len + l) * s.inner + i];
  Graph::Node node;
  node.op = Op::sum_axis;
  node.inputs = {a.id};
  node.axis = ax;
  node.value = std::move(out);
  return a.graph->push(std::move(node));
}

Var max_over_axis(Var a, int axis) {
  const int ax = normalize_axis(Op::max_over_axis, axis, a.shape());
  const AxisSplit s = split(a.shape(), ax);
  Tensor out(without_axis(a.shape(), ax));
  std::vector<int> arg(s.outer * s.inner, 0);
  const float* src = a.value().data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      float best = src[o * s.len * s.inner + i];
      int best_l = 0;
      for (std::size_t l = 1; l < s.len; ++l) {
        const float v = src[(o * s.len + l) * s.inner + i];
        if (v > best) {
          best = v;
          best_l = static_cast<int>(l);
        }
      }
      out[o * s.inner + i] = best;
      arg[o * s.inner + i] = best_l;
    }
  }
  Graph::Node node;
  node.op = Op::max_over_axis;
  node.inputs = {a.id};
  node.axis = ax;
  node.index = std::move(arg);
  node.value = std::move(out);
  return a.graph->push(std::move(node));
}

static Var softmax_like(Var a, int axis, Op op) {
  const int ax = normalize_axis(op, axis, a.shape());
  const AxisSplit s = split(a.shape(), ax);
  Tensor out(a.shape());
  const float* src = a.value().data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      float mx = src[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, src[base + l * s.inner]);
      float z = 0.0f;
      for (std::size_t l = 0; l < s.len; ++l) z += std::exp(src[base + l * s.inner] - mx);
      const float log_z = std::log(z);
      for (std::size_t l = 0; l < s.len; ++l) {
        const float shifted = src[base + l * s.inner] - mx;
        out[base + l * s.inner] = op == Op::softmax_over_axis ? std::exp(shifted) / z : shifted - log_z;
      }
    }
  }
  Graph::Node node;
  node.op = op;
  node.inputs = {a.id};
  node.axis = ax;
  node.value = std::move(out);
  return a.graph->push(std::move(node));
}

Var softmax_over_axis(Var a, int axis) { return softmax_like(a, axis, Op::softmax_over_axis); }
Var log_softmax_over_axis(Var a, int axis) { return softmax_like(a, axis, Op::log_softmax_over_axis); }

Var gather_along_axis(Var a, std::span<const int> index, int axis) {
  const int ax = normalize_axis(Op::gather_along_axis, axis, a.shape());
  const AxisSplit s = split(a.shape(), ax);
  if (index.size() != s.outer * s.inner) {
    throw std::invalid_argument("gather_along_axis: " + std::to_string(index.size()) +
                                " indices for shape " + shape_str(a.shape()) + " along axis " + std::to_string(ax));
  }
  Tensor out(without_axis(a.shape(), ax));
  const float* src = a.value().data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const int l = index[o * s.inner + i];
      if (l < 0 || static_cast<std::size_t>(l) >= s.len)
        throw std::out_of_range("gather_along_axis: index " + std::to_string(l) + " out of range");
      out[o * s.inner + i] = src[(o * s.len + static_cast<std::size_t>(l)) * s.inner + i];
    }
  }
  Graph::Node node;
  node.op = Op::gather_along_axis;
  node.inputs = {a.id};
  node.axis = ax;
  node.index.assign(index.begin(), index.end());
  node.value = std::move(out);
  return a.graph->push(std::move(node));
}

Var squared_error(Var a, Var b) {
  Graph* g = same_graph(a, b, Op::squared_error);
  if (a.shape() != b.shape()) shape_error(Op::squared_error, a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float d = a.value()[i] - b.value()[i];
    out[i] = d * d;
  }
  Graph::Node node;
  node.op = Op::squared_error;
  node.inputs = {a.id, b.id};
  node.value = std::move(out);
  return g->push(std::move(node));
}

Var stop_gradient(Var a) {
  Graph::Node node;
  node.op = Op::stop_gradient;
  node.inputs = {a.id};
  node.value = a.value();
  return a.graph->push(std::move(node));
}

Var gru_cell(Var x, Var h, Var w_input, Var w_hidden, Var b_input, Var b_hidden) {
  Graph* g = x.graph;
  for (Var v : {h, w_input, w_hidden, b_input, b_hidden})
    if (v.graph != g) throw std::invalid_argument("gru_cell: operands belong to different graphs");
  const Shape& sx = x.shape();
  const Shape& sh = h.shape();
  const int in = sx.back();
  const int hs = sh.back();
  const int gates = 3 * hs;
  if (sx.size() != sh.size() || !std::equal(sx.begin(), sx.end() - 1, sh.begin()) ||
      w_input.shape() != Shape{in, gates} || w_hidden.shape() != Shape{hs, gates} ||
      b_input.shape() != Shape{gates} || b_hidden.shape() != Shape{gates})
    shape_error(Op::gru_cell, sx, sh);
  const int rows = static_cast<int>(h.value().size() / static_cast<std::size_t>(hs));

  std::vector<float> gx(static_cast<std::size_t>(rows) * gates, 0.0f);
  std::vector<float> gh(gx.size(), 0.0f);
  kernels::gemm(x.value().data().data(), w_input.value().data().data(), gx.data(), rows, in, gates);
  kernels::gemm(h.value().data().data(), w_hidden.value().data().data(), gh.data(), rows, hs, gates);

  Graph::Node node;
  node.op = Op::gru_cell;
  node.inputs = {x.id, h.id, w_input.id, w_hidden.id, b_input.id, b_hidden.id};
  node.value = Tensor(sh);
  const bool keep = g->tracking();
  // Per row: r, z, n and the hidden candidate pre-activation h_n.
  if (keep) node.saved.resize(static_cast<std::size_t>(rows) * 4 * hs);
  const float* bi = b_input.value().data().data();
  const float* bh = b_hidden.value().data().data();
  const float* hp = h.value().data().data();
  float* out = node.value.data().data();
  const std::size_t cells = static_cast<std::size_t>(rows) * hs;
  std::vector<float> r(cells), z(cells), hn(cells), n(cells);
  for (int row = 0; row < rows; ++row) {
    const float* xr = gx.data() + static_cast<std::size_t>(row) * gates;
    const float* hr = gh.data() + static_cast<std::size_t>(row) * gates;
    const std::size_t o = static_cast<std::size_t>(row) * hs;
    for (int j = 0; j < hs; ++j) {
      r[o + j] = xr[j] + bi[j] + hr[j] + bh[j];
      z[o + j] = xr[hs + j] + bi[hs + j] + hr[hs + j] + bh[hs + j];
      hn[o + j] = hr[2 * hs + j] + bh[2 * hs + j];
    }
  }
  kernels::sigmoid_map(r.data(), r.data(), cells);
  kernels::sigmoid_map(z.data(), z.data(), cells);
  for (int row = 0; row < rows; ++row) {
    const float* xr = gx.data() + static_cast<std::size_t>(row) * gates;
    const std::size_t o = static_cast<std::size_t>(row) * hs;
    for (int j = 0; j < hs; ++j) n[o + j] = xr[2 * hs + j] + bi[2 * hs + j] + r[o + j] * hn[o + j];
  }
  kernels::tanh_map(n.data(), n.data(), cells);
  for (std::size_t k = 0; k < cells; ++k) out[k] = hp[k] + z[k] * (n[k] - hp[k]);
  if (keep) {
    for (std::size_t row = 0; row < static_cast<std::size_t>(rows); ++row) {
      float* sv = node.saved.data() + row * 4 * hs;
      const std::size_t o = row * hs;
      std::copy_n(r.data() + o, hs, sv);
      std::copy_n(z.data() + o, hs, sv + hs);
      std::copy_n(n.data() + o, hs, sv + 2 * hs);
      std::copy_n(hn.data() + o, hs, sv + 3 * hs);
    }
  }
  return g->push(std::move(node));
}

Var forward(Op op, std::span<const Var> in, const OpArgs& args) {
  auto need = [&](std::size_t n) {
    if (in.size() != n)
      throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(n) + " inputs");
  };
  switch (op) {
    case Op::matmul: need(2); return matmul(in[0], in[1]);
    case Op::add: need(2); return add(in[0], in[1]);
    case Op::sub: need(2); return sub(in[0], in[1]);
    case Op::multiply: need(2); return multiply(in[0], in[1]);
    case Op::squared_error: need(2); return squared_error(in[0], in[1]);
    case Op::scale: need(1); return scale(in[0], args.scalar);
    case Op::add_scalar: need(1); return add_scalar(in[0], args.scalar);
    case Op::concat: return concat(in, args.axis);
    case Op::slice: need(1); return slice(in[0], args.axis, args.start, args.length);
    case Op::reshape: need(1); return reshape(in[0], args.shape);
    case Op::relu:
    case Op::elu:
    case Op::tanh:
    case Op::sigmoid:
    case Op::abs:
    case Op::exp:
    case Op::log: need(1); return unary(in[0], op);
    case Op::sum: need(1); return sum(in[0]);
    case Op::mean: need(1); return mean(in[0]);
    case Op::sum_axis: need(1); return sum_axis(in[0], args.axis);
    case Op::max_over_axis: need(1); return max_over_axis(in[0], args.axis);
    case Op::softmax_over_axis: need(1); return softmax_over_axis(in[0], args.axis);
    case Op::log_softmax_over_axis: need(1); return log_softmax_over_axis(in[0], args.axis);
    case Op::gather_along_axis: need(1); return gather_along_axis(in[0], args.index, args.axis);
    case Op::stop_gradient: need(1); return stop_gradient(in[0]);
    case Op::gru_cell: need(6); return gru_cell(in[0], in[1], in[2], in[3], in[4], in[5]);
    case Op::leaf:
    case Op::constant: break;
  }
  throw std::invalid_argument(std::string(op_name(op)) + " cannot be applied through forward()");
}

// ---------------------------------------------------------------------------
// Backward

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  if (!track_) throw std::logic_error("backward: graph was built without gradient tracking");
  if (loss.value().size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!node(loss).needs_grad) return;

  std::vector<std::vector<float>> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.id)].assign(1, 1.0f);
  for (std::size_t id = static_cast<std::size_t>(loss.id) + 1; id-- > 0;) {
    if (grads[id].empty() || !nodes_[id].needs_grad) continue;
    backward_node(id, grads);
    if (nodes_[id].op != Op::leaf) std::vector<float>().swap(grads[id]);
  }
}

void Graph::backward_node(std::size_t id, std::vector<std::vector<float>>& grads) {
  Node& n = nodes_[id];
  const std::vector<float>& g = grads[id];
  auto slot = [&](int input) -> float* {
    const std::size_t i = static_cast<std::size_t>(input);
    if (!nodes_[i].needs_grad) return nullptr;
    if (grads[i].empty()) grads[i].assign(value(input).size(), 0.0f);
    return grads[i].data();
  };

  switch (n.op) {
    case Op::leaf: {
      if (n.param && n.param->requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) n.param->grad[i] += g[i];
      return;
    }
    case Op::constant:
    case Op::stop_gradient: return;
    case Op::matmul: {
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      const int k = a.shape().back();
      const int cols = b.shape().back();
      const int m = a.shape()[a.shape().size() - 2];
      float* ga = slot(n.inputs[0]);
      float* gb = slot(n.inputs[1]);
      if (n.swapped) {
        const int rows = static_cast<int>(a.size() / static_cast<std::size_t>(k));
        if (ga) kernels::gemm_nt(g.data(), b.data().data(), ga, rows, cols, k);
        if (gb) kernels::gemm_tn(a.data().data(), g.data(), gb, rows, k, cols);
      } else {
        const std::size_t batches = a.size() / (static_cast<std::size_t>(m) * k);
        for (std::size_t i = 0; i < batches; ++i) {
          const float* gi = g.data() + i * m * cols;
          if (ga) kernels::gemm_nt(gi, b.data().data() + i * k * cols, ga + i * m * k, m, cols, k);
          if (gb) kernels::gemm_tn(a.data().data() + i * m * k, gi, gb + i * k * cols, m, k, cols);
        }
      }
      return;
    }
    case Op::add:
    case Op::sub:
    case Op::multiply: {
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      const std::size_t na = a.size();
      const std::size_t nb = b.size();
      float* ga = slot(n.inputs[0]);
      float* gb = slot(n.inputs[1]);
      const std::size_t chunk = n.swapped ? na : nb;
      const float sign = n.op == Op::sub ? -1.0f : 1.0f;
      for (std::size_t base = 0; base < g.size(); base += chunk) {
        const std::size_t oa = n.swapped ? 0 : base;
        const std::size_t ob = n.swapped ? base : 0;
        const float* gi = g.data() + base;
        if (n.op == Op::multiply) {
          if (ga)
            for (std::size_t j = 0; j < chunk; ++j) ga[oa + j] += gi[j] * b[ob + j];
          if (gb)
            for (std::size_t j = 0; j < chunk; ++j) gb[ob + j] += gi[j] * a[oa + j];
        } else {
          if (ga)
            for (std::size_t j = 0; j < chunk; ++j) ga[oa + j] += gi[j];
          if (gb)
            for (std::size_t j = 0; j < chunk; ++j) gb[ob + j] += sign * gi[j];
        }
      }
      return;
    }
    case Op::scale: {
      if (float* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      return;
    }
    case Op::add_scalar:
    case Op::reshape: {
      if (float* ga = slot(n.inputs[0]))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case Op::concat: {
      const AxisSplit os = split(n.value.shape(), n.axis);
      std::size_t offset = 0;
      for (int input : n.inputs) {
        const AxisSplit ps = split(value(input).shape(), n.axis);
        if (float* gi = slot(input)) {
          const std::size_t chunk = ps.len * ps.inner;
          for (std::size_t o = 0; o < ps.outer; ++o) {
            const float* src = g.data() + o * os.len * os.inner + offset * os.inner;
            for (std::size_t j = 0; j < chunk; ++j) gi[o * chunk + j] += src[j];
          }
        }
        offset += ps.len;
      }
      return;
    }
    case Op::slice: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const AxisSplit is = split(value(n.inputs[0]).shape(), n.axis);
      const std::size_t chunk = n.value.size() / is.outer;
      for (std::size_t o = 0; o < is.outer; ++o) {
        float* dst = ga + o * is.len * is.inner + static_cast<std::size_t>(n.start) * is.inner;
        for (std::size_t j = 0; j < chunk; ++j) dst[j] += g[o * chunk + j];
      }
      return;
    }
    case Op::relu:
    case Op::elu:
    case Op::tanh:
    case Op::sigmoid:
    case Op::abs:
    case Op::exp:
    case Op::log: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const Tensor& x = value(n.inputs[0]);
      const Tensor& y = n.value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        float d = 0.0f;
        switch (n.op) {
          case Op::relu: d = x[i] > 0.0f ? 1.0f : 0.0f; break;
          case Op::elu: d = x[i] > 0.0f ? 1.0f : y[i] + 1.0f; break;
          case Op::tanh: d = 1.0f - y[i] * y[i]; break;
          case Op::sigmoid: d = y[i] * (1.0f - y[i]); break;
          case Op::abs: d = x[i] > 0.0f ? 1.0f : (x[i] < 0.0f ? -1.0f : 0.0f); break;
          case Op::exp: d = y[i]; break;
          case Op::log: d = x[i] > kLogEpsilon ? 1.0f / x[i] : 0.0f; break;
          default: break;
        }
        ga[i] += g[i] * d;
      }
      return;
    }
    case Op::sum:
    case Op::mean: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const std::size_t len = value(n.inputs[0]).size();
      const float d = n.op == Op::mean ? g[0] / static_cast<float>(len) : g[0];
      for (std::size_t i = 0; i < len; ++i) ga[i] += d;
      return;
    }
    case Op::sum_axis: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const AxisSplit s = split(value(n.inputs[0]).shape(), n.axis);
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
          for (std::size_t i = 0; i < s.inner; ++i) ga[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
      return;
    }
    case Op::max_over_axis:
    case Op::gather_along_axis: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const AxisSplit s = split(value(n.inputs[0]).shape(), n.axis);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const auto l = static_cast<std::size_t>(n.index[o * s.inner + i]);
          ga[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
        }
      }
      return;
    }
    case Op::softmax_over_axis:
    case Op::log_softmax_over_axis: {
      float* ga = slot(n.inputs[0]);
      if (!ga) return;
      const AxisSplit s = split(n.value.shape(), n.axis);
      const Tensor& y = n.value;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.len * s.inner + i;
          float acc = 0.0f;
          if (n.op == Op::softmax_over_axis) {
            for (std::size_t l = 0; l < s.len; ++l) acc += g[base + l * s.inner] * y[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t j = base + l * s.inner;
              ga[j] += y[j] * (g[j] - acc);
            }
          } else {
            for (std::size_t l = 0; l < s.len; ++l) acc += g[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t j = base + l * s.inner;
              ga[j] += g[j] - std::exp(y[j]) * acc;
            }
          }
        }
      }
      return;
    }
    case Op::squared_error: {
      const Tensor& a = value(n.inputs[0]);
      const Tensor& b = value(n.inputs[1]);
      float* ga = slot(n.inputs[0]);
      float* gb = slot(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const float d = 2.0f * (a[i] - b[i]) * g[i];
        if (ga) ga[i] += d;
        if (gb) gb[i] -= d;
      }
      return;
    }
    case Op::gru_cell: {
      const Tensor& x = value(n.inputs[0]);
      const Tensor& h = value(n.inputs[1]);
      const Tensor& wi = value(n.inputs[2]);
      const Tensor& wh = value(n.inputs[3]);
      const int in = x.shape().back();
      const int hs = h.shape().back();
      const int gates = 3 * hs;
      const int rows = static_cast<int>(h.size() / static_cast<std::size_t>(hs));
      // Gradients w.r.t. the input-side and hidden-side gate pre-activations.
      std::vector<float> dgx(static_cast<std::size_t>(rows) * gates);
      std::vector<float> dgh(dgx.size());
      float* gh_prev = slot(n.inputs[1]);
      for (int row = 0; row < rows; ++row) {
        const float* sv = n.saved.data() + static_cast<std::size_t>(row) * 4 * hs;
        float* dx = dgx.data() + static_cast<std::size_t>(row) * gates;
        float* dh = dgh.data() + static_cast<std::size_t>(row) * gates;
        for (int j = 0; j < hs; ++j) {
          const std::size_t k = static_cast<std::size_t>(row) * hs + j;
          const float r = sv[j], z = sv[hs + j], nn = sv[2 * hs + j], hn = sv[3 * hs + j];
          const float go = g[k];
          const float dn = go * z * (1.0f - nn * nn);
          const float dr = dn * hn * r * (1.0f - r);
          const float dz = go * (nn - h[k]) * z * (1.0f - z);
          dx[j] = dr;
          dx[hs + j] = dz;
          dx[2 * hs + j] = dn;
          dh[j] = dr;
          dh[hs + j] = dz;
          dh[2 * hs + j] = dn * r;
          if (gh_prev) gh_prev[k] += go * (1.0f - z);
        }
      }
      if (float* gx = slot(n.inputs[0])) kernels::gemm_nt(dgx.data(), wi.data().data(), gx, rows, gates, in);
      if (gh_prev) kernels::gemm_nt(dgh.data(), wh.data().data(), gh_prev, rows, gates, hs);
      if (float* gwi = slot(n.inputs[2])) kernels::gemm_tn(x.data().data(), dgx.data(), gwi, rows, in, gates);
      if (float* gwh = slot(n.inputs[3])) kernels::gemm_tn(h.data().data(), dgh.data(), gwh, rows, hs, gates);
      auto column_sums = [&](int input, const std::vector<float>& d) {
        float* gb = slot(input);
        if (!gb) return;
        for (int row = 0; row < rows; ++row)
          for (int j = 0; j < gates; ++j) gb[j] += d[static_cast<std::size_t>(row) * gates + j];
      };
      column_sums(n.inputs[4], dgx);
      column_sums(n.inputs[5], dgh);
      return;
    }
  }
}

}  // namespace hpf::ad
