#include "dkstn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "dkstn/error.hpp"

namespace dkstn {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

const Tensor& Var::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node node) {
  if (check_finite_ && !node.value.all_finite())
    fail(ErrorKind::numeric, "non-finite value produced by op '" + node.op + "'");
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.op = "param:" + p.name;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (auto id : inputs) {
    require(id < nodes_.size(), ErrorKind::dimension, "op input recorded after the op");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor* Tape::grad_for(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.shape() == n.value.shape()) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

void Tape::backward(Var root) { backward(root, Tensor(value(root.id).shape(), 1.0)); }

void Tape::backward(Var root, const Tensor& seed) {
  require(root.tape == this, ErrorKind::parameter, "backward root belongs to another tape");
  require(!swept_, ErrorKind::parameter, "backward already run on this tape");
  require(seed.shape() == value(root.id).shape(), ErrorKind::dimension,
          "seed shape " + shape_str(seed.shape()) + " vs root " +
              shape_str(value(root.id).shape()));
  swept_ = true;
  visits_.assign(nodes_.size(), 0);
  if (Tensor* g = grad_for(root.id)) *g = seed;

  for (std::size_t i = root.id + 1; i-- > 0;) {
    ++visits_[i];
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace kernels

namespace {

Tape& tape_of(Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::parameter,
          "operands belong to different tapes");
  return *a.tape;
}

// Index maps for a broadcast binary op; empty maps mean "same shape".
struct BroadcastMap {
  Shape out;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
  bool identity = false;
};

std::shared_ptr<BroadcastMap> make_broadcast(const Shape& a, const Shape& b, const char* op) {
  auto map = std::make_shared<BroadcastMap>();
  if (a == b) {
    map->out = a;
    map->identity = true;
    return map;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  map->out.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1)
      fail(ErrorKind::dimension, std::string(op) + ": cannot broadcast " + shape_str(a) +
                                     " with " + shape_str(b));
    map->out[d] = std::max(pa[d], pb[d]);
  }
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t d = rank; d-- > 0;) {
    sa[d] = pa[d] == 1 ? 0 : acc_a;
    sb[d] = pb[d] == 1 ? 0 : acc_b;
    acc_a *= pa[d];
    acc_b *= pb[d];
  }
  const std::size_t total = shape_size(map->out);
  map->ia.resize(total);
  map->ib.resize(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offa = 0, offb = 0;
  for (std::size_t o = 0; o < total; ++o) {
    map->ia[o] = offa;
    map->ib[o] = offb;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < map->out[d]) break;
      offa -= sa[d] * idx[d];
      offb -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return map;
}

template <typename Fwd, typename Da, typename Db>
Var binary(const char* op, Var a, Var b, Fwd fwd, Da da, Db db) {
  Tape& tape = tape_of(a, b);
  auto map = make_broadcast(a.shape(), b.shape(), op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(map->out);
  const std::size_t n = out.size();
  if (map->identity) {
    for (std::size_t o = 0; o < n; ++o) out[o] = fwd(av[o], bv[o]);
  } else {
    for (std::size_t o = 0; o < n; ++o) out[o] = fwd(av[map->ia[o]], bv[map->ib[o]]);
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(op, std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& gout = *t.grad_for(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    Tensor* gx = t.grad_for(ia);
    Tensor* gy = t.grad_for(ib);
    const std::size_t total = gout.size();
    for (std::size_t o = 0; o < total; ++o) {
      const std::size_t ja = map->identity ? o : map->ia[o];
      const std::size_t jb = map->identity ? o : map->ib[o];
      if (gx) (*gx)[ja] += gout[o] * da(x[ja], y[jb]);
      if (gy) (*gy)[jb] += gout[o] * db(x[ja], y[jb]);
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ia = a.id;
  // deriv(x, y) receives the input and the forward output
  return a.tape->record(op, std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& gout = *t.grad_for(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    for (std::size_t i = 0; i < gout.size(); ++i) (*gx)[i] += gout[i] * deriv(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var softmax_lastdim(Var a) {
  const Tensor& av = a.value();
  require(av.rank() >= 1, ErrorKind::dimension, "softmax of a rank-0 tensor");
  const std::size_t cols = av.shape().back();
  const std::size_t rows = av.size() / cols;
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.raw() + r * cols;
    double* y = out.raw() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= s;
  }
  const std::size_t ia = a.id;
  return a.tape->record("softmax", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& gout = *t.grad_for(self);
    const Tensor& y = t.value(self);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gout[base + j] * y[base + j];
      for (std::size_t j = 0; j < cols; ++j)
        (*gx)[base + j] += y[base + j] * (gout[base + j] - dot);
    }
  });
}

Var sum(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record("sum", Tensor::scalar(a.value().sum()), {ia},
                        [=](Tape& t, std::size_t self) {
                          Tensor* gx = t.grad_for(ia);
                          if (!gx) return;
                          const double g = (*t.grad_for(self))[0];
                          for (auto& v : gx->data()) v += g;
                        });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

// ---------------------------------------------------------------------------
// Products

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    fail(ErrorKind::dimension,
         "matmul: cannot multiply " + shape_str(av.shape()) + " by " + shape_str(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n}, 0.0);
  kernels::gemm_nn(m, n, k, av.raw(), bv.raw(), out.raw());
  const std::size_t ia = a.id, ib = b.id;
  return tape.record("matmul", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_for(self);
    if (Tensor* ga = t.grad_for(ia)) kernels::gemm_nt(m, k, n, g.raw(), t.value(ib).raw(), ga->raw());
    if (Tensor* gb = t.grad_for(ib)) kernels::gemm_tn(k, n, m, t.value(ia).raw(), g.raw(), gb->raw());
  });
}

Var bmm(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
    fail(ErrorKind::dimension,
         "bmm: cannot multiply " + shape_str(av.shape()) + " by " + shape_str(bv.shape()));
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor out({batch, m, n}, 0.0);
  for (std::size_t s = 0; s < batch; ++s)
    kernels::gemm_nn(m, n, k, av.raw() + s * m * k, bv.raw() + s * k * n, out.raw() + s * m * n);
  const std::size_t ia = a.id, ib = b.id;
  return tape.record("bmm", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_for(self);
    Tensor* ga = t.grad_for(ia);
    Tensor* gb = t.grad_for(ib);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gs = g.raw() + s * m * n;
      if (ga) kernels::gemm_nt(m, k, n, gs, t.value(ib).raw() + s * k * n, ga->raw() + s * m * k);
      if (gb) kernels::gemm_tn(k, n, m, t.value(ia).raw() + s * m * k, gs, gb->raw() + s * k * n);
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add(matmul(x, weight), bias); }

// ---------------------------------------------------------------------------
// Shape manipulation

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id;
  return a.tape->record("reshape", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& g = *t.grad_for(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var permute(Var a, std::vector<std::size_t> axes) {
  const Tensor& av = a.value();
  const std::size_t rank = av.rank();
  require(axes.size() == rank, ErrorKind::dimension,
          "permute: " + std::to_string(axes.size()) + " axes for " + shape_str(av.shape()));
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    require(ax < rank && !seen[ax], ErrorKind::dimension, "permute: invalid axis list");
    seen[ax] = true;
  }
  std::vector<std::size_t> in_strides(rank);
  std::size_t acc = 1;
  for (std::size_t d = rank; d-- > 0;) {
    in_strides[d] = acc;
    acc *= av.dim(d);
  }
  Shape out_shape(rank);
  std::vector<std::size_t> strides(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    out_shape[d] = av.dim(axes[d]);
    strides[d] = in_strides[axes[d]];
  }
  // source offset for each output element
  auto src = std::make_shared<std::vector<std::size_t>>(av.size());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t o = 0; o < av.size(); ++o) {
    (*src)[o] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += strides[d];
      if (idx[d] < out_shape[d]) break;
      off -= strides[d] * idx[d];
      idx[d] = 0;
    }
  }
  Tensor out(out_shape);
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = av[(*src)[o]];
  const std::size_t ia = a.id;
  return a.tape->record("permute", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& g = *t.grad_for(self);
    for (std::size_t o = 0; o < g.size(); ++o) (*gx)[(*src)[o]] += g[o];
  });
}

Var transpose_last2(Var a) {
  const std::size_t rank = a.value().rank();
  require(rank >= 2, ErrorKind::dimension, "transpose needs rank >= 2");
  std::vector<std::size_t> axes(rank);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[rank - 1], axes[rank - 2]);
  return permute(a, std::move(axes));
}

Var concat_lastdim(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::dimension, "concat of zero tensors");
  Tape& tape = *parts.front().tape;
  const Shape& first = parts.front().shape();
  const std::size_t rows = parts.front().value().size() / first.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    require(p.tape == &tape, ErrorKind::parameter, "concat operands on different tapes");
    require(s.size() == first.size() &&
                std::equal(s.begin(), s.end() - 1, first.begin(), first.end() - 1),
            ErrorKind::dimension,
            "concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor out(out_shape);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.raw() + r * widths[p], widths[p], out.raw() + r * total + col);
    col += widths[p];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return tape.record("concat", std::move(out), ids, [=](Tape& t, std::size_t self) {
    const Tensor& g = *t.grad_for(self);
    std::size_t c = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (Tensor* gp = t.grad_for(ids[p])) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[p]; ++j)
            (*gp)[r * widths[p] + j] += g[r * total + c + j];
      }
      c += widths[p];
    }
  });
}

Var slice_lastdim(Var a, std::size_t begin, std::size_t length) {
  const Tensor& av = a.value();
  const std::size_t cols = av.shape().back();
  require(length > 0 && begin + length <= cols, ErrorKind::dimension,
          "slice [" + std::to_string(begin) + ", +" + std::to_string(length) + ") of " +
              shape_str(av.shape()));
  const std::size_t rows = av.size() / cols;
  Shape out_shape = av.shape();
  out_shape.back() = length;
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.raw() + r * cols + begin, length, out.raw() + r * length);
  const std::size_t ia = a.id;
  return a.tape->record("slice", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& g = *t.grad_for(self);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < length; ++j) (*gx)[r * cols + begin + j] += g[r * length + j];
  });
}

Var stack_axis1(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::dimension, "stack of zero tensors");
  const Shape& s0 = parts.front().shape();
  require(s0.size() == 2, ErrorKind::dimension, "stack_axis1 expects [B,D] parts");
  const std::size_t batch = s0[0], width = s0[1], steps = parts.size();
  for (const Var& p : parts)
    require(p.shape() == s0, ErrorKind::dimension,
            "stack: " + shape_str(p.shape()) + " vs " + shape_str(s0));
  Tensor out({batch, steps, width});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor& v = parts[t].value();
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(v.raw() + b * width, width, out.raw() + (b * steps + t) * width);
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return parts.front().tape->record("stack", std::move(out), ids, [=](Tape& tp, std::size_t self) {
    const Tensor& g = *tp.grad_for(self);
    for (std::size_t t = 0; t < steps; ++t) {
      Tensor* gp = tp.grad_for(ids[t]);
      if (!gp) continue;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < width; ++j)
          (*gp)[b * width + j] += g[(b * steps + t) * width + j];
    }
  });
}

Var select_axis1(Var a, std::size_t index) {
  const Tensor& av = a.value();
  require(av.rank() == 3 && index < av.dim(1), ErrorKind::dimension,
          "select_axis1(" + std::to_string(index) + ") of " + shape_str(av.shape()));
  const std::size_t batch = av.dim(0), steps = av.dim(1), width = av.dim(2);
  Tensor out({batch, width});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(av.raw() + (b * steps + index) * width, width, out.raw() + b * width);
  const std::size_t ia = a.id;
  return a.tape->record("select", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_for(ia);
    if (!gx) return;
    const Tensor& g = *t.grad_for(self);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j)
        (*gx)[(b * steps + index) * width + j] += g[b * width + j];
  });
}

// ---------------------------------------------------------------------------
// Convolution

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  require(stride >= 1, ErrorKind::dimension, "conv stride must be >= 1");
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel)
    fail(ErrorKind::dimension, "conv output extent < 1: input " + std::to_string(in) +
                                   " + 2*" + std::to_string(padding) + " padding < kernel " +
                                   std::to_string(kernel));
  return (padded - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t images, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t positions() const { return ho * wo; }
};

void im2col(const ConvGeometry& g, const double* img, double* cols) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = cols + ((c * g.kh + ki) * g.kw + kj) * npos;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          double* dst = row + oi * g.wo;
          if (ii < 0 || ii >= static_cast<long>(g.h)) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const double* src = img + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            dst[oj] = (jj < 0 || jj >= static_cast<long>(g.w)) ? 0.0
                                                                : src[static_cast<std::size_t>(jj)];
          }
        }
      }
}

void col2im(const ConvGeometry& g, const double* cols, double* img) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = cols + ((c * g.kh + ki) * g.kw + kj) * npos;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          if (ii < 0 || ii >= static_cast<long>(g.h)) continue;
          double* dst = img + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            if (jj < 0 || jj >= static_cast<long>(g.w)) continue;
            dst[static_cast<std::size_t>(jj)] += row[oi * g.wo + oj];
          }
        }
      }
}

}  // namespace

Var conv2d(Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t padding) {
  Tape& tape = tape_of(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const bool batched = xv.rank() == 4;
  if (!(xv.rank() == 3 || batched) || kv.rank() != 4)
    fail(ErrorKind::dimension, "conv2d: input " + shape_str(xv.shape()) + ", kernel " +
                                   shape_str(kv.shape()));
  ConvGeometry g{};
  g.images = batched ? xv.dim(0) : 1;
  g.cin = xv.dim(batched ? 1 : 0);
  g.h = xv.dim(batched ? 2 : 1);
  g.w = xv.dim(batched ? 3 : 2);
  g.cout = kv.dim(0);
  g.kh = kv.dim(2);
  g.kw = kv.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kv.dim(1) != g.cin)
    fail(ErrorKind::dimension, "conv2d: kernel " + shape_str(kv.shape()) + " expects " +
                                   std::to_string(kv.dim(1)) + " input channels, input has " +
                                   std::to_string(g.cin));
  require(g.kh % 2 == 1 && g.kw % 2 == 1, ErrorKind::dimension,
          "conv2d: kernel extents must be odd, got " + shape_str(kv.shape()));
  g.ho = conv_output_extent(g.h, g.kh, stride, padding);
  g.wo = conv_output_extent(g.w, g.kw, stride, padding);
  if (bias)
    require(bias->tape == &tape && bias->shape() == Shape{g.cout}, ErrorKind::dimension,
            "conv2d: bias must be [" + std::to_string(g.cout) + "]");

  Shape out_shape = batched ? Shape{g.images, g.cout, g.ho, g.wo} : Shape{g.cout, g.ho, g.wo};
  Tensor out(out_shape, 0.0);
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * g.positions();
  std::vector<double> cols(g.patch() * g.positions());
  for (std::size_t n = 0; n < g.images; ++n) {
    im2col(g, xv.raw() + n * in_stride, cols.data());
    double* dst = out.raw() + n * out_stride;
    if (bias) {
      const Tensor& bv = bias->value();
      for (std::size_t co = 0; co < g.cout; ++co)
        std::fill_n(dst + co * g.positions(), g.positions(), bv[co]);
    }
    kernels::gemm_nn(g.cout, g.positions(), g.patch(), kv.raw(), cols.data(), dst);
  }

  std::vector<std::size_t> inputs{x.id, kernel.id};
  if (bias) inputs.push_back(bias->id);
  const std::size_t ix = x.id, ik = kernel.id;
  const std::optional<std::size_t> ibias = bias ? std::optional<std::size_t>(bias->id) : std::nullopt;
  return tape.record("conv2d", std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& gout = *t.grad_for(self);
    const Tensor& xin = t.value(ix);
    const Tensor& kin = t.value(ik);
    Tensor* gx = t.grad_for(ix);
    Tensor* gk = t.grad_for(ik);
    Tensor* gb = ibias ? t.grad_for(*ibias) : nullptr;
    std::vector<double> colbuf(g.patch() * g.positions());
    std::vector<double> dcols(g.patch() * g.positions());
    for (std::size_t n = 0; n < g.images; ++n) {
      const double* go = gout.raw() + n * out_stride;
      if (gb) {
        for (std::size_t co = 0; co < g.cout; ++co) {
          double s = 0.0;
          for (std::size_t p = 0; p < g.positions(); ++p) s += go[co * g.positions() + p];
          (*gb)[co] += s;
        }
      }
      if (gk) {
        im2col(g, xin.raw() + n * in_stride, colbuf.data());
        kernels::gemm_nt(g.cout, g.patch(), g.positions(), go, colbuf.data(), gk->raw());
      }
      if (gx) {
        std::fill(dcols.begin(), dcols.end(), 0.0);
        kernels::gemm_tn(g.patch(), g.positions(), g.cout, kin.raw(), go, dcols.data());
        col2im(g, dcols.data(), gx->raw() + n * in_stride);
      }
    }
  });
}

}  // namespace dkstn
