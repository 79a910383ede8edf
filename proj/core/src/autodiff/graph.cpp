#include "ewcft/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ewcft::autodiff {

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kAddRowBroadcast: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kEmbeddingBag: return "embedding_bag";
    case OpKind::kConcat: return "concat";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kNll: return "nll";
    case OpKind::kSum: return "sum";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
  }
  return "unknown";
}

const Graph::Node& Graph::node(Var v) const {
  if (v.index >= nodes_.size()) {
    throw std::out_of_range("Graph: variable " + std::to_string(v.index) + " is not on this graph");
  }
  return nodes_[v.index];
}

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Graph::Node Graph::make(OpKind op, std::initializer_list<Var> ins, Tensor out) const {
  Node n;
  n.op = op;
  bool needs_grad = false;
  for (Var v : ins) {
    n.in[n.n_in++] = v.index;
    needs_grad = needs_grad || node(v).out.requires_grad();
  }
  out.set_requires_grad(needs_grad);
  n.out = std::move(out);
  return n;
}

std::span<const std::size_t> Graph::inputs(Var v) const {
  const Node& n = node(v);
  return {n.in.data(), n.n_in};
}

const std::string* Graph::parameter_id(Var v) const {
  const Node& n = node(v);
  return n.is_parameter ? &n.param_id : nullptr;
}

Var Graph::parameter(std::string id, const Tensor& value) {
  Node n;
  n.out = Tensor(value.shape(), value.data());
  n.out.set_requires_grad(true);
  n.param_id = std::move(id);
  n.is_parameter = true;
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  value.clear_grad();
  value.set_requires_grad(true);
  n.out = std::move(value);
  return push(std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n;
  value.clear_grad();
  value.set_requires_grad(false);
  n.out = std::move(value);
  return push(std::move(n));
}

Var Graph::detach(Var x) {
  const Tensor& v = node(x).out;
  return constant(Tensor(v.shape(), v.data()));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = node(a).out;
  const Tensor& B = node(b).out;
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0]) {
    throw ShapeError("matmul", A.shape(), B.shape());
  }
  const std::size_t n = A.shape()[0], k = A.shape()[1], m = B.shape()[1];
  Tensor C(Shape{n, m});
  const double* pa = A.data().data();
  const double* pb = B.data().data();
  double* pc = C.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = pc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return push(make(OpKind::kMatMul, {a, b}, std::move(C)));
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = node(a).out;
  const Tensor& B = node(b).out;
  if (A.shape() == B.shape()) {
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] + B[i];
    return push(make(OpKind::kAdd, {a, b}, std::move(C)));
  }
  if (A.rank() == 2 && B.rank() == 1 && A.shape()[1] == B.shape()[0]) {
    Tensor C(A.shape());
    const std::size_t m = B.size();
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] + B[i % m];
    return push(make(OpKind::kAddRowBroadcast, {a, b}, std::move(C)));
  }
  throw ShapeError("add", A.shape(), B.shape());
}

Var Graph::sub(Var a, Var b) {
  const Tensor& A = node(a).out;
  const Tensor& B = node(b).out;
  if (A.shape() != B.shape()) throw ShapeError("sub", A.shape(), B.shape());
  Tensor C(A.shape());
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] - B[i];
  return push(make(OpKind::kSub, {a, b}, std::move(C)));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = node(a).out;
  const Tensor& B = node(b).out;
  if (A.shape() != B.shape()) throw ShapeError("mul", A.shape(), B.shape());
  Tensor C(A.shape());
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * B[i];
  return push(make(OpKind::kMul, {a, b}, std::move(C)));
}

Var Graph::relu(Var x) {
  const Tensor& X = node(x).out;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
  return push(make(OpKind::kRelu, {x}, std::move(Y)));
}

Var Graph::tanh(Var x) {
  const Tensor& X = node(x).out;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::tanh(X[i]);
  return push(make(OpKind::kTanh, {x}, std::move(Y)));
}

Var Graph::embedding_bag(Var table, std::span<const TokenSpan> bags) {
  const Tensor& T = node(table).out;
  if (T.rank() != 2) throw ShapeError("embedding_bag", T.shape(), Shape{bags.size()});
  const std::size_t vocab = T.shape()[0], dim = T.shape()[1];
  Node n;
  n.bag_offsets.reserve(bags.size() + 1);
  n.bag_offsets.push_back(0);
  for (std::size_t b = 0; b < bags.size(); ++b) {
    if (bags[b].empty()) {
      throw std::invalid_argument("embedding_bag: bag " + std::to_string(b) + " is empty");
    }
    for (auto id : bags[b]) {
      if (id >= vocab) {
        throw std::out_of_range("embedding_bag: token id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab));
      }
      n.bag_ids.push_back(id);
    }
    n.bag_offsets.push_back(n.bag_ids.size());
  }
  Tensor out(Shape{bags.size(), dim});
  for (std::size_t b = 0; b < bags.size(); ++b) {
    double* row = &out.values()[b * dim];
    const std::size_t lo = n.bag_offsets[b], hi = n.bag_offsets[b + 1];
    for (std::size_t t = lo; t < hi; ++t) {
      const double* src = &T.data()[static_cast<std::size_t>(n.bag_ids[t]) * dim];
      for (std::size_t d = 0; d < dim; ++d) row[d] += src[d];
    }
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t d = 0; d < dim; ++d) row[d] *= inv;
  }
  Node made = make(OpKind::kEmbeddingBag, {table}, std::move(out));
  made.bag_ids = std::move(n.bag_ids);
  made.bag_offsets = std::move(n.bag_offsets);
  return push(std::move(made));
}

Var Graph::concat(Var a, Var b) {
  const Tensor& A = node(a).out;
  const Tensor& B = node(b).out;
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[0] != B.shape()[0]) {
    throw ShapeError("concat", A.shape(), B.shape());
  }
  const std::size_t n = A.shape()[0], p = A.shape()[1], q = B.shape()[1];
  Tensor C(Shape{n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&A.data()[i * p], p, &C.values()[i * (p + q)]);
    std::copy_n(&B.data()[i * q], q, &C.values()[i * (p + q) + p]);
  }
  return push(make(OpKind::kConcat, {a, b}, std::move(C)));
}

Var Graph::log_softmax(Var x) {
  const Tensor& X = node(x).out;
  if (X.rank() != 1 && X.rank() != 2) throw ShapeError("log_softmax", X.shape(), Shape{});
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor Y(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &X.data()[r * cols];
    double* out = &Y.values()[r * cols];
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(in[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[c] = in[c] - lse;
  }
  return push(make(OpKind::kLogSoftmax, {x}, std::move(Y)));
}

Var Graph::nll(Var logp, std::span<const std::size_t> targets, std::span<const double> weights) {
  const Tensor& L = node(logp).out;
  if (L.rank() != 1 && L.rank() != 2) throw ShapeError("nll", L.shape(), Shape{targets.size()});
  const std::size_t rows = L.rows(), cols = L.cols();
  if (targets.size() != rows) throw ShapeError("nll", L.shape(), Shape{targets.size()});
  if (!weights.empty() && weights.size() != rows) throw ShapeError("nll", L.shape(), Shape{weights.size()});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) {
      throw std::out_of_range("nll: target " + std::to_string(targets[r]) + " outside " +
                              std::to_string(cols) + " classes");
    }
    const double w = weights.empty() ? 1.0 : weights[r];
    total += w * -L.data()[r * cols + targets[r]];
  }
  Node made = make(OpKind::kNll, {logp}, Tensor::scalar(total / static_cast<double>(rows)));
  made.targets.assign(targets.begin(), targets.end());
  made.weights.assign(weights.begin(), weights.end());
  return push(std::move(made));
}

Var Graph::sum(Var x) {
  const Tensor& X = node(x).out;
  double total = 0.0;
  for (double v : X.data()) total += v;
  return push(make(OpKind::kSum, {x}, Tensor::scalar(total)));
}

Var Graph::scale(Var x, double factor) {
  const Tensor& X = node(x).out;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] * factor;
  Node made = make(OpKind::kScale, {x}, std::move(Y));
  made.scalar = factor;
  return push(std::move(made));
}

Var Graph::add_scalar(Var x, double offset) {
  const Tensor& X = node(x).out;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] + offset;
  Node made = make(OpKind::kAddScalar, {x}, std::move(Y));
  made.scalar = offset;
  return push(std::move(made));
}

GradientMap Graph::backward(Var loss) {
  const Tensor& L = node(loss).out;
  if (!L.is_scalar()) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + to_string(L.shape()));
  }
  for (auto& n : nodes_) {
    if (n.out.requires_grad()) {
      n.out.zero_grad();
    } else {
      n.out.clear_grad();
    }
  }
  GradientMap grads;
  if (!L.requires_grad()) return grads;
  (*nodes_[loss.index].out.grad())[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (nodes_[i].out.requires_grad() && nodes_[i].op != OpKind::kLeaf) backprop(i);
  }
  for (const auto& n : nodes_) {
    if (!n.is_parameter) continue;
    auto [it, inserted] = grads.try_emplace(n.param_id, n.out.shape(), *n.out.grad());
    if (!inserted) {
      auto& acc = it->second;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += (*n.out.grad())[j];
    }
  }
  return grads;
}

void Graph::backprop(std::size_t index) {
  Node& n = nodes_[index];
  const std::vector<double>& g = *n.out.grad();
  auto input = [&](std::size_t k) -> Node& { return nodes_[n.in[k]]; };
  auto wants = [&](std::size_t k) { return input(k).out.requires_grad(); };
  auto gbuf = [&](std::size_t k) -> std::vector<double>& { return *input(k).out.grad(); };

  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Tensor& A = input(0).out;
      const Tensor& B = input(1).out;
      const std::size_t rows = A.shape()[0], k = A.shape()[1], m = B.shape()[1];
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * B.data()[p * m + j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.data()[i * k + p];
            for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
          }
        }
      }
      break;
    }
    case OpKind::kAdd:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        auto& gi = gbuf(k);
        for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
      }
      break;
    case OpKind::kAddRowBroadcast: {
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        const std::size_t m = gb.size();
        for (std::size_t j = 0; j < g.size(); ++j) gb[j % m] += g[j];
      }
      break;
    }
    case OpKind::kSub:
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t j = 0; j < g.size(); ++j) gb[j] -= g[j];
      }
      break;
    case OpKind::kMul: {
      const Tensor& A = input(0).out;
      const Tensor& B = input(1).out;
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * B[j];
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t j = 0; j < g.size(); ++j) gb[j] += g[j] * A[j];
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor& X = input(0).out;
      auto& gx = gbuf(0);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (X[j] > 0.0) gx[j] += g[j];
      }
      break;
    }
    case OpKind::kTanh: {
      auto& gx = gbuf(0);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double y = n.out[j];
        gx[j] += g[j] * (1.0 - y * y);
      }
      break;
    }
    case OpKind::kEmbeddingBag: {
      auto& gt = gbuf(0);
      const std::size_t dim = input(0).out.shape()[1];
      const std::size_t bags = n.bag_offsets.size() - 1;
      for (std::size_t b = 0; b < bags; ++b) {
        const std::size_t lo = n.bag_offsets[b], hi = n.bag_offsets[b + 1];
        const double inv = 1.0 / static_cast<double>(hi - lo);
        const double* grow = &g[b * dim];
        for (std::size_t t = lo; t < hi; ++t) {
          double* dst = &gt[static_cast<std::size_t>(n.bag_ids[t]) * dim];
          for (std::size_t d = 0; d < dim; ++d) dst[d] += grow[d] * inv;
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const std::size_t rows = n.out.shape()[0], width = n.out.shape()[1];
      const std::size_t p = input(0).out.shape()[1], q = width - p;
      if (wants(0)) {
        auto& ga = gbuf(0);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * width + j];
        }
      }
      if (wants(1)) {
        auto& gb = gbuf(1);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * width + p + j];
        }
      }
      break;
    }
    case OpKind::kLogSoftmax: {
      auto& gx = gbuf(0);
      const std::size_t rows = n.out.rows(), cols = n.out.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gsum += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          gx[r * cols + c] += g[r * cols + c] - std::exp(n.out[r * cols + c]) * gsum;
        }
      }
      break;
    }
    case OpKind::kNll: {
      auto& gl = gbuf(0);
      const Tensor& L = input(0).out;
      const std::size_t rows = L.rows(), cols = L.cols();
      const double upstream = g[0] / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double w = n.weights.empty() ? 1.0 : n.weights[r];
        gl[r * cols + n.targets[r]] -= w * upstream;
      }
      break;
    }
    case OpKind::kSum: {
      auto& gx = gbuf(0);
      for (double& v : gx) v += g[0];
      break;
    }
    case OpKind::kScale: {
      auto& gx = gbuf(0);
      for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j] * n.scalar;
      break;
    }
    case OpKind::kAddScalar: {
      auto& gx = gbuf(0);
      for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j];
      break;
    }
  }
}

}  // namespace ewcft::autodiff
