// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "shapefill/common.hpp"

namespace shapefill::ad {
namespace {

std::size_t bytes_of(const Matrix& m) { return static_cast<std::size_t>(m.size()) * sizeof(double); }

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ValidationError("autodiff: operands live on different tapes");
}

void require_shape(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("autodiff: shape mismatch in ") + what);
}

}  // namespace

Var Tape::constant(Matrix value) {
  lease_.grow(bytes_of(value));
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id_].requires_grad = record_;
  return v;
}

Var Tape::push(Matrix value, const std::vector<Var>& parents, BackwardFn fn) {
  bool wants_grad = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw ValidationError("autodiff: operand from a different tape");
    wants_grad = wants_grad || nodes_[p.id_].requires_grad;
  }
  lease_.grow(bytes_of(value));
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = record_ && wants_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_ref(const Var& v) {
  Node& n = nodes_[v.id_];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
    lease_.grow(bytes_of(n.grad));
  }
  return n.grad;
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& out, const Matrix& seed) {
  if (!record_) throw ValidationError("autodiff: backward on a non-recording tape");
  if (out.tape_ != this) throw ValidationError("autodiff: output from a different tape");
  const Node& o = nodes_[out.id_];
  require_shape(seed.rows() == o.value.rows() && seed.cols() == o.value.cols(), "backward seed");
  if (!o.requires_grad) return;
  grad_ref(out) += seed;
  for (int id = out.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.cols() == b.rows(), "matmul");
  Matrix y = a.value() * b.value();
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(a)) t.grad_ref(a).noalias() += g * b.value().transpose();
    if (t.needs_grad(b)) t.grad_ref(b).noalias() += a.value().transpose() * g;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.cols() == b.cols(), "matmul_nt");
  Matrix y = a.value() * b.value().transpose();
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(a)) t.grad_ref(a).noalias() += g * b.value();
    if (t.needs_grad(b)) t.grad_ref(b).noalias() += g.transpose() * a.value();
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  require_shape(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "linear");
  Matrix y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  return x.tape().push(std::move(y), {x, w, b}, [x, w, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(x)) t.grad_ref(x).noalias() += g * w.value().transpose();
    if (t.needs_grad(w)) t.grad_ref(w).noalias() += x.value().transpose() * g;
    if (t.needs_grad(b)) t.grad_ref(b) += g.colwise().sum();
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix y = a.value() + b.value();
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Matrix y = a.value() - b.value();
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) -= g;
  });
}

Var add_row(const Var& x, const Var& b) {
  require_same_tape(x, b);
  require_shape(b.rows() == 1 && b.cols() == x.cols(), "add_row");
  Matrix y = x.value();
  y.rowwise() += b.value().row(0);
  return x.tape().push(std::move(y), {x, b}, [x, b](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(x)) t.grad_ref(x) += g;
    if (t.needs_grad(b)) t.grad_ref(b) += g.colwise().sum();
  });
}

Var scale(const Var& x, double s) {
  Matrix y = x.value() * s;
  return x.tape().push(std::move(y), {x}, [x, s](Tape& t, int self) { t.grad_ref(x) += s * t.node_grad(self); });
}

Var relu(const Var& x) {
  Matrix y = x.value().cwiseMax(0.0);
  return x.tape().push(std::move(y), {x}, [x](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    t.grad_ref(x).array() += (x.value().array() > 0.0).select(g.array(), 0.0);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  const Eigen::Index n = x.rows(), c = x.cols();
  require_shape(gain.rows() == 1 && gain.cols() == c && bias.rows() == 1 && bias.cols() == c, "layer_norm");
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  const Matrix& xv = x.value();
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xv.row(r).array() - mean) * (*inv_std)[r];
  }
  Matrix y = xhat->array().rowwise() * gain.value().row(0).array();
  y.rowwise() += bias.value().row(0);
  return x.tape().push(std::move(y), {x, gain, bias}, [x, gain, bias, xhat, inv_std](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    if (t.needs_grad(gain)) t.grad_ref(gain) += (g.array() * xhat->array()).colwise().sum().matrix();
    if (t.needs_grad(bias)) t.grad_ref(bias) += g.colwise().sum();
    if (!t.needs_grad(x)) return;
    const double c = static_cast<double>(g.cols());
    Matrix& gx = t.grad_ref(x);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const Eigen::ArrayXd dxhat = (g.row(r).array() * gain.value().row(0).array()).transpose();
      const Eigen::ArrayXd xh = xhat->row(r).array().transpose();
      const double m1 = dxhat.sum() / c;
      const double m2 = (dxhat * xh).sum() / c;
      gx.row(r).array() += ((dxhat - m1 - xh * m2) * (*inv_std)[r]).transpose();
    }
  });
}

Var softmax_rows(const Var& x) {
  Matrix y = x.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  auto out = std::make_shared<Matrix>(y);
  return x.tape().push(std::move(y), {x}, [x, out](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Eigen::VectorXd dot = (g.array() * out->array()).rowwise().sum();
    t.grad_ref(x).array() += out->array() * (g.array().colwise() - dot.array());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("autodiff: concat of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    require_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto captured = std::make_shared<std::vector<Var>>(parts);
  return parts.front().tape().push(std::move(y), parts, [captured](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Eigen::Index off = 0;
    for (const Var& p : *captured) {
      if (t.needs_grad(p)) t.grad_ref(p) += g.middleCols(off, p.cols());
      off += p.cols();
    }
  });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  require_shape(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols");
  Matrix y = x.value().middleCols(start, count);
  return x.tape().push(std::move(y), {x}, [x, start, count](Tape& t, int self) {
    t.grad_ref(x).middleCols(start, count) += t.node_grad(self);
  });
}

Var gather_rows(const Var& x, std::shared_ptr<const std::vector<int>> idx) {
  const auto& ids = *idx;
  Matrix y(static_cast<Eigen::Index>(ids.size()), x.cols());
  const Matrix& xv = x.value();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require_shape(ids[r] >= 0 && ids[r] < xv.rows(), "gather_rows index");
    y.row(static_cast<Eigen::Index>(r)) = xv.row(ids[r]);
  }
  return x.tape().push(std::move(y), {x}, [x, idx](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < idx->size(); ++r) gx.row((*idx)[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var max_pool_rows(const Var& x, Eigen::Index group) {
  require_shape(group >= 1 && x.rows() % group == 0, "max_pool_rows");
  const Eigen::Index out_rows = x.rows() / group, c = x.cols();
  const Matrix& xv = x.value();
  Matrix y(out_rows, c);
  auto arg = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(out_rows * c));
  for (Eigen::Index o = 0; o < out_rows; ++o) {
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::Index best = o * group;
      for (Eigen::Index r = o * group + 1; r < (o + 1) * group; ++r) {
        if (xv(r, j) > xv(best, j)) best = r;
      }
      y(o, j) = xv(best, j);
      (*arg)[static_cast<std::size_t>(o * c + j)] = best;
    }
  }
  return x.tape().push(std::move(y), {x}, [x, arg, c](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    Matrix& gx = t.grad_ref(x);
    for (Eigen::Index o = 0; o < g.rows(); ++o)
      for (Eigen::Index j = 0; j < c; ++j) gx((*arg)[static_cast<std::size_t>(o * c + j)], j) += g(o, j);
  });
}

Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols) {
  require_shape(rows * cols == x.rows() * x.cols(), "reshape");
  Matrix y = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  const Eigen::Index r0 = x.rows(), c0 = x.cols();
  return x.tape().push(std::move(y), {x}, [x, r0, c0](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    t.grad_ref(x) += Eigen::Map<const Matrix>(g.data(), r0, c0);
  });
}

Var sinusoidal(const Var& x, int n_freq) {
  require_shape(n_freq >= 1, "sinusoidal");
  const Eigen::Index n = x.rows(), c = x.cols();
  Matrix y(n, c * 2 * n_freq);
  const Matrix& xv = x.value();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index col = 0; col < c; ++col) {
      for (int f = 0; f < n_freq; ++f) {
        const double w = std::ldexp(std::numbers::pi, f);
        y(r, (col * n_freq + f) * 2) = std::sin(w * xv(r, col));
        y(r, (col * n_freq + f) * 2 + 1) = std::cos(w * xv(r, col));
      }
    }
  }
  return x.tape().push(std::move(y), {x}, [x, n_freq](Tape& t, int self) {
    const Matrix& g = t.node_grad(self);
    const Matrix& xv = x.value();
    Matrix& gx = t.grad_ref(x);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      for (Eigen::Index col = 0; col < xv.cols(); ++col) {
        double acc = 0.0;
        for (int f = 0; f < n_freq; ++f) {
          const double w = std::ldexp(std::numbers::pi, f);
          acc += w * std::cos(w * xv(r, col)) * g(r, (col * n_freq + f) * 2);
          acc -= w * std::sin(w * xv(r, col)) * g(r, (col * n_freq + f) * 2 + 1);
        }
        gx(r, col) += acc;
      }
    }
  });
}

}  // namespace shapefill::ad
