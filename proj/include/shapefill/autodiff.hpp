// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "shapefill/memtrack.hpp"

// Minimal matrix-valued reverse-mode differentiation.
//
// A Tape records every operation in creation order, which is already a
// topological order, so backward() is a single reverse sweep. Values and
// gradients are dense row-major double matrices; their sizes are registered
// with memtrack for the lifetime of the tape.
namespace shapefill::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // A tape that does not record keeps values only; backward() is unavailable.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // Differentiable input (model parameter).
  Var leaf(Matrix value);

  const Matrix& value(const Var& v) const { return nodes_[v.id_].value; }
  // Gradient accumulated by backward(); a zero matrix if the node received none.
  Matrix grad(const Var& v) const;

  // Seeds d(out) = seed and propagates to every leaf.
  void backward(const Var& out, const Matrix& seed);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t tracked_bytes() const { return lease_.bytes(); }

  // Op construction interface.
  using BackwardFn = std::function<void(Tape&, int)>;
  Var push(Matrix value, const std::vector<Var>& parents, BackwardFn fn);
  bool needs_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  const Matrix& node_value(int id) const { return nodes_[id].value; }
  const Matrix& node_grad(int id) const { return nodes_[id].grad; }
  // Gradient buffer of `v`, zero-initialized on first use.
  Matrix& grad_ref(const Var& v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  memtrack::Lease lease_;
  bool record_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// y = a b
Var matmul(const Var& a, const Var& b);
// y = a b^T
Var matmul_nt(const Var& a, const Var& b);
// y = x w + 1 b^T, b is 1 x cols
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Adds the 1 x c row `b` to every row of x.
Var add_row(const Var& x, const Var& b);
Var scale(const Var& x, double s);
Var relu(const Var& x);
// Row-wise normalization with learned gain and bias (both 1 x c).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var softmax_rows(const Var& x);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
// Row r of the result is row idx[r] of x.
Var gather_rows(const Var& x, std::shared_ptr<const std::vector<int>> idx);
// Column-wise maximum over consecutive blocks of `group` rows.
Var max_pool_rows(const Var& x, Eigen::Index group);
// Row-major reshape.
Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols);
// Per-column sin/cos features: for every column c and frequency f < n_freq,
// sin(2^f pi x_c) then cos(2^f pi x_c). Output has cols * 2 * n_freq columns.
Var sinusoidal(const Var& x, int n_freq);

}  // namespace shapefill::ad
