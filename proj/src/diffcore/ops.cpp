#include "laser/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "laser/error.hpp"

namespace laser::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
  return a.tape();
}

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols() && a.rank() >= 1) return Broadcast::row;
  throw DimensionError(std::string(op) + ": cannot combine " + shape_string(a.shape()) +
                       " with " + shape_string(b.shape()));
}

inline std::size_t rhs_index(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::same:
      return i;
    case Broadcast::row:
      return i % cols;
    case Broadcast::scalar:
      return 0;
  }
  return 0;
}

// Accumulates an output-shaped gradient into a possibly broadcast operand.
void accumulate_broadcast(Tape& t, std::size_t target, Broadcast kind, const Tensor& g, double sign) {
  Tensor& dst = t.grad_buffer(target);
  const std::size_t cols = g.cols();
  for (std::size_t i = 0; i < g.size(); ++i) dst[rhs_index(kind, i, cols)] += sign * g[i];
}

template <typename F, typename DF>
Var unary(Var a, const char* op, F f, DF df) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const std::size_t pa = a.id();
  return a.tape().record(
      std::move(out), {pa},
      [pa, df](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        const Tensor& x = t.value(pa);
        const Tensor& y = t.value(self);
        Tensor& dx = t.grad_buffer(pa);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * df(x[i], y[i]);
      },
      op);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rank() > 2 || w.rank() != 2 || x.cols() != w.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(x.shape()) + " by " +
                         shape_string(w.shape()));
  }
  Tensor out({x.rows(), w.cols()});
  as_matrix(out).noalias() = as_matrix(x) * as_matrix(w);
  const std::size_t pa = a.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {pa, pb},
      [pa, pb](Tape& t, std::size_t self) {
        auto g = as_matrix(t.grad_of(self));
        if (t.requires_grad(pa)) {
          as_matrix(t.grad_buffer(pa)).noalias() += g * as_matrix(t.value(pb)).transpose();
        }
        if (t.requires_grad(pb)) {
          as_matrix(t.grad_buffer(pb)).noalias() += as_matrix(t.value(pa)).transpose() * g;
        }
      },
      "matmul");
}

Var linear(Var x, Var w, Var b) {
  Tape& tape = same_tape(x, w, "linear");
  same_tape(x, b, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() > 2 || wv.rank() != 2 || xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw DimensionError("linear: incompatible shapes " + shape_string(xv.shape()) + ", " + shape_string(wv.shape()) +
                         ", " + shape_string(bv.shape()));
  }
  Tensor out({xv.rows(), wv.cols()});
  auto o = as_matrix(out);
  o.noalias() = as_matrix(xv) * as_matrix(wv);
  o.rowwise() += as_matrix(bv).row(0);
  const std::size_t px = x.id();
  const std::size_t pw = w.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {px, pw, pb},
      [px, pw, pb](Tape& t, std::size_t self) {
        auto g = as_matrix(t.grad_of(self));
        if (t.requires_grad(px)) as_matrix(t.grad_buffer(px)).noalias() += g * as_matrix(t.value(pw)).transpose();
        if (t.requires_grad(pw)) as_matrix(t.grad_buffer(pw)).noalias() += as_matrix(t.value(px)).transpose() * g;
        if (t.requires_grad(pb)) {
          // Row-by-row accumulation keeps the summation order independent of
          // buffer alignment, unlike Eigen's vectorised reductions.
          Tensor& db = t.grad_buffer(pb);
          const std::size_t n = static_cast<std::size_t>(g.rows());
          const std::size_t m = static_cast<std::size_t>(g.cols());
          const double* gd = g.data();
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < m; ++c) db[c] += gd[r * m + c];
          }
        }
      },
      "linear");
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "add");
  Tensor out = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[rhs_index(kind, i, cols)];
  const std::size_t pa = a.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {pa, pb},
      [pa, pb, kind](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        if (t.requires_grad(pa)) {
          Tensor& dx = t.grad_buffer(pa);
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (t.requires_grad(pb)) {
          accumulate_broadcast(t, pb, kind, g, 1.0);
        }
      },
      "add");
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "sub");
  Tensor out = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[rhs_index(kind, i, cols)];
  const std::size_t pa = a.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {pa, pb},
      [pa, pb, kind](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        if (t.requires_grad(pa)) {
          Tensor& dx = t.grad_buffer(pa);
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (t.requires_grad(pb)) {
          accumulate_broadcast(t, pb, kind, g, -1.0);
        }
      },
      "sub");
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "mul");
  Tensor out = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[rhs_index(kind, i, cols)];
  const std::size_t pa = a.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {pa, pb},
      [pa, pb, kind](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        const Tensor& x = t.value(pa);
        const Tensor& y = t.value(pb);
        const std::size_t cols = x.cols();
        if (t.requires_grad(pa)) {
          Tensor& dx = t.grad_buffer(pa);
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[rhs_index(kind, i, cols)];
        }
        if (t.requires_grad(pb)) {
          Tensor& dy = t.grad_buffer(pb);
          for (std::size_t i = 0; i < g.size(); ++i) dy[rhs_index(kind, i, cols)] += g[i] * x[i];
        }
      },
      "mul");
}

Var minimum(Var a, Var b) {
  Tape& tape = same_tape(a, b, "minimum");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) {
    throw DimensionError("minimum: shapes " + shape_string(x.shape()) + " and " +
                         shape_string(y.shape()) + " differ");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x[i], y[i]);
  const std::size_t pa = a.id();
  const std::size_t pb = b.id();
  return tape.record(
      std::move(out), {pa, pb},
      [pa, pb](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        const Tensor& x = t.value(pa);
        const Tensor& y = t.value(pb);
        // Ties route the gradient to the left operand.
        if (t.requires_grad(pa)) {
          Tensor& dx = t.grad_buffer(pa);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] <= y[i]) dx[i] += g[i];
          }
        }
        if (t.requires_grad(pb)) {
          Tensor& dy = t.grad_buffer(pb);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > y[i]) dy[i] += g[i];
          }
        }
      },
      "minimum");
}

Var scale(Var a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, "add_scalar", [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var neg(Var a) {
  return unary(
      a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  as_matrix(out) = as_matrix(x).cwiseMax(0.0);
  const std::size_t pa = a.id();
  return a.tape().record(
      std::move(out), {pa},
      [pa](Tape& t, std::size_t self) {
        auto y = as_matrix(t.value(self)).array();
        as_matrix(t.grad_buffer(pa)).array() += (y > 0.0).select(as_matrix(t.grad_of(self)).array(), 0.0);
      },
      "relu");
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lower bound exceeds upper bound");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data()) total += v;
  const std::size_t pa = a.id();
  return a.tape().record(
      Tensor::scalar(total), {pa},
      [pa](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        Tensor& dx = t.grad_buffer(pa);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
      },
      "sum");
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  const Tensor& x = a.value();
  Tensor out({x.rows(), 1});
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += x[r * cols + c];
    out[r] = acc;
  }
  const std::size_t pa = a.id();
  return a.tape().record(
      std::move(out), {pa},
      [pa](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_of(self);
        Tensor& dx = t.grad_buffer(pa);
        const std::size_t cols = dx.cols();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i / cols];
      },
      "row_sum");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  Tape& tape = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> parents;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (&p.tape() != &tape) throw ContractError("concat_cols: operands on different tapes");
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: row count mismatch " + shape_string(p.value().shape()));
    }
    parents.push_back(p.id());
    offsets.push_back(cols);
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  auto dst = as_matrix(out);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    dst.block(0, static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(rows),
              static_cast<Eigen::Index>(src.cols())) = as_matrix(src);
  }
  std::vector<std::size_t> ids = parents;
  return tape.record(
      std::move(out), std::move(parents),
      [ids, offsets, rows](Tape& t, std::size_t self) {
        auto g = as_matrix(t.grad_of(self));
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& dx = t.grad_buffer(ids[k]);
          as_matrix(dx) += g.block(0, static_cast<Eigen::Index>(offsets[k]),
                                   static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dx.cols()));
        }
      },
      "concat_cols");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin >= end || end > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t rows = x.rows();
  const std::size_t width = end - begin;
  Tensor out({rows, width});
  as_matrix(out) = as_matrix(x).block(0, static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(width));
  const std::size_t pa = a.id();
  return a.tape().record(
      std::move(out), {pa},
      [pa, begin, rows, width](Tape& t, std::size_t self) {
        auto g = as_matrix(t.grad_of(self));
        as_matrix(t.grad_buffer(pa))
            .block(0, static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(width)) += g;
      },
      "slice_cols");
}

}  // namespace laser::diff
