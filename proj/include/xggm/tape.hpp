#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xggm/matrix.hpp"

namespace xggm {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
  const Matrix& value() const;
};

using GradMap = std::map<std::string, Matrix>;

/// Immediate-mode reverse-differentiation tape. Forward values are computed
/// eagerly as nodes are recorded; backward() replays the record once in
/// reverse order. One Tape per training step; not thread-safe.
class Tape {
 public:
  enum class Op {
    kParam,
    kConstant,
    kMatMul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kAddRowVec,
    kScale,
    kAddScalarConst,
    kSigmoid,
    kRelu,
    kLog,
    kReciprocal,
    kAbs,
    kMaxConst,
    kClampConst,
    kMeanAll,
    kSumAll,
    kSumSq,
    kMeanRows,
    kRowSums,
    kScaleRows,
    kScaleByScalar,
    kBroadcastScalar,
    kPackUpper,
    kUnpackUpper,
    kPerNodeLinear,
    kReshape,
  };

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    Op op;
    std::size_t in0 = kNone;
    std::size_t in1 = kNone;
    std::size_t in2 = kNone;
    double c0 = 0.0;
    double c1 = 0.0;
    Matrix val;
  };

  const Matrix& value(std::size_t id) const { return nodes_[id].val; }
  std::size_t num_nodes() const { return nodes_.size(); }

  /// Registers a named leaf parameter. backward() reports a gradient for every
  /// registered leaf, zero if the leaf does not reach the loss.
  Var param(const std::string& name, const Matrix& value) {
    if (params_.count(name)) throw ContractError("tape: duplicate parameter '" + name + "'");
    Var v = push(Op::kParam, kNone, kNone, value);
    params_.emplace(name, v.id);
    return v;
  }

  Var constant(Matrix value) { return push(Op::kConstant, kNone, kNone, std::move(value)); }

  Var matmul(Var a, Var b) {
    check(a), check(b);
    return push(Op::kMatMul, a.id, b.id, xggm::matmul(val(a), val(b)));
  }

  Var transpose(Var a) {
    check(a);
    return push(Op::kTranspose, a.id, kNone, xggm::transpose(val(a)));
  }

  Var add(Var a, Var b) {
    check(a), check(b);
    return push(Op::kAdd, a.id, b.id, xggm::add(val(a), val(b)));
  }

  Var sub(Var a, Var b) {
    check(a), check(b);
    return push(Op::kSub, a.id, b.id, xggm::sub(val(a), val(b)));
  }

  Var mul(Var a, Var b) {
    check(a), check(b);
    return push(Op::kMul, a.id, b.id, xggm::hadamard(val(a), val(b)));
  }

  /// m (n x d) plus a row vector v (1 x d) added to every row.
  Var add_rowvec(Var m, Var v) {
    check(m), check(v);
    const Matrix& mm = val(m);
    const Matrix& vv = val(v);
    if (vv.rows() != 1 || vv.cols() != mm.cols())
      throw DimensionError("add_rowvec: vector must be 1 x cols(m)");
    Matrix out = mm;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += vv(0, j);
    return push(Op::kAddRowVec, m.id, v.id, std::move(out));
  }

  Var scale(Var a, double c) {
    check(a);
    return push(Op::kScale, a.id, kNone, xggm::scale(val(a), c), c);
  }

  Var add_const(Var a, double c) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.at(k) += c;
    return push(Op::kAddScalarConst, a.id, kNone, std::move(out), c);
  }

  Var sigmoid(Var a) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.at(k) = sigmoid_scalar(out.at(k));
    return push(Op::kSigmoid, a.id, kNone, std::move(out));
  }

  Var relu(Var a) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.at(k) = out.at(k) > 0.0 ? out.at(k) : 0.0;
    return push(Op::kRelu, a.id, kNone, std::move(out));
  }

  Var log(Var a) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out.at(k) <= 0.0) throw NumericError("log: non-positive input");
      out.at(k) = std::log(out.at(k));
    }
    return push(Op::kLog, a.id, kNone, std::move(out));
  }

  Var reciprocal(Var a) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out.at(k) == 0.0) throw NumericError("reciprocal: zero input");
      out.at(k) = 1.0 / out.at(k);
    }
    return push(Op::kReciprocal, a.id, kNone, std::move(out));
  }

  Var abs(Var a) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.at(k) = std::abs(out.at(k));
    return push(Op::kAbs, a.id, kNone, std::move(out));
  }

  /// Elementwise max(a, c); gradient passes only where a > c.
  Var max_const(Var a, double c) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.at(k) = std::max(out.at(k), c);
    return push(Op::kMaxConst, a.id, kNone, std::move(out), c);
  }

  /// Elementwise clamp to [lo, hi]; gradient passes only strictly inside.
  Var clamp_const(Var a, double lo, double hi) {
    check(a);
    Matrix out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k)
      out.at(k) = std::min(std::max(out.at(k), lo), hi);
    return push(Op::kClampConst, a.id, kNone, std::move(out), lo, hi);
  }

  Var mean_all(Var a) {
    check(a);
    const Matrix& m = val(a);
    if (m.empty()) throw ContractError("mean_all: empty matrix");
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m.at(k);
    Matrix out(1, 1);
    out.at(0) = s / static_cast<double>(m.size());
    return push(Op::kMeanAll, a.id, kNone, std::move(out));
  }

  Var sum_all(Var a) {
    check(a);
    const Matrix& m = val(a);
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m.at(k);
    Matrix out(1, 1);
    out.at(0) = s;
    return push(Op::kSumAll, a.id, kNone, std::move(out));
  }

  Var sum_sq(Var a) {
    check(a);
    const Matrix& m = val(a);
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m.at(k) * m.at(k);
    Matrix out(1, 1);
    out.at(0) = s;
    return push(Op::kSumSq, a.id, kNone, std::move(out));
  }

  /// Column means: (n x d) -> (1 x d).
  Var mean_rows(Var a) {
    check(a);
    const Matrix& m = val(a);
    if (m.rows() == 0) throw ContractError("mean_rows: empty matrix");
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) /= static_cast<double>(m.rows());
    return push(Op::kMeanRows, a.id, kNone, std::move(out));
  }

  /// Per-row sums: (n x d) -> (n x 1).
  Var row_sums(Var a) {
    check(a);
    const Matrix& m = val(a);
    Matrix out(m.rows(), 1);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, 0) += m(i, j);
    return push(Op::kRowSums, a.id, kNone, std::move(out));
  }

  /// Multiplies row i of m by s(i, 0).
  Var scale_rows(Var m, Var s) {
    check(m), check(s);
    const Matrix& mm = val(m);
    const Matrix& ss = val(s);
    if (ss.cols() != 1 || ss.rows() != mm.rows())
      throw DimensionError("scale_rows: scaler must be rows(m) x 1");
    Matrix out = mm;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= ss(i, 0);
    return push(Op::kScaleRows, m.id, s.id, std::move(out));
  }

  Var scale_by_scalar(Var m, Var s) {
    check(m), check(s);
    if (!val(s).is_scalar()) throw DimensionError("scale_by_scalar: scaler must be 1x1");
    Matrix out = xggm::scale(val(m), val(s).scalar());
    return push(Op::kScaleByScalar, m.id, s.id, std::move(out));
  }

  Var broadcast_scalar(Var s, std::size_t rows, std::size_t cols) {
    check(s);
    if (!val(s).is_scalar()) throw DimensionError("broadcast_scalar: input must be 1x1");
    Matrix out(rows, cols, val(s).scalar());
    return push(Op::kBroadcastScalar, s.id, kNone, std::move(out), static_cast<double>(rows),
                static_cast<double>(cols));
  }

  Var pack_upper(Var r) {
    check(r);
    return push(Op::kPackUpper, r.id, kNone, xggm::pack_upper(val(r)));
  }

  Var unpack_upper(Var r, std::size_t n) {
    check(r);
    return push(Op::kUnpackUpper, r.id, kNone, xggm::unpack_upper(val(r), n),
                static_cast<double>(n));
  }

  /// Per-node linear map: row i of m (n x d) times the i-th d x d block of the
  /// stacked weight w ((n*d) x d), plus row i of b (n x d).
  Var per_node_linear(Var m, Var w, Var b) {
    check(m), check(w), check(b);
    const Matrix& mm = val(m);
    const Matrix& ww = val(w);
    const Matrix& bb = val(b);
    const std::size_t n = mm.rows(), d = mm.cols();
    if (ww.rows() != n * d || ww.cols() != d)
      throw DimensionError("per_node_linear: weight stack must be (n*d) x d");
    if (bb.rows() != n || bb.cols() != d)
      throw DimensionError("per_node_linear: bias must be n x d");
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = bb(i, j);
        for (std::size_t k = 0; k < d; ++k) acc += mm(i, k) * ww(i * d + k, j);
        out(i, j) = acc;
      }
    Var v = push(Op::kPerNodeLinear, m.id, w.id, std::move(out));
    nodes_[v.id].in2 = b.id;
    return v;
  }

  /// Row-major reshape preserving element count.
  Var reshape(Var a, std::size_t rows, std::size_t cols) {
    check(a);
    const Matrix& m = val(a);
    if (rows * cols != m.size()) throw DimensionError("reshape: element count mismatch");
    Matrix out(rows, cols);
    out.data() = m.data();
    return push(Op::kReshape, a.id, kNone, std::move(out), static_cast<double>(rows),
                static_cast<double>(cols));
  }

  /// Reverse pass from a scalar loss node. Returns gradients for every
  /// registered parameter, in name order; unused leaves get zero matrices.
  GradMap backward(Var loss) const {
    check(loss);
    if (!nodes_[loss.id].val.is_scalar()) throw ContractError("backward: loss is not scalar");

    std::vector<Matrix> adj(nodes_.size());
    adj[loss.id] = Matrix(1, 1, 1.0);

    for (std::size_t idx = loss.id + 1; idx-- > 0;) {
      const Node& nd = nodes_[idx];
      const Matrix& g = adj[idx];
      if (g.empty()) continue;
      accumulate(nd, g, adj);
    }

    GradMap grads;
    for (const auto& [name, id] : params_) {
      if (adj[id].empty())
        grads.emplace(name, Matrix(nodes_[id].val.rows(), nodes_[id].val.cols()));
      else
        grads.emplace(name, std::move(adj[id]));
    }
    return grads;
  }

  static double sigmoid_scalar(double x) {
    // Split form avoids overflow of exp for large |x|.
    if (x >= 0.0) {
      const double e = std::exp(-x);
      return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  Var push(Op op, std::size_t in0, std::size_t in1, Matrix val, double c0 = 0.0, double c1 = 0.0) {
    nodes_.push_back(Node{op, in0, in1, kNone, c0, c1, std::move(val)});
    return Var{this, nodes_.size() - 1};
  }

  const Matrix& val(Var v) const { return nodes_[v.id].val; }

  void check(Var v) const {
    if (v.tape != this) throw ContractError("tape: variable belongs to a different tape");
    if (v.id >= nodes_.size()) throw ContractError("tape: dangling variable");
  }

  static Matrix& adj_of(std::vector<Matrix>& adj, std::size_t id, const Matrix& like) {
    if (adj[id].empty()) adj[id] = Matrix(like.rows(), like.cols());
    return adj[id];
  }

  void accumulate(const Node& nd, const Matrix& g, std::vector<Matrix>& adj) const {
    switch (nd.op) {
      case Op::kParam:
      case Op::kConstant:
        break;
      case Op::kMatMul: {
        const Matrix& a = nodes_[nd.in0].val;
        const Matrix& b = nodes_[nd.in1].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        Matrix& db = adj_of(adj, nd.in1, b);
        // da += g * b^T
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < b.cols(); ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < a.cols(); ++k) da(i, k) += gij * b(k, j);
          }
        // db += a^T * g
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) db(k, j) += aik * g(i, j);
          }
        break;
      }
      case Op::kTranspose: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) da(j, i) += g(i, j);
        break;
      }
      case Op::kAdd: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        Matrix& db = adj_of(adj, nd.in1, nodes_[nd.in1].val);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k);
        for (std::size_t k = 0; k < g.size(); ++k) db.at(k) += g.at(k);
        break;
      }
      case Op::kSub: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        Matrix& db = adj_of(adj, nd.in1, nodes_[nd.in1].val);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k);
        for (std::size_t k = 0; k < g.size(); ++k) db.at(k) -= g.at(k);
        break;
      }
      case Op::kMul: {
        const Matrix& a = nodes_[nd.in0].val;
        const Matrix& b = nodes_[nd.in1].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        Matrix& db = adj_of(adj, nd.in1, b);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k) * b.at(k);
        for (std::size_t k = 0; k < g.size(); ++k) db.at(k) += g.at(k) * a.at(k);
        break;
      }
      case Op::kAddRowVec: {
        Matrix& dm = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        Matrix& dv = adj_of(adj, nd.in1, nodes_[nd.in1].val);
        for (std::size_t k = 0; k < g.size(); ++k) dm.at(k) += g.at(k);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) dv(0, j) += g(i, j);
        break;
      }
      case Op::kScale: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += nd.c0 * g.at(k);
        break;
      }
      case Op::kAddScalarConst: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k);
        break;
      }
      case Op::kSigmoid: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double y = nd.val.at(k);
          da.at(k) += g.at(k) * y * (1.0 - y);
        }
        break;
      }
      case Op::kRelu: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (a.at(k) > 0.0) da.at(k) += g.at(k);
        break;
      }
      case Op::kLog: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k) / a.at(k);
        break;
      }
      case Op::kReciprocal: {
        Matrix& da = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double y = nd.val.at(k);
          da.at(k) -= g.at(k) * y * y;
        }
        break;
      }
      case Op::kAbs: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (a.at(k) > 0.0)
            da.at(k) += g.at(k);
          else if (a.at(k) < 0.0)
            da.at(k) -= g.at(k);
        }
        break;
      }
      case Op::kMaxConst: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (a.at(k) > nd.c0) da.at(k) += g.at(k);
        break;
      }
      case Op::kClampConst: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (a.at(k) > nd.c0 && a.at(k) < nd.c1) da.at(k) += g.at(k);
        break;
      }
      case Op::kMeanAll: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        const double s = g.scalar() / static_cast<double>(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) da.at(k) += s;
        break;
      }
      case Op::kSumAll: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        const double s = g.scalar();
        for (std::size_t k = 0; k < a.size(); ++k) da.at(k) += s;
        break;
      }
      case Op::kSumSq: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        const double s = 2.0 * g.scalar();
        for (std::size_t k = 0; k < a.size(); ++k) da.at(k) += s * a.at(k);
        break;
      }
      case Op::kMeanRows: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        const double inv = 1.0 / static_cast<double>(a.rows());
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) da(i, j) += g(0, j) * inv;
        break;
      }
      case Op::kRowSums: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) da(i, j) += g(i, 0);
        break;
      }
      case Op::kScaleRows: {
        const Matrix& m = nodes_[nd.in0].val;
        const Matrix& s = nodes_[nd.in1].val;
        Matrix& dm = adj_of(adj, nd.in0, m);
        Matrix& ds = adj_of(adj, nd.in1, s);
        for (std::size_t i = 0; i < m.rows(); ++i)
          for (std::size_t j = 0; j < m.cols(); ++j) {
            dm(i, j) += g(i, j) * s(i, 0);
            ds(i, 0) += g(i, j) * m(i, j);
          }
        break;
      }
      case Op::kScaleByScalar: {
        const Matrix& m = nodes_[nd.in0].val;
        const double s = nodes_[nd.in1].val.scalar();
        Matrix& dm = adj_of(adj, nd.in0, m);
        Matrix& ds = adj_of(adj, nd.in1, nodes_[nd.in1].val);
        for (std::size_t k = 0; k < g.size(); ++k) {
          dm.at(k) += g.at(k) * s;
          ds.at(0) += g.at(k) * m.at(k);
        }
        break;
      }
      case Op::kBroadcastScalar: {
        Matrix& ds = adj_of(adj, nd.in0, nodes_[nd.in0].val);
        for (std::size_t k = 0; k < g.size(); ++k) ds.at(0) += g.at(k);
        break;
      }
      case Op::kPackUpper: {
        const Matrix& r = nodes_[nd.in0].val;
        Matrix& dr = adj_of(adj, nd.in0, r);
        std::size_t k = 0;
        for (std::size_t i = 0; i < r.rows(); ++i)
          for (std::size_t j = i + 1; j < r.cols(); ++j) dr(i, j) += g.at(k++);
        break;
      }
      case Op::kUnpackUpper: {
        const Matrix& r = nodes_[nd.in0].val;
        Matrix& dr = adj_of(adj, nd.in0, r);
        const std::size_t n = static_cast<std::size_t>(nd.c0);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) {
            dr.at(k) += g(i, j) + g(j, i);
            ++k;
          }
        break;
      }
      case Op::kPerNodeLinear: {
        const Matrix& m = nodes_[nd.in0].val;
        const Matrix& w = nodes_[nd.in1].val;
        Matrix& dm = adj_of(adj, nd.in0, m);
        Matrix& dw = adj_of(adj, nd.in1, w);
        Matrix& db = adj_of(adj, nd.in2, nodes_[nd.in2].val);
        const std::size_t n = m.rows(), d = m.cols();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            db(i, j) += gij;
            for (std::size_t k = 0; k < d; ++k) {
              dm(i, k) += gij * w(i * d + k, j);
              dw(i * d + k, j) += gij * m(i, k);
            }
          }
        break;
      }
      case Op::kReshape: {
        const Matrix& a = nodes_[nd.in0].val;
        Matrix& da = adj_of(adj, nd.in0, a);
        for (std::size_t k = 0; k < g.size(); ++k) da.at(k) += g.at(k);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;

  friend struct Var;
};

inline const Matrix& Var::value() const { return tape->value(id); }

}  // namespace xggm
