#ifndef HEXWALL_SOLVER_HPP
#define HEXWALL_SOLVER_HPP

// Sparse symmetric systems with 3x3 node blocks, Dirichlet elimination, a
// direct LDLT path and preconditioned conjugate gradients. The multigrid
// preconditioner coarsens a structured (axial, angular, depth) node lattice in
// the two in-surface directions only and smooths with symmetric block
// Gauss-Seidel over through-thickness columns.

#include "hexwall/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hexwall {

using Vec = Eigen::VectorXd;

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : Error("solver", what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Square block-sparse matrix with 3x3 blocks stored row-major. The block
/// pattern is structurally symmetric and column indices are sorted per row.
struct BlockSparse {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<int> diag;
  std::vector<double> val;

  std::size_t blocks() const { return col.size(); }
  int dofs() const { return 3 * n; }

  int find(int r, int c) const {
    const auto first = col.begin() + row_ptr[r], last = col.begin() + row_ptr[r + 1];
    const auto it = std::lower_bound(first, last, c);
    return it != last && *it == c ? static_cast<int>(it - col.begin()) : -1;
  }
  double* block(int idx) { return val.data() + 9 * static_cast<std::size_t>(idx); }
  const double* block(int idx) const { return val.data() + 9 * static_cast<std::size_t>(idx); }

  void multiply(const Vec& x, Vec& y) const {
    y.resize(3 * n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t r) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (int b = row_ptr[r]; b < row_ptr[r + 1]; ++b) {
        const double* m = block(b);
        const double* xv = x.data() + 3 * col[b];
        s0 += m[0] * xv[0] + m[1] * xv[1] + m[2] * xv[2];
        s1 += m[3] * xv[0] + m[4] * xv[1] + m[5] * xv[2];
        s2 += m[6] * xv[0] + m[7] * xv[1] + m[8] * xv[2];
      }
      y[3 * r] = s0;
      y[3 * r + 1] = s1;
      y[3 * r + 2] = s2;
    });
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(9 * blocks());
    for (int r = 0; r < n; ++r)
      for (int b = row_ptr[r]; b < row_ptr[r + 1]; ++b)
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q)
            if (const double v = block(b)[3 * p + q]; v != 0.0) t.emplace_back(3 * r + p, 3 * col[b] + q, v);
    Eigen::SparseMatrix<double> m(3 * n, 3 * n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  /// Pattern with one block per pair of nodes that share a row in `adjacency`
  /// (each list must contain the row node itself).
  static BlockSparse from_adjacency(std::vector<std::vector<int>> adjacency) {
    BlockSparse m;
    m.n = static_cast<int>(adjacency.size());
    m.row_ptr.assign(m.n + 1, 0);
    for (int r = 0; r < m.n; ++r) {
      auto& a = adjacency[r];
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
      m.row_ptr[r + 1] = m.row_ptr[r] + static_cast<int>(a.size());
    }
    m.col.reserve(m.row_ptr.back());
    for (auto& a : adjacency) {
      m.col.insert(m.col.end(), a.begin(), a.end());
      std::vector<int>().swap(a);
    }
    m.val.assign(9 * m.col.size(), 0.0);
    m.diag.resize(m.n);
    for (int r = 0; r < m.n; ++r) {
      m.diag[r] = m.find(r, r);
      if (m.diag[r] < 0) throw SolverError("block pattern lacks a diagonal block at node " + std::to_string(r));
    }
    return m;
  }
};

/// Prescribed displacement components. `mask[v]` has bit c set when component c
/// of node v is prescribed to `value[3v+c]`.
struct Constraints {
  std::vector<unsigned char> mask;
  std::vector<double> value;

  explicit Constraints(std::size_t nodes = 0) : mask(nodes, 0), value(3 * nodes, 0.0) {}
  void fix(int v, int component, double u = 0.0) {
    mask[v] |= static_cast<unsigned char>(1u << component);
    value[3 * static_cast<std::size_t>(v) + component] = u;
  }
  void fix_node(int v) {
    for (int c = 0; c < 3; ++c) fix(v, c);
  }
  bool fixed(int dof) const { return (mask[dof / 3] >> (dof % 3)) & 1u; }
  std::size_t count() const {
    std::size_t n = 0;
    for (unsigned char m : mask) n += static_cast<std::size_t>(__builtin_popcount(m));
    return n;
  }
};

/// Original stiffness rows of constrained nodes, kept for reaction recovery.
struct ConstrainedRows {
  std::vector<int> nodes;
  std::vector<std::vector<int>> cols;
  std::vector<std::vector<double>> vals;
};

/// Eliminates prescribed dofs in place: their rows and columns become identity
/// and the right-hand side absorbs the prescribed values. Returns the original
/// rows of every constrained node.
inline ConstrainedRows apply_constraints(BlockSparse& A, Vec& rhs, const Constraints& c) {
  ConstrainedRows saved;
  for (int v = 0; v < A.n; ++v) {
    if (!c.mask[v]) continue;
    saved.nodes.push_back(v);
    saved.cols.emplace_back(A.col.begin() + A.row_ptr[v], A.col.begin() + A.row_ptr[v + 1]);
    saved.vals.emplace_back(A.val.begin() + 9 * A.row_ptr[v], A.val.begin() + 9 * A.row_ptr[v + 1]);
  }
  for (int v : saved.nodes) {
    for (int comp = 0; comp < 3; ++comp) {
      if (!((c.mask[v] >> comp) & 1u)) continue;
      const double u = c.value[3 * static_cast<std::size_t>(v) + comp];
      for (int b = A.row_ptr[v]; b < A.row_ptr[v + 1]; ++b) {
        const int r = A.col[b];
        double* m = A.block(A.find(r, v));
        for (int p = 0; p < 3; ++p) {
          rhs[3 * r + p] -= m[3 * p + comp] * u;
          m[3 * p + comp] = 0.0;
        }
      }
    }
  }
  for (int v : saved.nodes)
    for (int comp = 0; comp < 3; ++comp) {
      if (!((c.mask[v] >> comp) & 1u)) continue;
      for (int b = A.row_ptr[v]; b < A.row_ptr[v + 1]; ++b)
        for (int q = 0; q < 3; ++q) A.block(b)[3 * comp + q] = 0.0;
      A.block(A.diag[v])[4 * comp] = 1.0;
      rhs[3 * v + comp] = c.value[3 * static_cast<std::size_t>(v) + comp];
    }
  return saved;
}

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const Vec& r, Vec& z) const = 0;
  virtual std::string name() const = 0;
};

class JacobiPreconditioner : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const BlockSparse& A) : inv_(3 * A.n) {
    for (int v = 0; v < A.n; ++v)
      for (int c = 0; c < 3; ++c) {
        const double d = A.block(A.diag[v])[4 * c];
        if (!(d > 0.0)) throw SolverError("non-positive diagonal at dof " + std::to_string(3 * v + c));
        inv_[3 * v + c] = 1.0 / d;
      }
  }
  void apply(const Vec& r, Vec& z) const override { z = inv_.cwiseProduct(r); }
  std::string name() const override { return "jacobi"; }

 private:
  Vec inv_;
};

namespace detail {

/// Dense Cholesky factors of the diagonal sub-blocks of A over node groups.
struct GroupFactors {
  std::vector<std::vector<int>> groups;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt;

  void factor(const BlockSparse& A, std::vector<std::vector<int>> g) {
    groups = std::move(g);
    llt.resize(groups.size());
    parallel_for(groups.size(), [&](std::size_t k) {
      const auto& nodes = groups[k];
      const int m = static_cast<int>(nodes.size());
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3 * m, 3 * m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          const int idx = A.find(nodes[a], nodes[b]);
          if (idx < 0) continue;
          for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) D(3 * a + p, 3 * b + q) = A.block(idx)[3 * p + q];
        }
      llt[k].compute(D);
    });
    for (std::size_t k = 0; k < groups.size(); ++k)
      if (llt[k].info() != Eigen::Success)
        throw SolverError("diagonal block of node group " + std::to_string(k) + " is not positive definite");
  }

  /// One block Gauss-Seidel step on group k: solves the group rows of A x = b
  /// for the group unknowns with all other unknowns frozen.
  void relax(const BlockSparse& A, const Vec& b, Vec& x, std::size_t k) const {
    const auto& nodes = groups[k];
    const int m = static_cast<int>(nodes.size());
    Eigen::VectorXd r(3 * m);
    for (int a = 0; a < m; ++a) {
      const int v = nodes[a];
      double s0 = b[3 * v], s1 = b[3 * v + 1], s2 = b[3 * v + 2];
      for (int idx = A.row_ptr[v]; idx < A.row_ptr[v + 1]; ++idx) {
        const double* blk = A.block(idx);
        const double* xv = x.data() + 3 * A.col[idx];
        s0 -= blk[0] * xv[0] + blk[1] * xv[1] + blk[2] * xv[2];
        s1 -= blk[3] * xv[0] + blk[4] * xv[1] + blk[5] * xv[2];
        s2 -= blk[6] * xv[0] + blk[7] * xv[1] + blk[8] * xv[2];
      }
      r[3 * a] = s0, r[3 * a + 1] = s1, r[3 * a + 2] = s2;
    }
    const Eigen::VectorXd d = llt[k].solve(r);
    for (int a = 0; a < m; ++a)
      for (int p = 0; p < 3; ++p) x[3 * nodes[a] + p] += d[3 * a + p];
  }
};

}  // namespace detail

/// Block Jacobi over node groups (through-thickness columns when a lattice is known).
class BlockJacobiPreconditioner : public Preconditioner {
 public:
  BlockJacobiPreconditioner(const BlockSparse& A, std::vector<std::vector<int>> groups) {
    f_.factor(A, std::move(groups));
  }
  void apply(const Vec& r, Vec& z) const override {
    z.setZero(r.size());
    parallel_for(f_.groups.size(), [&](std::size_t k) {
      const auto& nodes = f_.groups[k];
      Eigen::VectorXd rr(3 * nodes.size());
      for (std::size_t a = 0; a < nodes.size(); ++a) rr.segment<3>(3 * a) = r.segment<3>(3 * nodes[a]);
      const Eigen::VectorXd d = f_.llt[k].solve(rr);
      for (std::size_t a = 0; a < nodes.size(); ++a) z.segment<3>(3 * nodes[a]) = d.segment<3>(3 * a);
    });
  }
  std::string name() const override { return "block_jacobi"; }

 private:
  detail::GroupFactors f_;
};

/// Structured node lattice: node(j, i, r) for axial index j, angular index i
/// (periodic when `periodic`) and depth index r. Every matrix node must appear
/// exactly once.
struct NodeLattice {
  int n_j = 0, n_i = 0, n_r = 0;
  bool periodic = true;
  std::vector<int> node_of;  // lattice slot (j * n_i + i) * n_r + r -> node id

  bool empty() const { return node_of.empty(); }
  int slot(int j, int i, int r) const { return (j * n_i + i) * n_r + r; }

  std::vector<std::vector<int>> columns() const {
    std::vector<std::vector<int>> cols(static_cast<std::size_t>(n_j) * n_i);
    for (int c = 0; c < n_j * n_i; ++c)
      for (int r = 0; r < n_r; ++r) cols[c].push_back(node_of[static_cast<std::size_t>(c) * n_r + r]);
    return cols;
  }
};

struct SolverOptions {
  enum class Method { Auto, Direct, Pcg };
  enum class Precond { Multigrid, BlockJacobi, Jacobi };
  Method method = Method::Auto;
  Precond preconditioner = Precond::Multigrid;
  double rel_tol = 1e-9;
  int max_iterations = 5000;
  int direct_max_dofs = 60000;
  int coarse_max_nodes = 4000;
  int smoothing_sweeps = 1;
};

/// Geometric multigrid V-cycle over a NodeLattice hierarchy. Coarse levels
/// halve the axial and angular resolution (keeping every other index plus the
/// last axial one) with bilinear interpolation; Galerkin coarse operators; the
/// coarsest level is factorised directly.
class LatticeMultigrid : public Preconditioner {
 public:
  LatticeMultigrid(const BlockSparse& A, const NodeLattice& lat, const Constraints& c, const SolverOptions& opt)
      : sweeps_(opt.smoothing_sweeps) {
    levels_.push_back(Level{});
    levels_[0].A = &A;
    levels_[0].lat = lat;
    levels_[0].smoother.factor(A, lat.columns());
    std::vector<char> dead(A.n, 0);
    for (int v = 0; v < A.n; ++v) dead[v] = c.mask[v] != 0;
    while (true) {
      Level& f = levels_.back();
      if (f.A->n <= opt.coarse_max_nodes) break;
      auto next = coarsen(f, dead);
      if (!next) break;
      levels_.push_back(std::move(*next));
      Level& cl = levels_.back();
      cl.A = cl.owned.get();
      dead.assign(cl.A->n, 0);
      if (cl.A->n > opt.coarse_max_nodes) cl.smoother.factor(*cl.A, cl.lat.columns());
    }
    const BlockSparse& coarsest = *levels_.back().A;
    coarse_.compute(coarsest.to_eigen());
    if (coarse_.info() != Eigen::Success) throw SolverError("multigrid coarse factorisation failed");
  }

  void apply(const Vec& r, Vec& z) const override { vcycle(0, r, z); }
  std::string name() const override { return "multigrid(" + std::to_string(levels_.size()) + " levels)"; }
  std::size_t level_count() const { return levels_.size(); }

 private:
  struct Level {
    const BlockSparse* A = nullptr;
    std::unique_ptr<BlockSparse> owned;
    NodeLattice lat;
    detail::GroupFactors smoother;
    // Interpolation from the next coarser level: per fine node, up to 4 (coarse node, weight).
    std::vector<std::array<std::pair<int, double>, 4>> P;
    std::vector<int> P_len;
  };

  static std::vector<int> coarse_indices(int n, bool periodic) {
    std::vector<int> keep;
    for (int k = 0; k < n; k += 2) keep.push_back(k);
    if (!periodic && keep.back() != n - 1) keep.push_back(n - 1);
    return keep;
  }

  /// Fine index -> up to two (coarse index, weight) pairs.
  static std::vector<std::vector<std::pair<int, double>>> interp_1d(int n, bool periodic, bool coarsen) {
    std::vector<std::vector<std::pair<int, double>>> w(n);
    if (!coarsen) {
      for (int k = 0; k < n; ++k) w[k] = {{k, 1.0}};
      return w;
    }
    const auto keep = coarse_indices(n, periodic);
    std::vector<int> pos(n, -1);
    for (std::size_t c = 0; c < keep.size(); ++c) pos[keep[c]] = static_cast<int>(c);
    const int nc = static_cast<int>(keep.size());
    for (int k = 0; k < n; ++k) {
      if (pos[k] >= 0) {
        w[k] = {{pos[k], 1.0}};
        continue;
      }
      const int lo = pos[k - 1];
      const int hi = periodic ? (lo + 1) % nc : lo + 1;
      const int klo = keep[lo];
      const int khi = periodic && hi == 0 ? n : keep[hi];
      const double t = static_cast<double>(k - klo) / (khi - klo);
      w[k] = {{lo, 1.0 - t}, {hi, t}};
    }
    return w;
  }

  static std::optional<Level> coarsen(Level& f, const std::vector<char>& dead) {
    const NodeLattice& L = f.lat;
    const bool cj = L.n_j > 4;
    const bool ci = L.n_i >= 8 && (!L.periodic || L.n_i % 2 == 0);
    if (!cj && !ci) return std::nullopt;
    const auto wj = interp_1d(L.n_j, false, cj);
    const auto wi = interp_1d(L.n_i, L.periodic, ci);
    Level c;
    c.lat.n_j = cj ? static_cast<int>(coarse_indices(L.n_j, false).size()) : L.n_j;
    c.lat.n_i = ci ? static_cast<int>(coarse_indices(L.n_i, L.periodic).size()) : L.n_i;
    c.lat.n_r = L.n_r;
    c.lat.periodic = L.periodic;
    const int nc = c.lat.n_j * c.lat.n_i * c.lat.n_r;
    c.lat.node_of.resize(nc);
    std::iota(c.lat.node_of.begin(), c.lat.node_of.end(), 0);

    const BlockSparse& A = *f.A;
    f.P.assign(A.n, {});
    f.P_len.assign(A.n, 0);
    for (int j = 0; j < L.n_j; ++j)
      for (int i = 0; i < L.n_i; ++i)
        for (int r = 0; r < L.n_r; ++r) {
          const int v = L.node_of[L.slot(j, i, r)];
          if (dead[v]) continue;
          for (const auto& [jc, a] : wj[j])
            for (const auto& [ic, b] : wi[i]) f.P[v][f.P_len[v]++] = {c.lat.slot(jc, ic, r), a * b};
        }
    // Restriction lists (transpose of P), in ascending fine order for determinism.
    std::vector<std::vector<std::pair<int, double>>> R(nc);
    for (int v = 0; v < A.n; ++v)
      for (int k = 0; k < f.P_len[v]; ++k) R[f.P[v][k].first].emplace_back(v, f.P[v][k].second);

    auto Ac = std::make_unique<BlockSparse>();
    Ac->n = nc;
    Ac->row_ptr.assign(nc + 1, 0);
    std::vector<std::vector<int>> row_cols(nc);
    std::vector<std::vector<double>> row_vals(nc);
    parallel_for(static_cast<std::size_t>(nc), [&](std::size_t I) {
      std::vector<int> cols;
      std::vector<double> vals;
      std::vector<std::pair<int, int>> where;  // (coarse col, slot)
      for (const auto& [a, w] : R[I])
        for (int idx = A.row_ptr[a]; idx < A.row_ptr[a + 1]; ++idx) {
          const int b = A.col[idx];
          for (int k = 0; k < f.P_len[b]; ++k) {
            const auto [J, w2] = f.P[b][k];
            auto it = std::find_if(where.begin(), where.end(), [J = J](const auto& p) { return p.first == J; });
            int s;
            if (it == where.end()) {
              s = static_cast<int>(cols.size());
              where.emplace_back(J, s);
              cols.push_back(J);
              vals.resize(vals.size() + 9, 0.0);
            } else {
              s = it->second;
            }
            const double ww = w * w2;
            const double* blk = A.block(idx);
            for (int q = 0; q < 9; ++q) vals[9 * s + q] += ww * blk[q];
          }
        }
      if (std::find(cols.begin(), cols.end(), static_cast<int>(I)) == cols.end()) {
        cols.push_back(static_cast<int>(I));
        vals.resize(vals.size() + 9, 0.0);
      }
      std::vector<int> order(cols.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int x, int y) { return cols[x] < cols[y]; });
      row_cols[I].reserve(cols.size());
      row_vals[I].reserve(vals.size());
      for (int o : order) {
        row_cols[I].push_back(cols[o]);
        row_vals[I].insert(row_vals[I].end(), vals.begin() + 9 * o, vals.begin() + 9 * o + 9);
      }
    });
    for (int I = 0; I < nc; ++I) Ac->row_ptr[I + 1] = Ac->row_ptr[I] + static_cast<int>(row_cols[I].size());
    Ac->col.reserve(Ac->row_ptr.back());
    Ac->val.reserve(9 * static_cast<std::size_t>(Ac->row_ptr.back()));
    for (int I = 0; I < nc; ++I) {
      Ac->col.insert(Ac->col.end(), row_cols[I].begin(), row_cols[I].end());
      Ac->val.insert(Ac->val.end(), row_vals[I].begin(), row_vals[I].end());
    }
    Ac->diag.resize(nc);
    for (int I = 0; I < nc; ++I) {
      Ac->diag[I] = Ac->find(I, I);
      // Coarse dofs that no free fine dof interpolates from get an identity row.
      double* d = Ac->block(Ac->diag[I]);
      for (int p = 0; p < 3; ++p)
        if (d[4 * p] == 0.0) d[4 * p] = 1.0;
    }
    c.owned = std::move(Ac);
    return c;
  }

  void smooth(const Level& l, const Vec& b, Vec& x) const {
    const std::size_t ng = l.smoother.groups.size();
    for (int s = 0; s < sweeps_; ++s) {
      for (std::size_t k = 0; k < ng; ++k) l.smoother.relax(*l.A, b, x, k);
      for (std::size_t k = ng; k-- > 0;) l.smoother.relax(*l.A, b, x, k);
    }
  }

  void vcycle(std::size_t li, const Vec& b, Vec& x) const {
    const Level& l = levels_[li];
    if (li + 1 == levels_.size()) {
      x = coarse_.solve(b);
      return;
    }
    x.setZero(b.size());
    smooth(l, b, x);
    Vec Ax;
    l.A->multiply(x, Ax);
    const Vec r = b - Ax;
    const Level& c = levels_[li + 1];
    Vec bc = Vec::Zero(3 * c.A->n);
    for (int v = 0; v < l.A->n; ++v)
      for (int k = 0; k < l.P_len[v]; ++k) bc.segment<3>(3 * l.P[v][k].first) += l.P[v][k].second * r.segment<3>(3 * v);
    Vec xc;
    vcycle(li + 1, bc, xc);
    for (int v = 0; v < l.A->n; ++v)
      for (int k = 0; k < l.P_len[v]; ++k) x.segment<3>(3 * v) += l.P[v][k].second * xc.segment<3>(3 * l.P[v][k].first);
    smooth(l, b, x);
  }

  int sweeps_;
  std::vector<Level> levels_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> coarse_;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;
  double setup_seconds = 0.0, solve_seconds = 0.0;
};

/// Preconditioned conjugate gradients; stops when ||b - A x|| <= tol ||b||.
inline Vec pcg(const BlockSparse& A, const Vec& b, const Preconditioner& M, double tol, int max_iter,
               SolveReport& rep) {
  Vec x = Vec::Zero(b.size());
  const double bnorm = b.norm();
  rep.residual_history.clear();
  if (bnorm == 0.0) {
    rep.residual_history.push_back(0.0);
    return x;
  }
  Vec r = b, z, p, Ap;
  M.apply(r, z);
  p = z;
  double rz = r.dot(z);
  rep.residual_history.push_back(1.0);
  for (int it = 1; it <= max_iter; ++it) {
    A.multiply(p, Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw SolverError("conjugate gradients broke down (p'Ap = " + format_double(pAp) +
                            "); the constrained system is singular or indefinite",
                        rep.residual_history);
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rel = r.norm() / bnorm;
    rep.residual_history.push_back(rel);
    rep.iterations = it;
    rep.relative_residual = rel;
    if (rel <= tol) return x;
    M.apply(r, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("conjugate gradients did not converge in " + std::to_string(max_iter) +
                        " iterations (relative residual " + format_double(rep.relative_residual) + ")",
                    rep.residual_history);
}

/// Direct sparse LDLT. Tiny or non-positive pivots signal a singular system.
inline Vec solve_direct(const BlockSparse& A, const Vec& b, SolveReport& rep) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(A.to_eigen());
  if (ldlt.info() != Eigen::Success) throw SolverError("direct factorisation failed: singular system");
  const Vec d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (!(d[k] > 1e-12 * dmax))
      throw SolverError("singular stiffness (near-zero pivot at dof " + std::to_string(k) +
                        "): boundary conditions leave a rigid-body mode");
  Vec x = ldlt.solve(b);
  Vec Ax;
  A.multiply(x, Ax);
  const double bn = b.norm();
  rep.relative_residual = bn > 0.0 ? (Ax - b).norm() / bn : 0.0;
  rep.residual_history = {rep.relative_residual};
  return x;
}

/// Solves the constrained system A x = b. `lattice` enables the multigrid
/// preconditioner; without it block Jacobi over single nodes is used.
inline Vec solve_system(const BlockSparse& A, const Vec& b, const Constraints& c, const NodeLattice& lattice,
                        const SolverOptions& opt, SolveReport& rep) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const bool direct = opt.method == SolverOptions::Method::Direct ||
                      (opt.method == SolverOptions::Method::Auto && A.dofs() <= opt.direct_max_dofs);
  if (direct) {
    rep.method = "direct-ldlt";
    Vec x = solve_direct(A, b, rep);
    rep.solve_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return x;
  }
  std::unique_ptr<Preconditioner> M;
  auto groups = [&] {
    if (!lattice.empty()) return lattice.columns();
    std::vector<std::vector<int>> g(A.n);
    for (int v = 0; v < A.n; ++v) g[v] = {v};
    return g;
  };
  switch (opt.preconditioner) {
    case SolverOptions::Precond::Multigrid:
      if (!lattice.empty()) {
        M = std::make_unique<LatticeMultigrid>(A, lattice, c, opt);
        break;
      }
      [[fallthrough]];
    case SolverOptions::Precond::BlockJacobi:
      M = std::make_unique<BlockJacobiPreconditioner>(A, groups());
      break;
    case SolverOptions::Precond::Jacobi:
      M = std::make_unique<JacobiPreconditioner>(A);
      break;
  }
  const auto t1 = clock::now();
  rep.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.method = "pcg+" + M->name();
  Vec x = pcg(A, b, *M, opt.rel_tol, opt.max_iterations, rep);
  rep.solve_seconds = std::chrono::duration<double>(clock::now() - t1).count();
  return x;
}

}  // namespace hexwall

#endif  // HEXWALL_SOLVER_HPP
