#include "hexwall/fem.hpp"
#include "hexwall/solver.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

using namespace hexwall;
using hexwall::testing::cylinder_wall;

namespace {

/// Random SPD block matrix on a 1D chain of nodes with nearest-neighbour coupling.
BlockSparse chain_matrix(int n, std::uint64_t seed) {
  std::vector<std::vector<int>> adj(n);
  for (int v = 0; v < n; ++v)
    for (int w = std::max(0, v - 1); w <= std::min(n - 1, v + 1); ++w) adj[v].push_back(w);
  BlockSparse A = BlockSparse::from_adjacency(adj);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  // Sum of element matrices G^T G on each link keeps the result SPD and symmetric.
  for (int v = 0; v + 1 < n; ++v) {
    Eigen::Matrix<double, 6, 6> g;
    for (int p = 0; p < 36; ++p) g.data()[p] = u(rng);
    const Eigen::Matrix<double, 6, 6> k = g.transpose() * g + Eigen::Matrix<double, 6, 6>::Identity();
    const int nodes[2] = {v, v + 1};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double* blk = A.block(A.find(nodes[a], nodes[b]));
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) blk[3 * p + q] += k(3 * a + p, 3 * b + q);
      }
  }
  return A;
}

struct WallSystem {
  FeModel model;
  BlockSparse K;
  Vec b;
  Constraints c;
};

WallSystem wall_system(int nt, int na) {
  WallSystem s{wall_model(cylinder_wall(10.0, 1.5, 2, nt, na, 20.0), MaterialSpec{}), {}, {}, Constraints{}};
  s.K = assemble(s.model);
  s.b = apply_pressure(s.model, 12.0).forces;
  s.c = make_constraints(s.model, BCSpec{});
  apply_constraints(s.K, s.b, s.c);
  return s;
}

}  // namespace

TEST(BlockSparse, MultiplyMatchesEigen) {
  const BlockSparse A = chain_matrix(30, 1);
  EXPECT_EQ(A.blocks(), 30u + 2u * 29u);
  const Eigen::MatrixXd d(A.to_eigen());
  EXPECT_NEAR((d - d.transpose()).norm(), 0.0, 1e-14);
  Vec x = Vec::LinSpaced(90, -1.0, 2.0), y;
  A.multiply(x, y);
  EXPECT_NEAR((y - d * x).norm(), 0.0, 1e-12 * y.norm());
  EXPECT_EQ(A.find(3, 7), -1);
  EXPECT_THROW(BlockSparse::from_adjacency({{1}, {0, 1}}), SolverError);
}

TEST(Pcg, MatchesDenseSolveOnRandomSpd) {
  const BlockSparse A = chain_matrix(40, 7);
  const Eigen::MatrixXd d(A.to_eigen());
  Vec b = Vec::Ones(120);
  const Vec ref = d.llt().solve(b);
  SolveReport rep;
  const Vec x = pcg(A, b, JacobiPreconditioner(A), 1e-12, 1000, rep);
  EXPECT_LE((x - ref).norm(), 1e-9 * ref.norm());
  EXPECT_LE(rep.relative_residual, 1e-12);
  EXPECT_EQ(rep.residual_history.size(), static_cast<std::size_t>(rep.iterations) + 1);
}

TEST(Pcg, NonConvergenceCarriesHistory) {
  const BlockSparse A = chain_matrix(40, 7);
  SolveReport rep;
  try {
    pcg(A, Vec::Ones(120), JacobiPreconditioner(A), 1e-14, 3, rep);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.residual_history().size(), 4u);
    EXPECT_EQ(e.stage(), "solver");
  }
}

TEST(Constraints, PrescribedValuesAreHonoured) {
  BlockSparse A = chain_matrix(10, 3);
  const Eigen::MatrixXd d(A.to_eigen());
  Vec b = Vec::Zero(30);
  Constraints c(10);
  c.fix_node(0);
  c.fix(9, 1, 0.25);
  EXPECT_EQ(c.count(), 4u);
  EXPECT_TRUE(c.fixed(28));
  EXPECT_FALSE(c.fixed(27));
  const auto rows = apply_constraints(A, b, c);
  EXPECT_EQ(rows.nodes, (std::vector<int>{0, 9}));
  SolveReport rep;
  const Vec x = solve_direct(A, b, rep);
  EXPECT_EQ(x[28], 0.25);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(x[k], 0.0);
  // Free rows of the original system are in equilibrium.
  const Vec r = d * x;
  for (int k = 3; k < 27; ++k) EXPECT_NEAR(r[k], 0.0, 1e-12);
  EXPECT_NEAR(r[27], 0.0, 1e-12);
  EXPECT_NEAR(r[29], 0.0, 1e-12);
}

TEST(SolveSystem, AllMethodsAgreeOnWallProblem) {
  WallSystem s = wall_system(32, 24);
  SolverOptions direct;
  direct.method = SolverOptions::Method::Direct;
  SolveReport rd;
  const Vec ref = solve_system(s.K, s.b, s.c, s.model.lattice, direct, rd);
  EXPECT_EQ(rd.method, "direct-ldlt");
  EXPECT_LE(rd.relative_residual, 1e-10);
  for (auto pc : {SolverOptions::Precond::Multigrid, SolverOptions::Precond::BlockJacobi,
                  SolverOptions::Precond::Jacobi}) {
    SolverOptions o;
    o.method = SolverOptions::Method::Pcg;
    o.preconditioner = pc;
    o.coarse_max_nodes = 200;
    SolveReport rp;
    const Vec x = solve_system(s.K, s.b, s.c, s.model.lattice, o, rp);
    EXPECT_LE(rp.relative_residual, 1e-9) << rp.method;
    EXPECT_LE((x - ref).norm(), 1e-6 * ref.norm()) << rp.method;
  }
}

TEST(SolveSystem, MultigridBuildsLevelsAndBeatsJacobi) {
  WallSystem s = wall_system(48, 40);
  SolverOptions o;
  o.method = SolverOptions::Method::Pcg;
  o.coarse_max_nodes = 300;
  const LatticeMultigrid mg(s.K, s.model.lattice, s.c, o);
  EXPECT_GE(mg.level_count(), 3u);
  SolveReport rm, rj;
  solve_system(s.K, s.b, s.c, s.model.lattice, o, rm);
  o.preconditioner = SolverOptions::Precond::Jacobi;
  solve_system(s.K, s.b, s.c, s.model.lattice, o, rj);
  EXPECT_LT(4 * rm.iterations, rj.iterations);
  // Residual history ends at the reported residual.
  EXPECT_EQ(rm.residual_history.back(), rm.relative_residual);
}

TEST(SolveSystem, AutoPicksDirectBelowThreshold) {
  WallSystem s = wall_system(16, 6);
  SolveReport rep;
  solve_system(s.K, s.b, s.c, s.model.lattice, SolverOptions{}, rep);
  EXPECT_EQ(rep.method, "direct-ldlt");
  SolverOptions o;
  o.direct_max_dofs = 10;
  solve_system(s.K, s.b, s.c, s.model.lattice, o, rep);
  EXPECT_EQ(rep.method.rfind("pcg+multigrid", 0), 0u);
}

TEST(Singular, UnconstrainedStiffnessIsDetected) {
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, 12, 4, 8.0), MaterialSpec{});
  const BlockSparse K = assemble(m);
  SolveReport rep;
  EXPECT_THROW(solve_direct(K, apply_pressure(m, 12.0).forces, rep), SolverError);
  Constraints c(m.nodes.size());
  EXPECT_THROW(check_rigid_modes(m.nodes, c), SolverError);
  // Two nodes only, or a straight line of nodes, leave a rotation free.
  c.fix_node(0);
  c.fix_node(1);
  EXPECT_THROW(check_rigid_modes(m.nodes, c), SolverError);
  // Nodes 0..2 form one radial column of the wall lattice, a straight line.
  c.fix_node(2);
  EXPECT_THROW(check_rigid_modes(m.nodes, c), SolverError);
  c.fix_node(3 * 3);  // outer node three angular columns further round
  EXPECT_NO_THROW(check_rigid_modes(m.nodes, c));
}
