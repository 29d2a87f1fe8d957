#include "direg/conic/solver.hpp"
#include "direg/error.hpp"
#include "exp_oracle.hpp"
#include "planted.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace direg;
using namespace direg::conic;
using fixtures::Vec3;

namespace {

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

const ConeSpec& mixed_cones() {
  static const ConeSpec cones{{ConeKind::Zero, 2}, {ConeKind::Nonneg, 3}, {ConeKind::Soc, 4},
                              {ConeKind::Psd, 3}, {ConeKind::Exp, 2}};
  return cones;
}

}  // namespace

TEST(ConeProjection, NonnegExample) {
  const Eigen::VectorXd p = project_cone(Eigen::Vector2d(-1, 2), {{ConeKind::Nonneg, 2}});
  EXPECT_EQ(p, Eigen::Vector2d(0, 2));
}

TEST(ConeProjection, PsdExample) {
  const Eigen::VectorXd v = vectorize_symmetric(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix());
  const Eigen::MatrixXd p = unvectorize_symmetric(project_cone(v, {{ConeKind::Psd, 2}}), 2);
  EXPECT_NEAR((p - Eigen::Matrix2d{{1, 0}, {0, 0}}).norm(), 0.0, 1e-14);
}

TEST(ConeProjection, ExpInteriorFixed) {
  const Vec3 p = project_exp({0, 1, 2});
  EXPECT_EQ(p, (Vec3{0, 1, 2}));
}

TEST(ConeProjection, SocFormula) {
  const ConeSpec k{{ConeKind::Soc, 3}};
  EXPECT_EQ(project_cone(Eigen::Vector3d(2, 1, 0), k), Eigen::Vector3d(2, 1, 0));
  EXPECT_EQ(project_cone(Eigen::Vector3d(-2, 1, 0), k), Eigen::Vector3d(0, 0, 0));
  // (0, 2, 0) -> ((0+2)/2) * (1, 1, 0)
  EXPECT_NEAR((project_cone(Eigen::Vector3d(0, 2, 0), k) - Eigen::Vector3d(1, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(ConeProjection, PsdVectorizationPreservesInnerProduct) {
  std::mt19937_64 rng(3);
  for (int side : {1, 2, 4, 7}) {
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(side, side, [&] { return random_vector(1, rng)[0]; });
    Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(side, side, [&] { return random_vector(1, rng)[0]; });
    a = (a + a.transpose()).eval();
    b = (b + b.transpose()).eval();
    const Eigen::VectorXd va = vectorize_symmetric(a);
    EXPECT_EQ(va.size(), side * (side + 1) / 2);
    EXPECT_NEAR(va.dot(vectorize_symmetric(b)), (a * b).trace(), 1e-12);
    EXPECT_NEAR((unvectorize_symmetric(va, side) - a).norm(), 0.0, 1e-13);
    for (int j = 0; j < side; ++j)
      for (int i = j; i < side; ++i) EXPECT_DOUBLE_EQ(va[psd_index(i, j, side)], a(i, j) * (i == j ? 1.0 : std::sqrt(2.0)));
  }
}

// p = proj_K(z) iff p in K, p - z in K*, <p, p - z> = 0.  Checked for the
// self-dual blocks.
TEST(ConeProjection, OptimalityConditionsSelfDual) {
  std::mt19937_64 rng(5);
  const ConeSpec cones{{ConeKind::Nonneg, 4}, {ConeKind::Soc, 5}, {ConeKind::Psd, 4}};
  for (int t = 0; t < 500; ++t) {
    const Eigen::VectorXd z = random_vector(dimension(cones), rng, t % 2 ? 1.0 : 30.0);
    const Eigen::VectorXd p = project_cone(z, cones);
    const Eigen::VectorXd d = p - z;
    const double scale = std::max(1.0, z.norm());
    int off = 0;
    for (const auto& c : cones) {
      const int n = c.dimension();
      const Eigen::VectorXd pb = p.segment(off, n), db = d.segment(off, n);
      switch (c.kind) {
        case ConeKind::Nonneg:
          EXPECT_GE(pb.minCoeff(), 0.0);
          EXPECT_GE(db.minCoeff(), -1e-12 * scale);
          break;
        case ConeKind::Soc:
          EXPECT_LE(pb.tail(n - 1).norm(), pb[0] + 1e-12 * scale);
          EXPECT_LE(db.tail(n - 1).norm(), db[0] + 1e-12 * scale);
          break;
        default: {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(unvectorize_symmetric(pb, c.size));
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(unvectorize_symmetric(db, c.size));
          EXPECT_GE(e1.eigenvalues().minCoeff(), -1e-12 * scale);
          EXPECT_GE(e2.eigenvalues().minCoeff(), -1e-12 * scale);
        }
      }
      EXPECT_NEAR(pb.dot(db), 0.0, 1e-11 * scale * scale);
      off += n;
    }
  }
}

TEST(ConeProjection, ExpMatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int t = 0; t < 1000; ++t) {
    const Vec3 z{g(rng), g(rng), g(rng)};
    const Vec3 p = project_exp(z);
    const Vec3 q = fixtures::oracle_project_exp(z);
    EXPECT_LE(fixtures::dist3(p, q), 1e-9) << z[0] << " " << z[1] << " " << z[2];
    EXPECT_LE(fixtures::dist3(p, fixtures::oracle_project_exp(p)), 1e-12);
  }
}

TEST(ConeProjection, ExpDualMatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  const ConeSpec k{{ConeKind::Exp, 1}};
  for (int t = 0; t < 1000; ++t) {
    const Vec3 z{g(rng), g(rng), g(rng)};
    const Eigen::VectorXd p = project_dual_cone(Eigen::Vector3d(z[0], z[1], z[2]), k);
    const Vec3 q = fixtures::oracle_project_exp_dual(z);
    const Vec3 pd{p[0], p[1], p[2]};
    // Near the boundary rays the brute-force point is only accurate to ~1e-8,
    // so compare feasibility and distance rather than coordinates.
    EXPECT_LE(fixtures::dist3(pd, q), 1e-7);
    EXPECT_LE(fixtures::dist3(pd, fixtures::oracle_project_exp_dual(pd)), 1e-9);
    EXPECT_LE(fixtures::dist3(z, pd), fixtures::dist3(z, q) + 1e-14);
  }
}

// z = proj_K(z) - proj_K*(-z) with orthogonal parts, using the library's
// primal projection and the brute-force dual projection.
TEST(ConeProjection, ExpMoreauDecomposition) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  for (int t = 0; t < 1000; ++t) {
    const Vec3 z{g(rng), g(rng), g(rng)};
    const Vec3 p = project_exp(z);
    const Vec3 d = fixtures::oracle_project_exp_dual({-z[0], -z[1], -z[2]});
    const Vec3 r{z[0] - p[0] + d[0], z[1] - p[1] + d[1], z[2] - p[2] + d[2]};
    EXPECT_LE(std::sqrt(fixtures::dot3(r, r)), 1e-9);
    EXPECT_NEAR(fixtures::dot3(p, d), 0.0, 1e-9);
  }
}

TEST(ConeProjection, ExpExtremeScalesStayInCone) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> e(-8, 8);
  for (int t = 0; t < 3000; ++t) {
    const Vec3 z{g(rng) * std::pow(10.0, e(rng)), g(rng) * std::pow(10.0, e(rng)), g(rng) * std::pow(10.0, e(rng))};
    const Vec3 p = project_exp(z);
    for (double v : p) ASSERT_TRUE(std::isfinite(v));
    const double scale = std::max(1.0, std::sqrt(fixtures::dot3(z, z)));
    // Distance can only shrink relative to any feasible point, e.g. the face projection.
    const Vec3 face{std::min(z[0], 0.0), 0.0, std::max(z[2], 0.0)};
    EXPECT_LE(fixtures::dist3(z, p), fixtures::dist3(z, face) + 1e-12 * scale);
  }
}

TEST(ConeProjection, Idempotent) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const Eigen::VectorXd z = random_vector(dimension(mixed_cones()), rng, 3.0);
    const Eigen::VectorXd p = project_cone(z, mixed_cones());
    EXPECT_LE((project_cone(p, mixed_cones()) - p).norm(), 1e-12);
    const Eigen::VectorXd q = project_dual_cone(z, mixed_cones());
    EXPECT_LE((project_dual_cone(q, mixed_cones()) - q).norm(), 1e-12);
  }
}

TEST(ConeProjection, NonExpansive) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 300; ++t) {
    const Eigen::VectorXd u = random_vector(dimension(mixed_cones()), rng, 2.0);
    const Eigen::VectorXd v = u + random_vector(dimension(mixed_cones()), rng, t % 3 ? 0.1 : 2.0);
    const double d = (project_cone(u, mixed_cones()) - project_cone(v, mixed_cones())).norm();
    EXPECT_LE(d, (u - v).norm() * (1 + 1e-12) + 1e-14);
  }
}

TEST(ConeProjection, ZeroBlocks) {
  const ConeSpec k{{ConeKind::Zero, 2}};
  EXPECT_EQ(project_cone(Eigen::Vector2d(3, -1), k), Eigen::Vector2d(0, 0));
  EXPECT_EQ(project_dual_cone(Eigen::Vector2d(3, -1), k), Eigen::Vector2d(3, -1));
}

TEST(ConeSpecTest, Dimensions) {
  EXPECT_EQ(dimension(mixed_cones()), 2 + 3 + 4 + 6 + 6);
  EXPECT_EQ(cone_kind_from_string(to_string(ConeKind::Psd)), ConeKind::Psd);
  EXPECT_THROW(cone_kind_from_string("pow"), ValidationError);
  EXPECT_THROW(validate(ConeSpec{{ConeKind::Soc, 0}}), ValidationError);
}

TEST(Solver, LinearProgramExample) {
  ProblemBuilder pb;
  const int x = pb.add_variables(1);
  pb.add_nonneg({AffineExpr::variable(x) - 1.0});
  pb.set_objective(AffineExpr::variable(x));
  const ConicSolution sol = solve_conic(pb.build());
  ASSERT_TRUE(sol.optimal()) << to_string(sol.status);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-8);
  EXPECT_NEAR(sol.primal_objective, 1.0, 1e-8);
}

TEST(Solver, SemidefiniteExample) {
  ProblemBuilder pb;
  const int t = pb.add_variables(1);
  const AffineExpr tv = AffineExpr::variable(t);
  pb.add_psd({{tv - 1.0}, {0.0, tv - 2.0}});
  pb.set_objective(tv);
  const ConicSolution sol = solve_conic(pb.build());
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x[0], 2.0, 1e-8);
}

TEST(Solver, ExponentialExample) {
  ProblemBuilder pb;
  const int w = pb.add_variables(1);
  pb.add_exp({{AffineExpr(0.0), AffineExpr(1.0), AffineExpr::variable(w)}});
  pb.set_objective(AffineExpr::variable(w));
  const ConicSolution sol = solve_conic(pb.build());
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x[0], 1.0, 1e-8);
}

TEST(Solver, SecondOrderExample) {
  // min t s.t. ||(3, 4) - (x, 0)|| <= t with x free: optimum 4 at x = 3.
  ProblemBuilder pb;
  const int t = pb.add_variables(2);
  pb.add_soc({AffineExpr::variable(t), 3.0 - AffineExpr::variable(t + 1), AffineExpr(4.0)});
  pb.set_objective(AffineExpr::variable(t));
  const ConicSolution sol = solve_conic(pb.build());
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.primal_objective, 4.0, 1e-8);
  EXPECT_NEAR(sol.x[1], 3.0, 1e-7);
}

TEST(Solver, PlantedProblems) {
  std::mt19937_64 rng(2024);
  const std::vector<ConeSpec> classes{
      {{ConeKind::Zero, 3}, {ConeKind::Nonneg, 20}},
      {{ConeKind::Soc, 6}, {ConeKind::Soc, 5}, {ConeKind::Nonneg, 4}},
      {{ConeKind::Psd, 5}, {ConeKind::Zero, 2}},
      {{ConeKind::Exp, 6}, {ConeKind::Zero, 1}},
      mixed_cones()};
  int solved = 0, total = 0;
  for (const auto& cones : classes) {
    for (int k = 0; k < 20; ++k) {
      const auto pp = fixtures::planted_problem(cones, 3 + k % 8, rng);
      const ConicSolution sol = solve_conic(pp.problem);
      ++total;
      if (!sol.optimal()) continue;
      ++solved;
      EXPECT_LE(std::abs(sol.primal_objective - pp.optimum), 1e-6);
      EXPECT_LE(sol.primal_residual, 1e-8);
      EXPECT_LE(sol.dual_residual, 1e-8);
      EXPECT_TRUE(in_cone(sol.s, cones, 1e-9));
      EXPECT_TRUE(in_dual_cone(sol.y, cones, 1e-9));
    }
  }
  EXPECT_GE(solved, total - 1);
}

TEST(Solver, PrimalInfeasibleCertificate) {
  // x >= 1 and x <= 0.
  ProblemBuilder pb;
  const int x = pb.add_variables(1);
  pb.add_nonneg({AffineExpr::variable(x) - 1.0, -1.0 * AffineExpr::variable(x)});
  pb.set_objective(AffineExpr::variable(x));
  const ConicProblem p = pb.build();
  const ConicSolution sol = solve_conic(p);
  ASSERT_EQ(sol.status, SolveStatus::PrimalInfeasible);
  EXPECT_NEAR(p.b.dot(sol.y), -1.0, 1e-9);
  EXPECT_LE((p.A.transpose() * sol.y).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE(in_dual_cone(sol.y, p.cones, 1e-9));
}

TEST(Solver, DualInfeasibleCertificate) {
  // min x s.t. x <= 0: unbounded below.
  ProblemBuilder pb;
  const int x = pb.add_variables(1);
  pb.add_nonneg({-1.0 * AffineExpr::variable(x)});
  pb.set_objective(AffineExpr::variable(x));
  const ConicProblem p = pb.build();
  const ConicSolution sol = solve_conic(p);
  ASSERT_EQ(sol.status, SolveStatus::DualInfeasible);
  EXPECT_NEAR(p.c.dot(sol.x), -1.0, 1e-9);
  EXPECT_LE((p.A * sol.x + sol.s).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE(in_cone(sol.s, p.cones, 1e-9));
}

TEST(Solver, MaxItersReported) {
  std::mt19937_64 rng(4);
  const auto pp = fixtures::planted_problem({{ConeKind::Psd, 5}}, 6, rng);
  SolverOptions o;
  o.max_iters = 3;
  const ConicSolution sol = solve_conic(pp.problem, o);
  EXPECT_EQ(sol.status, SolveStatus::MaxIters);
  EXPECT_EQ(sol.x.size(), pp.problem.num_variables());
}

TEST(Solver, Deterministic) {
  std::mt19937_64 rng(6);
  const auto pp = fixtures::planted_problem(mixed_cones(), 7, rng);
  const ConicSolution a = solve_conic(pp.problem);
  const ConicSolution b = solve_conic(pp.problem);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.s, b.s);
  SolverOptions o;
  o.seed = 99;
  const ConicSolution c = solve_conic(pp.problem, o);
  const ConicSolution d = solve_conic(pp.problem, o);
  EXPECT_EQ(c.x, d.x);
  ASSERT_TRUE(c.optimal());
  EXPECT_NEAR(c.primal_objective, pp.optimum, 1e-6);
}

TEST(Solver, RejectsMalformedProblems) {
  ConicProblem p;
  p.c = Eigen::VectorXd::Zero(2);
  p.A.resize(3, 2);
  p.b = Eigen::VectorXd::Zero(3);
  p.cones = {{ConeKind::Nonneg, 2}};
  EXPECT_THROW(solve_conic(p), ValidationError);
}

TEST(ProblemIo, JsonRoundTrip) {
  std::mt19937_64 rng(8);
  const auto pp = fixtures::planted_problem(mixed_cones(), 5, rng);
  const ConicProblem q = problem_from_json(nlohmann::json::parse(to_json(pp.problem).dump()));
  EXPECT_EQ(q.c, pp.problem.c);
  EXPECT_EQ(q.b, pp.problem.b);
  EXPECT_EQ(q.cones, pp.problem.cones);
  EXPECT_EQ(Eigen::MatrixXd(q.A), Eigen::MatrixXd(pp.problem.A));
}

TEST(ProblemBuilderTest, PsdRowsCarrySqrt2) {
  ProblemBuilder pb;
  const int v = pb.add_variables(1);
  pb.add_psd({{AffineExpr(1.0)}, {AffineExpr::variable(v), AffineExpr(2.0)}});
  const ConicProblem p = pb.build();
  ASSERT_EQ(p.b.size(), 3);
  // s = b - A x equals vec([[1, x], [x, 2]]).
  Eigen::VectorXd x(1);
  x << 0.5;
  const Eigen::VectorXd s = p.b - p.A * x;
  EXPECT_NEAR(s[psd_index(0, 0, 2)], 1.0, 1e-15);
  EXPECT_NEAR(s[psd_index(1, 0, 2)], 0.5 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[psd_index(1, 1, 2)], 2.0, 1e-15);
}
