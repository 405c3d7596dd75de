#include "mgms/error.hpp"

#include <gtest/gtest.h>

using namespace mgms;

namespace {

struct Problem
{
    MeshWithPartition mp;
    CoefficientField kappa;
    SaddleSystem fine;
    FlowSolution ref;
    std::vector<OfflineEdge> offline;
};

Problem make_problem(MeshWithPartition mp, CoefficientField kappa, BoundaryPressure bc, double f)
{
    Problem p{std::move(mp), std::move(kappa), {}, {}, {}};
    p.fine = assemble_fine(p.mp.mesh, p.kappa, bc, f);
    p.ref = solve_saddle(p.fine);
    p.offline = build_offline(p.mp.mesh, p.mp.partition, p.kappa);
    return p;
}

Problem hetero(BoundaryPressure bc = {1, 0}, double f = 0)
{
    auto mp = generate_rough_channel(40, 8, 1.0, RoughWalls{}, 2, 5);
    auto kappa = log_uniform_coefficient(mp.mesh, 1.0, 1000.0, 9, 0.05);
    return make_problem(std::move(mp), std::move(kappa), bc, f);
}

struct Coarse
{
    ProjectionOperator R;
    CoarseSystem sys;
    CoarseSolution sol;
};

Coarse solve(const Problem& p, int M)
{
    Coarse c;
    c.R = make_projection(assemble_basis(p.offline, M), p.mp.mesh, p.mp.partition);
    c.sys = assemble_coarse(p.fine, c.R);
    c.sol = solve_coarse(c.sys, c.R);
    return c;
}

} // namespace

TEST(Coarse, ProjectedBlocksHaveExpectedShape)
{
    const auto p = hetero();
    const auto c = solve(p, 2);
    const int n = 2 * p.mp.partition.num_edges();
    ASSERT_EQ(c.sys.saddle.A.rows(), n);
    ASSERT_EQ(c.sys.saddle.A.cols(), n);
    EXPECT_EQ(c.sys.saddle.B.rows(), p.mp.partition.num_cells());
    EXPECT_EQ(c.sys.saddle.B.cols(), n);
    const Mat A(c.sys.saddle.A);
    EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-14 * A.cwiseAbs().maxCoeff());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().minCoeff(), 0.0);

    // Dense triple products as an independent route.
    const Mat Ru(c.R.Ru), Rp(c.R.Rp);
    EXPECT_LE((A - Ru * Mat(p.fine.A) * Ru.transpose()).cwiseAbs().maxCoeff(), 1e-12 * A.cwiseAbs().maxCoeff());
    const Mat B(c.sys.saddle.B);
    EXPECT_LE((B - Rp * Mat(p.fine.B) * Ru.transpose()).cwiseAbs().maxCoeff(), 1e-12 * B.cwiseAbs().maxCoeff());
}

TEST(Coarse, AggregationColumnsSumToOne)
{
    const auto [mesh, part] = generate_rough_channel(40, 8, 1.0, RoughWalls{}, 2, 5);
    const Mat Rp(pressure_aggregation(part, mesh.num_cells()));
    EXPECT_EQ(Rp.rows(), part.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        EXPECT_EQ(Rp.col(c).sum(), 1.0);
        EXPECT_EQ(Rp(part.coarse_of(c), c), 1.0);
    }
}

TEST(Coarse, FullSnapshotSpaceReproducesFineSolution)
{
    for (const auto& [bc, f] : {std::pair{BoundaryPressure{1, 0}, 0.0}, std::pair{BoundaryPressure{0, 0}, 1.0}}) {
        const auto p = hetero(bc, f);
        const auto c = solve(p, min_snapshot_count(p.offline));
        EXPECT_TRUE(std::isinf(assemble_basis(p.offline, min_snapshot_count(p.offline)).Lambda));
        EXPECT_LE(velocity_error(p.mp.mesh, p.kappa, p.ref.u, c.sol.u_ms), 1e-8);
        const auto ep = pressure_error(p.mp.mesh, p.mp.partition, p.ref.p, c.sol.P);
        EXPECT_LE(ep.value, 1e-8);
    }
}

TEST(Coarse, SingleModeIsExactForUniformFlow)
{
    auto mp = generate_rectangle(40, 8, 1.0, 0.1, 5);
    auto kappa = constant_coefficient(mp.mesh, 3.0);
    const auto p = make_problem(std::move(mp), std::move(kappa), {1, 0}, 0);
    const auto c = solve(p, 1);
    EXPECT_LE(velocity_error(p.mp.mesh, p.kappa, p.ref.u, c.sol.u_ms), 1e-8);
}

TEST(Coarse, MassBalanceAndEnergyIdentity)
{
    const auto p = hetero({0, 0}, 1.0);
    for (int M : {1, 3, 8}) {
        const auto c = solve(p, M);
        const Vec out = coarse_cell_outflow(p.fine, c.R, c.sol.u_ms);
        const Vec want = c.R.Rp * p.fine.F;
        EXPECT_LE((out - want).cwiseAbs().maxCoeff(), 1e-10 * want.cwiseAbs().maxCoeff()) << "M = " << M;

        // A U - B^T P = G  and  B U = F  give  U.A U = U.G + P.F.
        const auto& s = c.sys.saddle;
        const double lhs = c.sol.U.dot(s.A * c.sol.U);
        const double rhs = c.sol.U.dot(s.G) + c.sol.P.dot(s.F);
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));

        for (int e = 0; e < p.mp.mesh.num_edges(); ++e)
            if (p.mp.mesh.on_boundary(e) && p.mp.mesh.tag(e) == BoundaryTag::wall) {
                EXPECT_EQ(c.sol.u_ms[e], 0.0);
            }
    }
}

TEST(Coarse, ErrorShrinksWithBasisSize)
{
    const auto p = hetero();
    double previous = std::numeric_limits<double>::infinity();
    for (int M = 1; M <= 8; ++M) {
        const double e = velocity_error(p.mp.mesh, p.kappa, p.ref.u, solve(p, M).sol.u_ms);
        EXPECT_LE(e, previous + 1e-10) << "M = " << M;
        previous = e;
    }
}

TEST(Coarse, InfSupEstimate)
{
    const auto p = hetero();
    double previous = 0;
    for (int M = 1; M <= 8; ++M) {
        const double beta = estimate_infsup(solve(p, M).sys);
        EXPECT_GE(beta, 1e-6);
        EXPECT_GE(beta, previous - 1e-12) << "M = " << M;
        previous = beta;
    }
}

TEST(Coarse, InfSupMatchesDenseSupremum)
{
    // beta^2 is the smallest eigenvalue of the pencil (B N^-1 B^T, W) with N
    // the velocity Gram matrix and W the coarse cell areas.
    const auto p = hetero();
    const auto c = solve(p, 3);
    const Mat B(c.sys.saddle.B);
    const Mat S = B * c.sys.velocity_norm.ldlt().solve(B.transpose());
    const Mat W = c.sys.pressure_mass.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(S, W);
    EXPECT_NEAR(estimate_infsup(c.sys), std::sqrt(ges.eigenvalues().minCoeff()), 1e-9);
}

TEST(Coarse, InfSupNeedsTwoCoarseCells)
{
    auto mp = generate_rectangle(8, 4, 1.0, 0.1, 1);
    auto kappa = constant_coefficient(mp.mesh, 1.0);
    const auto p = make_problem(std::move(mp), std::move(kappa), {1, 0}, 0);
    const auto c = solve(p, 1);
    EXPECT_THROW(estimate_infsup(c.sys), std::invalid_argument);
}

TEST(Coarse, UncoveredCoarseCellIsReported)
{
    // Keep only the basis of the first two coarse edges: coarse cells 2..4
    // receive no flux functions and their pressures are unconstrained.
    const auto p = hetero();
    const std::vector<OfflineEdge> part(p.offline.begin(), p.offline.begin() + 2);
    const auto basis = assemble_basis(part, 2);
    const ProjectionOperator R = make_projection(basis, p.mp.mesh, p.mp.partition);
    const auto sys = assemble_coarse(p.fine, R);
    try {
        solve_coarse(sys, R);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("unconstrained pressure mode"), std::string::npos) << e.what();
    }
}

TEST(Coarse, ExpandCoarseIsPiecewiseConstant)
{
    const auto [mesh, part] = generate_rectangle(10, 2, 1.0, 0.1, 5);
    const Vec P = Vec::LinSpaced(5, 1.0, 5.0);
    const Vec p = expand_coarse(part, P, mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) EXPECT_EQ(p[c], P[part.coarse_of(c)]);
    EXPECT_THROW(expand_coarse(part, Vec::Zero(4), mesh.num_cells()), std::invalid_argument);
}

TEST(Coarse, ShapeMismatchIsRejected)
{
    const auto p = hetero();
    auto c = solve(p, 1);
    ProjectionOperator bad = c.R;
    bad.Ru.conservativeResize(bad.Ru.rows(), bad.Ru.cols() - 1);
    EXPECT_THROW(assemble_coarse(p.fine, bad), std::invalid_argument);
}
