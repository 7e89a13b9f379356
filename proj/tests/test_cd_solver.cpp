#include <gtest/gtest.h>

#include "spidr/cd_solver.hpp"
#include "test_util.hpp"

using namespace spidr;
using testutil::gaussian_matrix;
using testutil::gaussian_vector;

namespace {

// X'X = n I with centered columns.
MatrixXd orthogonal_design(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed, 0);
    MatrixXd G = gaussian_matrix(n, p + 1, rng);
    G.col(0).setOnes();
    Eigen::HouseholderQR<MatrixXd> qr(G);
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, p + 1);
    return Q.rightCols(p) * std::sqrt(static_cast<double>(n));
}

// Proximal gradient with a fixed step, run long enough to be a reference.
VectorXd ista_lasso(const MatrixXd& X, const VectorXd& y, double lambda, int iters) {
    const double n = static_cast<double>(X.rows());
    const double L = Eigen::SelfAdjointEigenSolver<MatrixXd>(X.transpose() * X / n).eigenvalues().maxCoeff();
    VectorXd b = VectorXd::Zero(X.cols());
    for (int it = 0; it < iters; ++it) {
        const VectorXd grad = -X.transpose() * (y - X * b) / n;
        const VectorXd u = b - grad / L;
        for (Index k = 0; k < b.size(); ++k) b[k] = soft_threshold(u[k], lambda / L);
    }
    return b;
}

double objective_of(const MatrixXd& X, const VectorXd& y, const VectorXd& b, const PenaltySpec& spec) {
    return penalized_objective(VectorXd(y - X * b), b, spec);
}

}  // namespace

TEST(SolveAtLambda, ZeroAtAndAboveLambdaMax) {
    const Dataset d = testutil::linear_data(40, 12, VectorXd::LinSpaced(12, 1.0, -1.0), 1.0, 1);
    const DenseDesign X(d.X());
    const double lmax = lambda_max(X, d.y());
    for (Family f : {Family::MCP, Family::Lasso}) {
        for (double mult : {1.0, 1.5, 10.0}) {
            const SolveResult s = solve_at_lambda(X, d.y(), PenaltySpec{f, lmax * mult, 3.0});
            EXPECT_TRUE(s.active.empty());
            EXPECT_EQ(s.beta.cwiseAbs().maxCoeff(), 0.0);
            EXPECT_TRUE(s.converged);
        }
        EXPECT_FALSE(solve_at_lambda(X, d.y(), PenaltySpec{f, lmax * 0.9, 3.0}).active.empty());
    }
}

TEST(SolveAtLambda, OrthogonalDesignIsCoordinatewise) {
    const MatrixXd X = orthogonal_design(50, 10, 3);
    ASSERT_LE((X.transpose() * X / 50.0 - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
    Rng rng(4, 0);
    const VectorXd y = X * (VectorXd(10) << 3, -2, 1.2, 0.6, 0.3, 0, 0, 0, 0, 0).finished() + gaussian_vector(50, rng);
    const VectorXd zeta = X.transpose() * y / 50.0;
    for (Family f : {Family::MCP, Family::Lasso})
        for (double lambda : {0.05, 0.3, 0.8})
            for (double gamma : {1.5, 3.0, 6.0}) {
                const PenaltySpec spec{f, lambda, gamma};
                const SolveResult s = solve_at_lambda(DenseDesign(X), y, spec);
                for (Index k = 0; k < 10; ++k) EXPECT_NEAR(s.beta[k], univariate_minimizer(zeta[k], 1.0, spec), 1e-8);
            }
}

TEST(SolveAtLambda, LassoMatchesProximalGradientReference) {
    Rng rng(30, 8);
    const MatrixXd X = gaussian_matrix(30, 8, rng);
    const VectorXd y = X.col(0) * 2.0 - X.col(3) + gaussian_vector(30, rng);
    for (double lambda : {0.02, 0.1, 0.4}) {
        const PenaltySpec spec{Family::Lasso, lambda, 3.0};
        const SolveResult s = solve_at_lambda(DenseDesign(X), y, spec);
        const VectorXd ref = ista_lasso(X, y, lambda, 200000);
        EXPECT_NEAR(s.objective, objective_of(X, y, ref, spec), 1e-6);
        EXPECT_LE(s.objective, objective_of(X, y, ref, spec) + 1e-12);
    }
}

TEST(SolveAtLambda, KktCertificatesOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed, 21);
        const Index n = 40 + static_cast<Index>(rng.below(40));
        const Index p = 10 + static_cast<Index>(rng.below(80));
        VectorXd beta = VectorXd::Zero(p);
        for (Index k = 0; k < 5; ++k) beta[k] = 2.0 * rng.normal();
        const Dataset d = testutil::linear_data(n, p, beta, 1.0, 500 + seed);
        const DenseDesign X(d.X());
        const double lmax = lambda_max(X, d.y());
        for (Family f : {Family::MCP, Family::Lasso}) {
            const PenaltySpec spec{f, lmax * (0.05 + 0.5 * rng.uniform()), 1.5 + 5.0 * rng.uniform()};
            const SolveResult s = solve_at_lambda(X, d.y(), spec);
            ASSERT_TRUE(s.converged);
            EXPECT_LE(kkt_violation(X, d.y(), s.beta, spec), 1e-6) << "seed " << seed;
            EXPECT_EQ(s.active, IndexSet::support(s.beta));
        }
    }
}

TEST(SolveAtLambda, ObjectiveNeverIncreasesAcrossSweeps) {
    SolveOptions opt;
    opt.record_trace = true;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed, 22);
        VectorXd beta = VectorXd::Zero(60);
        for (Index k = 0; k < 8; ++k) beta[k] = rng.normal() * 2.0;
        const Dataset d = testutil::linear_data(50, 60, beta, 1.5, 900 + seed);
        const DenseDesign X(d.X());
        const PenaltySpec spec{Family::MCP, 0.2 * lambda_max(X, d.y()), 2.0};
        const SolveResult s = solve_at_lambda(X, d.y(), spec, VectorXd(), opt);
        double prev = penalized_objective(d.y(), VectorXd::Zero(60), spec);
        for (double v : s.trace) {
            EXPECT_LE(v, prev + 1e-12 * std::abs(prev));
            prev = v;
        }
        EXPECT_LE(s.objective, s.trace.back() + 1e-12 * std::abs(s.trace.back()));
    }
}

TEST(SolveAtLambda, NonConvergenceIsAFlag) {
    const Dataset d = testutil::linear_data(40, 30, VectorXd::Constant(30, 0.5), 1.0, 2);
    SolveOptions opt;
    opt.tol.cd_max_sweeps = 1;
    const SolveResult s =
        solve_at_lambda(DenseDesign(d.X()), d.y(), PenaltySpec{Family::MCP, 0.01, 3.0}, VectorXd(), opt);
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.sweeps, 1);
    EXPECT_TRUE(s.beta.allFinite());
}

TEST(SolveAtLambda, RejectsBadArguments) {
    const Dataset d = testutil::linear_data(20, 5, VectorXd::Ones(5), 1.0, 2);
    const DenseDesign X(d.X());
    EXPECT_THROW(solve_at_lambda(X, d.y(), PenaltySpec{Family::MCP, 0.1, 0.5}), InvalidInput);
    EXPECT_THROW(solve_at_lambda(X, d.y(), PenaltySpec{Family::MCP, 0.1, 3.0}, VectorXd::Zero(4)), InvalidInput);
    EXPECT_THROW(solve_at_lambda(X, VectorXd(d.y().head(10)), PenaltySpec{Family::MCP, 0.1, 3.0}), InvalidInput);
}

TEST(LambdaGrid, Construction) {
    const Dataset d = testutil::linear_data(40, 12, VectorXd::Ones(12), 1.0, 1);
    const LambdaGrid g = make_lambda_grid(d);
    ASSERT_EQ(g.size(), 100u);
    EXPECT_NEAR(g[0], (d.X().transpose() * d.y()).cwiseAbs().maxCoeff() / 40.0, 1e-12);
    EXPECT_DOUBLE_EQ(g.values.back(), g[0] * 0.001);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i], g[i - 1]);
    EXPECT_EQ(default_min_ratio(100, 1000), 0.05);
    EXPECT_THROW(LambdaGrid::from_values({1.0, 1.0}), InvalidInput);
}

TEST(SolvePath, FirstPointZeroAndEveryPointStationary) {
    VectorXd beta = VectorXd::Zero(80);
    beta.head(6) << 3, 2, 1, -0.5, -1, -1.5;
    const Dataset d = testutil::linear_data(60, 80, beta, 2.0, 17);
    const LambdaGrid g = make_lambda_grid(d, 50);
    for (Family f : {Family::MCP, Family::Lasso}) {
        const PathFit path = solve_path(d, f, 3.0, g);
        EXPECT_EQ(path.betas.col(0).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_TRUE(path.all_converged());
        for (std::size_t l = 0; l < g.size(); ++l) {
            const PenaltySpec spec{f, g[l], 3.0};
            const VectorXd b = path.betas.col(static_cast<Index>(l));
            EXPECT_LE(kkt_violation(DenseDesign(d.X()), d.y(), b, spec), 1e-6);
            EXPECT_EQ(path.active_sets[l], IndexSet::support(b));
            EXPECT_LE(path.objective[l], penalized_objective(d.y(), VectorXd::Zero(80), spec) + 1e-12);
        }
    }
}

TEST(SolvePath, LassoPathIsContinuous) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        VectorXd beta = VectorXd::Zero(20);
        beta.head(4) << 1.5, -1, 0.7, 0.4;
        const Dataset d = testutil::linear_data(50, 20, beta, 1.0, 40 + seed);
        const LambdaGrid g = make_lambda_grid(d, 200, 0.01);
        const PathFit path = solve_path(d, Family::Lasso, 3.0, g);
        for (std::size_t l = 1; l < g.size(); ++l) {
            const double jump =
                (path.betas.col(static_cast<Index>(l)) - path.betas.col(static_cast<Index>(l - 1))).cwiseAbs().maxCoeff();
            EXPECT_LE(jump, 10.0 * 20.0 * (g[l - 1] - g[l]));
        }
    }
}

TEST(SolvePath, HugeGammaMcpReproducesLasso) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        VectorXd beta = VectorXd::Zero(30);
        beta.head(5) << 2, -1.5, 1, 0.5, -0.5;
        const Dataset d = testutil::linear_data(60, 30, beta, 1.0, 70 + seed);
        const LambdaGrid g = make_lambda_grid(d, 40, 0.02);
        const PathFit lasso = solve_path(d, Family::Lasso, 3.0, g);
        const PathFit mcp = solve_path(d, Family::MCP, 1e6, g);
        EXPECT_LE((lasso.betas - mcp.betas).cwiseAbs().maxCoeff(), 1e-5);
    }
}

TEST(SolvePath, WarmAndColdStartsAgreeOnConvexProblems) {
    VectorXd beta = VectorXd::Zero(15);
    beta.head(4) << 1, -1, 0.5, 0.25;
    const Dataset d = testutil::linear_data(60, 15, beta, 1.0, 5);
    const LambdaGrid g = make_lambda_grid(d, 30);
    const PathFit path = solve_path(d, Family::Lasso, 3.0, g);
    for (std::size_t l = 0; l < g.size(); ++l) {
        const SolveResult cold = solve_at_lambda(DenseDesign(d.X()), d.y(), PenaltySpec{Family::Lasso, g[l], 3.0});
        EXPECT_NEAR(path.objective[l], cold.objective, 1e-8);
    }
}

TEST(CrossValidate, Deterministic) {
    const Dataset d = testutil::linear_data(60, 40, VectorXd::LinSpaced(40, 1, 0), 1.0, 8);
    const LambdaGrid g = make_lambda_grid(d, 30);
    const CvResult a = cross_validate(d, Family::MCP, 6.0, g, 5, 42);
    const CvResult b = cross_validate(d, Family::MCP, 6.0, g, 5, 42, SolveOptions{}, 3);
    EXPECT_TRUE(a == b);
    EXPECT_EQ(a.lambda_hat, g[a.index_hat]);
    for (std::size_t l = 0; l < g.size(); ++l) {
        EXPECT_GE(a.cv_mean[l], a.cv_mean[a.index_hat]);
        EXPECT_GE(a.cv_se[l], 0.0);
    }
    const CvResult c = cross_validate(d, Family::MCP, 6.0, g, 5, 43);
    EXPECT_NE(a.fold_of, c.fold_of);
}

TEST(CrossValidate, FoldsAreBalanced) {
    const auto folds = assign_folds(23, 5, 9);
    std::vector<int> count(5, 0);
    for (int f : folds) ++count[static_cast<std::size_t>(f)];
    for (int c : count) EXPECT_TRUE(c == 4 || c == 5);
}

TEST(CrossValidate, RejectsTooFewRows) {
    const Dataset d = testutil::linear_data(9, 3, VectorXd::Ones(3), 1.0, 8);
    const LambdaGrid g = make_lambda_grid(d, 10);
    EXPECT_THROW(cross_validate(d, Family::MCP, 3.0, g, 5, 1), InvalidInput);
    EXPECT_THROW(cross_validate(d, Family::MCP, 3.0, g, 1, 1), InvalidInput);
}

TEST(CrossValidate, PureNoisePicksLargeLambda) {
    int in_top_third = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Dataset d = testutil::linear_data(50, 20, VectorXd::Zero(20), 1.0, 1000 + seed);
        const LambdaGrid g = make_lambda_grid(d, 30);
        const CvResult cv = cross_validate(d, Family::MCP, 6.0, g, 5, seed);
        if (cv.index_hat < 10) ++in_top_third;
    }
    EXPECT_GE(in_top_third, 40);
}

TEST(CrossValidate, StrongSignalBeatsNullModel) {
    const MatrixXd X = orthogonal_design(60, 10, 12);
    Rng rng(1, 1);
    const VectorXd y = X * (VectorXd(10) << 4, -3, 2, 0, 0, 0, 0, 0, 0, 0).finished() + gaussian_vector(60, rng);
    const Dataset d = standardize(Dataset(y, X));
    const LambdaGrid g = make_lambda_grid(d, 30);
    const CvResult cv = cross_validate(d, Family::MCP, 6.0, g, 5, 3);
    EXPECT_LT(cv.cv_mean[cv.index_hat], cv.cv_mean[0]);
}
