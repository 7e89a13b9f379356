#include <gtest/gtest.h>

#include <sstream>

#include "spidr/core.hpp"
#include "spidr/io.hpp"
#include "test_util.hpp"

using namespace spidr;
using testutil::gaussian_matrix;
using testutil::gaussian_vector;

namespace {

Dataset raw_random(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed, 1);
    return Dataset(gaussian_vector(n, rng), gaussian_matrix(n, p, rng));
}

}  // namespace

TEST(Dataset, RejectsBadShapes) {
    EXPECT_THROW(Dataset(VectorXd::Zero(1), MatrixXd::Zero(1, 1)), InvalidInput);
    EXPECT_THROW(Dataset(VectorXd::Zero(3), MatrixXd::Zero(3, 0)), InvalidInput);
    EXPECT_THROW(Dataset(VectorXd::Zero(3), MatrixXd::Zero(4, 2)), InvalidInput);
    MatrixXd X = MatrixXd::Ones(3, 2);
    X(1, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(Dataset(VectorXd::Zero(3), X), InvalidInput);
}

TEST(Standardize, ThreePointColumn) {
    MatrixXd X(3, 1);
    X << 1, 2, 3;
    const Dataset s = standardize(Dataset(VectorXd::Ones(3), X));
    EXPECT_NEAR(s.X()(0, 0), -1.224744871391589, 1e-12);
    EXPECT_NEAR(s.X()(1, 0), 0.0, 1e-15);
    EXPECT_NEAR(s.X()(2, 0), 1.224744871391589, 1e-12);
    EXPECT_NEAR(s.x(0).squaredNorm(), 3.0, 1e-12);
}

TEST(Standardize, MeansAndNorms) {
    const Dataset s = standardize(raw_random(40, 7, 3));
    EXPECT_NEAR(s.y().mean(), 0.0, 1e-14);
    for (Index j = 0; j < s.p(); ++j) {
        EXPECT_NEAR(s.x(j).mean(), 0.0, 1e-14);
        EXPECT_NEAR(s.x(j).squaredNorm() / 40.0, 1.0, 1e-10);
        EXPECT_NEAR(s.col_norms()[j], std::sqrt(40.0), 1e-10);
    }
    EXPECT_TRUE(s.standardized());
}

TEST(Standardize, Idempotent) {
    const Dataset once = standardize(raw_random(25, 5, 4));
    const Dataset twice = standardize(once);
    EXPECT_LE((once.X() - twice.X()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((once.y() - twice.y()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((once.x_scale() - twice.x_scale()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Standardize, ConstantColumnFlagged) {
    MatrixXd X(4, 2);
    X << 5, 1, 5, 2, 5, 0, 5, 4;
    const Dataset s = standardize(Dataset(VectorXd::LinSpaced(4, 0, 3), X));
    EXPECT_TRUE(s.excluded(0));
    EXPECT_FALSE(s.excluded(1));
    EXPECT_EQ(s.n_excluded(), 1);
    EXPECT_TRUE(s.X().allFinite());
    EXPECT_EQ(s.x(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Standardize, BackTransformReproducesPredictions) {
    const Dataset raw = raw_random(30, 4, 5);
    const Dataset s = standardize(raw);
    const IndexSet all{0, 1, 2, 3};
    const VectorXd b_std = ols_fit(s.y(), all, s);
    const auto [intercept, b] = s.to_original_scale(b_std);

    MatrixXd Z(30, 5);
    Z.col(0).setOnes();
    Z.rightCols(4) = raw.X();
    const VectorXd direct = Z.colPivHouseholderQr().solve(raw.y());
    const VectorXd pred_direct = Z * direct;
    const VectorXd pred = (raw.X() * b).array() + intercept;
    EXPECT_LE((pred - pred_direct).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ProjectOutColumn, Identities) {
    const Dataset s = standardize(raw_random(20, 3, 6));
    const VectorXd xj = s.x(1);
    EXPECT_LE(project_out_column(xj, 1, s).cwiseAbs().maxCoeff(), 1e-12);

    Rng rng(9, 0);
    const VectorXd v = gaussian_vector(20, rng);
    const VectorXd w = project_out_column(v, 1, s);  // orthogonal to x_1
    EXPECT_LE((project_out_column(w, 1, s) - w).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((project_out_column(VectorXd(xj + w), 1, s) - w).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProjectOutColumn, SingularColumnThrows) {
    MatrixXd X(4, 2);
    X << 5, 1, 5, 2, 5, 0, 5, 4;
    const Dataset s = standardize(Dataset(VectorXd::LinSpaced(4, 0, 3), X));
    EXPECT_THROW(project_out_column(s.y(), 0, s), SingularColumn);
}

TEST(ProjectOutColumn, PropertyIdempotentAndOrthogonal) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Dataset s = standardize(raw_random(15, 4, 100 + seed));
        Rng rng(seed, 3);
        const VectorXd v = 10.0 * gaussian_vector(15, rng);
        const Index j = static_cast<Index>(seed % 4);
        const VectorXd once = project_out_column(v, j, s);
        EXPECT_LE((project_out_column(once, j, s) - once).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(std::abs(s.x(j).dot(once)), 1e-8 * v.norm() * s.x(j).norm());
    }
}

TEST(ProjectOutSet, EmptyAndSpan) {
    const Dataset s = standardize(raw_random(12, 5, 7));
    Rng rng(1, 1);
    const VectorXd v = gaussian_vector(12, rng);
    EXPECT_EQ(project_out_set(v, IndexSet{}, s), v);
    const VectorXd in_span = 2.0 * s.x(0) - 0.5 * s.x(3) + s.x(4);
    EXPECT_LE(project_out_set(in_span, IndexSet{0, 3, 4}, s).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ProjectOutSet, MatchesDenseNormalEquations) {
    const Dataset s = standardize(raw_random(10, 6, 8));
    Rng rng(2, 1);
    const VectorXd v = gaussian_vector(10, rng);
    const IndexSet A{1, 2, 5};
    const VectorXd expected = testutil::dense_projection_residual(v, gather_columns(s.X(), A));
    EXPECT_LE((project_out_set(v, A, s) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ProjectOutSet, RankDeficientSetGivesProjectionResidual) {
    Rng rng(5, 5);
    MatrixXd X = gaussian_matrix(12, 3, rng);
    X.col(2) = X.col(0) + X.col(1);
    const Dataset s = standardize(Dataset(gaussian_vector(12, rng), X));
    const VectorXd v = gaussian_vector(12, rng);
    const VectorXd r = project_out_set(v, IndexSet{0, 1, 2}, s);
    const VectorXd expected = testutil::dense_projection_residual(v, gather_columns(s.X(), IndexSet{0, 1}));
    EXPECT_LE((r - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ProjectOutSet, PropertyContraction) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Dataset s = standardize(raw_random(10, 6, 300 + seed));
        Rng rng(seed, 4);
        const VectorXd v = gaussian_vector(10, rng);
        std::vector<Index> idx;
        for (Index j = 0; j < 6; ++j)
            if (rng.uniform() < 0.5) idx.push_back(j);
        EXPECT_LE(project_out_set(v, IndexSet(idx), s).norm(), v.norm() * (1.0 + 1e-12));
    }
}

TEST(OlsFit, OrthonormalDesign) {
    MatrixXd X(4, 2);
    X << 1, 1, 1, -1, -1, 1, -1, -1;
    const Dataset s = standardize(Dataset((VectorXd(4) << 3, 1, -2, 0.5).finished(), X));
    const VectorXd b = ols_fit(s.y(), IndexSet{0, 1}, s);
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(b[j], s.x(j).dot(s.y()) / s.x(j).squaredNorm(), 1e-12);
}

TEST(OlsFit, ExactLinearData) {
    Rng rng(11, 0);
    MatrixXd X = gaussian_matrix(20, 3, rng);
    const VectorXd beta = (VectorXd(3) << 1.5, -2.0, 0.25).finished();
    const Dataset d(X * beta, X);
    EXPECT_LE((ols_fit(d.y(), IndexSet{0, 1, 2}, d) - beta).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OlsFit, MatchesNormalEquations) {
    const Dataset s = standardize(raw_random(20, 6, 12));
    const IndexSet A{0, 2, 3, 5};
    const MatrixXd XA = gather_columns(s.X(), A);
    const VectorXd expected = (XA.transpose() * XA).inverse() * (XA.transpose() * s.y());
    EXPECT_LE((ols_fit(s.y(), A, s) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(IndexSet, SortedDistinctAndBounds) {
    const IndexSet s(std::vector<Index>{4, 1, 4, 2});
    EXPECT_EQ(s.indices(), (std::vector<Index>{1, 2, 4}));
    EXPECT_TRUE(s.contains(2));
    EXPECT_FALSE(s.contains(3));
    EXPECT_EQ(s.without(2), (IndexSet{1, 4}));
    EXPECT_THROW(s.check_bounds(4), InvalidInput);
    EXPECT_NO_THROW(s.check_bounds(5));
    EXPECT_THROW(IndexSet(std::vector<Index>{-1}), InvalidInput);
    EXPECT_TRUE(is_subset(IndexSet{1, 4}, s));
    EXPECT_FALSE(is_subset(IndexSet{0}, s));
}

TEST(Csv, ParsesHeaderAndRows) {
    std::istringstream in("y,a,b\n1,2,3\n\n4,5.5,-6e-3\r\n");
    const CsvTable t = parse_csv(in, true);
    EXPECT_EQ(t.header, (std::vector<std::string>{"y", "a", "b"}));
    EXPECT_EQ(t.data.n(), 2);
    EXPECT_EQ(t.data.p(), 2);
    EXPECT_EQ(t.data.y()[1], 4.0);
    EXPECT_EQ(t.data.X()(1, 1), -6e-3);
}

TEST(Csv, MalformedRowReportsLine) {
    std::istringstream bad_number("1,2\n3,abc\n");
    try {
        parse_csv(bad_number, false);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    std::istringstream ragged("y,x\n1,2\n3,4,5\n");
    try {
        parse_csv(ragged, true);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    std::istringstream nan_field("1,2\nnan,4\n");
    EXPECT_THROW(parse_csv(nan_field, false), IoError);
}

TEST(Csv, RoundTripIsExact) {
    const Dataset d = raw_random(9, 3, 13);
    std::stringstream buf;
    write_csv(buf, d);
    const CsvTable t = parse_csv(buf, false);
    EXPECT_EQ(t.data.y(), d.y());
    EXPECT_EQ(t.data.X(), d.X());
}
