#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spidr/config.hpp"

namespace spidr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised for malformed arguments: bad shapes, non-finite data, out of
/// range levels.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a projection is requested onto a zero-norm column.
class SingularColumn : public std::runtime_error {
public:
    explicit SingularColumn(Index j)
        : std::runtime_error("column " + std::to_string(j) + " has zero norm"), column(j) {}
    Index column;
};

/// Sorted set of distinct 0-based column indices.
class IndexSet {
public:
    IndexSet() = default;
    IndexSet(std::initializer_list<Index> idx) : IndexSet(std::vector<Index>(idx)) {}
    explicit IndexSet(std::vector<Index> idx) : idx_(std::move(idx)) {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
        if (!idx_.empty() && idx_.front() < 0) throw InvalidInput("IndexSet: negative index");
    }

    /// Indices k with |v_k| > 0.
    static IndexSet support(const VectorXd& v) {
        std::vector<Index> s;
        for (Index k = 0; k < v.size(); ++k)
            if (v[k] != 0.0) s.push_back(k);
        return IndexSet(std::move(s));
    }

    void check_bounds(Index p) const {
        if (!idx_.empty() && idx_.back() >= p)
            throw InvalidInput("IndexSet: index " + std::to_string(idx_.back()) + " out of range");
    }

    bool contains(Index k) const { return std::binary_search(idx_.begin(), idx_.end(), k); }
    IndexSet without(Index k) const {
        std::vector<Index> out;
        out.reserve(idx_.size());
        for (Index i : idx_)
            if (i != k) out.push_back(i);
        return IndexSet(std::move(out));
    }

    std::size_t size() const { return idx_.size(); }
    bool empty() const { return idx_.empty(); }
    Index operator[](std::size_t i) const { return idx_[i]; }
    auto begin() const { return idx_.begin(); }
    auto end() const { return idx_.end(); }
    const std::vector<Index>& indices() const { return idx_; }

    friend bool operator==(const IndexSet&, const IndexSet&) = default;

private:
    std::vector<Index> idx_;
};

inline bool is_subset(const IndexSet& a, const IndexSet& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

/// Response vector and predictor matrix. Immutable once built; the
/// centering/scaling record maps standardized coefficients back to the
/// scale of the data that was originally loaded.
class Dataset {
public:
    Dataset(VectorXd y, MatrixXd X) : y_(std::move(y)), X_(std::move(X)) {
        if (X_.rows() != y_.size()) throw InvalidInput("Dataset: X rows must match length of y");
        if (y_.size() < 2) throw InvalidInput("Dataset: need n >= 2 observations");
        if (X_.cols() < 1) throw InvalidInput("Dataset: need p >= 1 predictors");
        if (!y_.allFinite() || !X_.allFinite()) throw InvalidInput("Dataset: non-finite entries");
        col_norms_ = X_.colwise().norm().transpose();
        excluded_.assign(static_cast<std::size_t>(X_.cols()), false);
        x_center_ = VectorXd::Zero(X_.cols());
        x_scale_ = VectorXd::Ones(X_.cols());
    }

    Index n() const { return X_.rows(); }
    Index p() const { return X_.cols(); }
    const VectorXd& y() const { return y_; }
    const MatrixXd& X() const { return X_; }
    auto x(Index j) const { return X_.col(j); }
    const VectorXd& col_norms() const { return col_norms_; }
    bool standardized() const { return standardized_; }
    bool excluded(Index j) const { return excluded_[static_cast<std::size_t>(j)]; }
    Index n_excluded() const { return std::count(excluded_.begin(), excluded_.end(), true); }

    double y_center() const { return y_center_; }
    const VectorXd& x_center() const { return x_center_; }
    const VectorXd& x_scale() const { return x_scale_; }

    /// Coefficients fitted on this (standardized) data expressed on the
    /// original scale. Returns {intercept, slopes}.
    std::pair<double, VectorXd> to_original_scale(const VectorXd& beta) const {
        VectorXd b = beta.cwiseQuotient(x_scale_);
        return {y_center_ - x_center_.dot(b), b};
    }

    /// Same, for standard errors (no intercept involved).
    VectorXd se_to_original_scale(const VectorXd& se) const { return se.cwiseQuotient(x_scale_); }

private:
    friend Dataset standardize(const Dataset&, const Tolerances&);

    VectorXd y_;
    MatrixXd X_;
    VectorXd col_norms_;
    std::vector<bool> excluded_;
    bool standardized_ = false;
    double y_center_ = 0.0;
    VectorXd x_center_;
    VectorXd x_scale_;
};

/// Center y and every column of X, then scale columns so ||x_j||^2 = n.
/// Constant columns become all-zero and are flagged excluded.
inline Dataset standardize(const Dataset& data, const Tolerances& tol = default_tolerances()) {
    Dataset out = data;
    const Index n = data.n();
    const double nd = static_cast<double>(n);

    const double ymean = out.y_.mean();
    out.y_.array() -= ymean;
    out.y_center_ = data.y_center_ + ymean;

    for (Index j = 0; j < data.p(); ++j) {
        auto col = out.X_.col(j);
        const double mean = col.mean();
        col.array() -= mean;
        const double ss = col.squaredNorm();
        const double sd = std::sqrt(ss / nd);
        const double ref = std::max(1.0, data.X_.col(j).cwiseAbs().maxCoeff());
        const auto uj = static_cast<std::size_t>(j);
        if (sd <= tol.constant_column * ref) {
            col.setZero();
            out.excluded_[uj] = true;
            out.x_center_[j] = data.x_center_[j] + data.x_scale_[j] * mean;
            continue;
        }
        // Skip rescaling when the column already satisfies the norm
        // convention, so that standardize() is idempotent.
        double scale = sd;
        if (std::abs(ss - nd) <= tol.standardize_rel * nd) scale = 1.0;
        col /= scale;
        out.x_center_[j] = data.x_center_[j] + data.x_scale_[j] * mean;
        out.x_scale_[j] = data.x_scale_[j] * scale;
    }
    out.col_norms_ = out.X_.colwise().norm().transpose();
    out.standardized_ = true;
    return out;
}

/// Q_j v = v - x_j (x_j'v)/(x_j'x_j), computed as a rank-1 update.
inline VectorXd project_out_column(const VectorXd& v, Index j, const Dataset& data) {
    if (v.size() != data.n()) throw InvalidInput("project_out_column: length mismatch");
    const auto xj = data.x(j);
    const double ss = xj.squaredNorm();
    if (data.excluded(j) || ss == 0.0) throw SingularColumn(j);
    return v - xj * (xj.dot(v) / ss);
}

/// Columns of X indexed by A, as a dense n x |A| matrix.
inline MatrixXd gather_columns(const MatrixXd& X, const IndexSet& A) {
    MatrixXd out(X.rows(), static_cast<Index>(A.size()));
    for (std::size_t i = 0; i < A.size(); ++i) out.col(static_cast<Index>(i)) = X.col(A[i]);
    return out;
}

/// Minimum-norm least-squares solution of min ||b - A x||.
inline VectorXd min_norm_solve(const MatrixXd& A, const VectorXd& b,
                               const Tolerances& tol = default_tolerances()) {
    if (A.cols() == 0) return VectorXd(0);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A.rows(), A.cols());
    cod.setThreshold(tol.rank_rel);
    cod.compute(A);
    return cod.solve(b);
}

/// Residual of v after least squares on the columns in A (Q_A v). Works
/// for rank-deficient X_A: the result is the orthogonal-projection residual.
inline VectorXd project_out_set(const VectorXd& v, const IndexSet& A, const Dataset& data,
                                const Tolerances& tol = default_tolerances()) {
    if (v.size() != data.n()) throw InvalidInput("project_out_set: length mismatch");
    if (A.empty()) return v;
    A.check_bounds(data.p());
    const MatrixXd XA = gather_columns(data.X(), A);
    return v - XA * min_norm_solve(XA, v, tol);
}

/// Least-squares coefficients of y on X_A (minimum norm when rank deficient).
inline VectorXd ols_fit(const VectorXd& y, const IndexSet& A, const Dataset& data,
                        const Tolerances& tol = default_tolerances()) {
    if (y.size() != data.n()) throw InvalidInput("ols_fit: length mismatch");
    A.check_bounds(data.p());
    return min_norm_solve(gather_columns(data.X(), A), y, tol);
}

}  // namespace spidr
