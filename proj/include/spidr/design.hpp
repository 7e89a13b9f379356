#pragma once

#include <concepts>
#include <vector>

#include "spidr/core.hpp"

namespace spidr {

/// What the coordinate-descent solver needs from a design matrix. The
/// solver only ever passes vectors living in the column space it works
/// in (the response and residuals), which lets residualized designs skip
/// re-projecting on every inner product.
template <class D>
concept DesignView = requires(const D& d, Index k, const VectorXd& v, VectorXd& w, double a) {
    { d.rows() } -> std::convertible_to<Index>;
    { d.cols() } -> std::convertible_to<Index>;
    { d.dot(k, v) } -> std::convertible_to<double>;
    { d.sqnorm(k) } -> std::convertible_to<double>;
    { d.column(k) } -> std::convertible_to<VectorXd>;
    d.axpy(k, a, w);
};

/// Plain columns of a dense matrix. Holds a reference; the matrix must
/// outlive the view.
class DenseDesign {
public:
    explicit DenseDesign(const MatrixXd& X) : X_(&X), sqnorms_(X.colwise().squaredNorm().transpose()) {}

    Index rows() const { return X_->rows(); }
    Index cols() const { return X_->cols(); }
    double dot(Index k, const VectorXd& v) const { return X_->col(k).dot(v); }
    double sqnorm(Index k) const { return sqnorms_[k]; }
    VectorXd column(Index k) const { return X_->col(k); }
    void axpy(Index k, double a, VectorXd& w) const { w.noalias() += a * X_->col(k); }

private:
    const MatrixXd* X_;
    VectorXd sqnorms_;
};

/// Q_j X_{-j}: every column except j, with x_j projected out. Column k of
/// the view maps to global column global(k). Nothing n x p is formed; each
/// view stores p projection coefficients.
///
/// dot() assumes its argument is orthogonal to x_j, which holds for Q_j y
/// and every residual built from it with axpy().
class ResidualizedDesign {
public:
    ResidualizedDesign(const MatrixXd& X, Index j) : X_(&X), j_(j) {
        if (j < 0 || j >= X.cols()) throw InvalidInput("ResidualizedDesign: column out of range");
        const auto xj = X.col(j);
        const double ss = xj.squaredNorm();
        if (ss == 0.0) throw SingularColumn(j);
        const Index m = X.cols() - 1;
        coef_.resize(m);
        sqnorms_.resize(m);
        for (Index k = 0; k < m; ++k) {
            const auto xk = X.col(global(k));
            const double c = xj.dot(xk);
            coef_[k] = c / ss;
            sqnorms_[k] = std::max(0.0, xk.squaredNorm() - c * c / ss);
        }
    }

    Index rows() const { return X_->rows(); }
    Index cols() const { return X_->cols() - 1; }
    Index held_out() const { return j_; }
    Index global(Index k) const { return k < j_ ? k : k + 1; }
    Index local(Index g) const { return g < j_ ? g : g - 1; }

    double dot(Index k, const VectorXd& v) const { return X_->col(global(k)).dot(v); }
    double sqnorm(Index k) const { return sqnorms_[k]; }
    VectorXd column(Index k) const { return X_->col(global(k)) - coef_[k] * X_->col(j_); }
    void axpy(Index k, double a, VectorXd& w) const {
        w.noalias() += a * X_->col(global(k));
        w.noalias() -= (a * coef_[k]) * X_->col(j_);
    }

    /// Q_j v.
    VectorXd project(const VectorXd& v) const {
        const auto xj = X_->col(j_);
        return v - xj * (xj.dot(v) / xj.squaredNorm());
    }

private:
    const MatrixXd* X_;
    Index j_;
    VectorXd coef_;
    VectorXd sqnorms_;
};

static_assert(DesignView<DenseDesign>);
static_assert(DesignView<ResidualizedDesign>);

}  // namespace spidr
