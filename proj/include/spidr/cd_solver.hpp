#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "spidr/core.hpp"
#include "spidr/design.hpp"
#include "spidr/parallel.hpp"
#include "spidr/penalty.hpp"
#include "spidr/rng.hpp"

namespace spidr {

struct SolveOptions {
    Tolerances tol = default_tolerances();
    /// Re-solve the stationarity equations on the final support and sign
    /// pattern. Accepted only if the pattern, inactive KKT conditions and
    /// objective all survive; gives a machine-precision stationary point.
    bool polish = true;
    bool record_trace = false;  ///< keep the objective after every sweep
};

struct SolveResult {
    VectorXd beta;
    IndexSet active;
    double objective = 0.0;
    long sweeps = 0;
    bool converged = false;
    bool polished = false;
    double kkt_violation = 0.0;
    std::vector<double> trace;
};

/// (1/2n)||r||^2 + sum_k rho(b_k).
inline double penalized_objective(const VectorXd& residual, const VectorXd& beta, const PenaltySpec& spec) {
    double pen = 0.0;
    for (Index k = 0; k < beta.size(); ++k) pen += penalty_value(beta[k], spec);
    return residual.squaredNorm() / (2.0 * static_cast<double>(residual.size())) + pen;
}

template <DesignView D>
VectorXd design_residual(const D& X, const VectorXd& y, const VectorXd& beta) {
    VectorXd r = y;
    for (Index k = 0; k < beta.size(); ++k)
        if (beta[k] != 0.0) X.axpy(k, -beta[k], r);
    return r;
}

/// Largest violation of the stationarity conditions of the penalized
/// criterion at beta. Columns with zero curvature are ignored.
template <DesignView D>
double kkt_violation(const D& X, const VectorXd& y, const VectorXd& beta, const PenaltySpec& spec,
                     const Tolerances& tol = default_tolerances()) {
    const double n = static_cast<double>(X.rows());
    const VectorXd r = design_residual(X, y, beta);
    double worst = 0.0;
    for (Index k = 0; k < X.cols(); ++k) {
        if (X.sqnorm(k) / n <= tol.dead_column) continue;
        const double g = X.dot(k, r) / n;
        const double v = beta[k] != 0.0 ? std::abs(-g + penalty_derivative(beta[k], spec))
                                        : std::max(0.0, std::abs(g) - spec.lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

namespace detail {

// Solves the stationarity system on the current support with the sign and
// MCP-region pattern held fixed. Returns false (leaving beta alone) when
// the system is singular or the solution breaks the pattern.
template <DesignView D>
bool polish_support(const D& X, const VectorXd& y, const PenaltySpec& spec, const Tolerances& tol,
                    VectorXd& beta, VectorXd& r, double& objective) {
    const IndexSet A = IndexSet::support(beta);
    const auto m = static_cast<Index>(A.size());
    if (m == 0 || m >= X.rows()) return false;
    const double n = static_cast<double>(X.rows());
    const double knot = spec.gamma * spec.lambda;

    MatrixXd C(X.rows(), m);
    for (Index i = 0; i < m; ++i) C.col(i) = X.column(A[static_cast<std::size_t>(i)]);
    MatrixXd M = C.transpose() * C / n;
    VectorXd rhs(m);
    std::vector<bool> inner(static_cast<std::size_t>(m), false);
    for (Index i = 0; i < m; ++i) {
        const Index k = A[static_cast<std::size_t>(i)];
        rhs[i] = X.dot(k, y) / n;
        const double s = sign(beta[k]);
        if (spec.family == Family::Lasso) {
            rhs[i] -= spec.lambda * s;
        } else if (std::abs(beta[k]) < knot) {
            inner[static_cast<std::size_t>(i)] = true;
            M(i, i) -= 1.0 / spec.gamma;
            rhs[i] -= spec.lambda * s;
        }
    }
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible()) return false;
    const VectorXd b = lu.solve(rhs);
    if (!b.allFinite() || (M * b - rhs).norm() > 1e-10 * (1.0 + rhs.norm())) return false;

    for (Index i = 0; i < m; ++i) {
        const Index k = A[static_cast<std::size_t>(i)];
        if (sign(b[i]) != sign(beta[k])) return false;
        if (spec.family == Family::MCP && inner[static_cast<std::size_t>(i)] != (std::abs(b[i]) < knot))
            return false;
    }

    VectorXd candidate = VectorXd::Zero(beta.size());
    for (Index i = 0; i < m; ++i) candidate[A[static_cast<std::size_t>(i)]] = b[i];
    VectorXd r_new = y - C * b;
    for (Index k = 0; k < X.cols(); ++k) {
        if (candidate[k] != 0.0 || X.sqnorm(k) / n <= tol.dead_column) continue;
        if (std::abs(X.dot(k, r_new) / n) > spec.lambda + tol.kkt) return false;
    }
    const double obj_new = penalized_objective(r_new, candidate, spec);
    if (obj_new > objective + 1e-12 * (1.0 + std::abs(objective))) return false;

    beta = std::move(candidate);
    r = std::move(r_new);
    objective = obj_new;
    return true;
}

}  // namespace detail

/// Minimizes (1/2n)||y - X b||^2 + sum_k rho(b_k) by cyclic coordinate
/// descent with an active-set strategy:
///   full sweep -> sweep the ever-active set until max |delta b| < tol ->
///   full sweep again; stop when a full sweep neither moves a coefficient
///   by tol nor activates a new one.
/// Non-convergence is reported through `converged`, never thrown.
template <DesignView D>
SolveResult solve_at_lambda(const D& X, const VectorXd& y, const PenaltySpec& spec,
                            const VectorXd& warm_start = VectorXd(), const SolveOptions& opt = {}) {
    spec.validate();
    const Index n = X.rows();
    const Index p = X.cols();
    if (y.size() != n) throw InvalidInput("solve_at_lambda: response length mismatch");
    if (warm_start.size() != 0 && warm_start.size() != p)
        throw InvalidInput("solve_at_lambda: warm start length mismatch");
    const double nd = static_cast<double>(n);
    const Tolerances& tol = opt.tol;

    VectorXd d(p);
    std::vector<bool> dead(static_cast<std::size_t>(p));
    for (Index k = 0; k < p; ++k) {
        d[k] = X.sqnorm(k) / nd;
        dead[static_cast<std::size_t>(k)] = d[k] <= tol.dead_column;
    }

    SolveResult res;
    res.beta = warm_start.size() == p ? warm_start : VectorXd::Zero(p);
    for (Index k = 0; k < p; ++k)
        if (dead[static_cast<std::size_t>(k)]) res.beta[k] = 0.0;
    VectorXd r = design_residual(X, y, res.beta);

    std::vector<bool> ever_active(static_cast<std::size_t>(p), false);
    std::vector<Index> active_list;
    for (Index k = 0; k < p; ++k)
        if (res.beta[k] != 0.0) {
            ever_active[static_cast<std::size_t>(k)] = true;
            active_list.push_back(k);
        }

    auto& b = res.beta;
    auto update = [&](Index k) -> double {
        const double old = b[k];
        const double z = X.dot(k, r) / nd + d[k] * old;
        const double nb = univariate_minimizer(z, d[k], spec);
        if (nb == old) return 0.0;
        X.axpy(k, old - nb, r);
        b[k] = nb;
        return std::abs(nb - old);
    };
    auto note_sweep = [&] {
        ++res.sweeps;
        if (opt.record_trace) res.trace.push_back(penalized_objective(r, b, spec));
    };

    while (res.sweeps < tol.cd_max_sweeps) {
        double max_change = 0.0;
        bool activated = false;
        for (Index k = 0; k < p; ++k) {
            if (dead[static_cast<std::size_t>(k)]) continue;
            max_change = std::max(max_change, update(k));
            if (b[k] != 0.0 && !ever_active[static_cast<std::size_t>(k)]) {
                ever_active[static_cast<std::size_t>(k)] = true;
                active_list.push_back(k);
                activated = true;
            }
        }
        note_sweep();
        if (max_change < tol.cd_coef_change && !activated) {
            res.converged = true;
            break;
        }
        std::sort(active_list.begin(), active_list.end());
        while (res.sweeps < tol.cd_max_sweeps) {
            double inner_change = 0.0;
            for (Index k : active_list) inner_change = std::max(inner_change, update(k));
            note_sweep();
            if (inner_change < tol.cd_coef_change) break;
        }
    }

    res.objective = penalized_objective(r, b, spec);
    if (opt.polish && res.converged) res.polished = detail::polish_support(X, y, spec, tol, b, r, res.objective);
    res.active = IndexSet::support(b);
    res.kkt_violation = kkt_violation(X, y, b, spec, tol);
    return res;
}

/// Decreasing, log-spaced penalty values from lambda_max down to
/// min_ratio * lambda_max.
struct LambdaGrid {
    std::vector<double> values;
    double min_ratio = 0.05;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    static LambdaGrid from_values(std::vector<double> v) {
        if (v.empty()) throw InvalidInput("LambdaGrid: empty grid");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(v[i] > 0.0)) throw InvalidInput("LambdaGrid: values must be positive");
            if (i > 0 && !(v[i] < v[i - 1])) throw InvalidInput("LambdaGrid: values must strictly decrease");
        }
        LambdaGrid g;
        g.min_ratio = v.back() / v.front();
        g.values = std::move(v);
        return g;
    }
};

/// max_j |x_j'y| / n: the smallest lambda whose solution is all zero.
template <DesignView D>
double lambda_max(const D& X, const VectorXd& y) {
    double best = 0.0;
    for (Index k = 0; k < X.cols(); ++k) best = std::max(best, std::abs(X.dot(k, y)));
    return best / static_cast<double>(X.rows());
}

/// Default min_ratio: 0.05 when p > n, else 0.001.
inline double default_min_ratio(Index n, Index p) { return p > n ? 0.05 : 0.001; }

inline LambdaGrid make_lambda_grid(double lmax, std::size_t n_lambda, double min_ratio) {
    if (!(lmax > 0.0)) throw InvalidInput("lambda grid: lambda_max is zero (response orthogonal to all predictors)");
    if (n_lambda < 2) throw InvalidInput("lambda grid: need at least 2 values");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw InvalidInput("lambda grid: min_ratio must lie in (0,1)");
    LambdaGrid g;
    g.min_ratio = min_ratio;
    g.values.resize(n_lambda);
    const double step = std::log(min_ratio) / static_cast<double>(n_lambda - 1);
    for (std::size_t i = 0; i < n_lambda; ++i) g.values[i] = lmax * std::exp(step * static_cast<double>(i));
    g.values.back() = lmax * min_ratio;
    return g;
}

inline LambdaGrid make_lambda_grid(const Dataset& data, std::size_t n_lambda = 100,
                                   std::optional<double> min_ratio = std::nullopt) {
    return make_lambda_grid(lambda_max(DenseDesign(data.X()), data.y()), n_lambda,
                            min_ratio.value_or(default_min_ratio(data.n(), data.p())));
}

/// Coefficients over a lambda grid; column l of `betas` belongs to grid[l].
struct PathFit {
    LambdaGrid grid;
    MatrixXd betas;
    std::vector<IndexSet> active_sets;
    std::vector<double> objective;
    std::vector<long> sweeps;
    std::vector<bool> converged;

    bool all_converged() const { return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; }); }
};

/// Solves along the grid, warm-starting each lambda from the previous one.
template <DesignView D>
PathFit solve_path(const D& X, const VectorXd& y, Family family, double gamma, const LambdaGrid& grid,
                   const SolveOptions& opt = {}, VectorXd warm = VectorXd()) {
    PathFit fit;
    fit.grid = grid;
    fit.betas.resize(X.cols(), static_cast<Index>(grid.size()));
    for (std::size_t l = 0; l < grid.size(); ++l) {
        SolveResult s = solve_at_lambda(X, y, PenaltySpec{family, grid[l], gamma}, warm, opt);
        fit.betas.col(static_cast<Index>(l)) = s.beta;
        fit.active_sets.push_back(s.active);
        fit.objective.push_back(s.objective);
        fit.sweeps.push_back(s.sweeps);
        fit.converged.push_back(s.converged);
        warm = std::move(s.beta);
    }
    return fit;
}

inline PathFit solve_path(const Dataset& data, Family family, double gamma, const LambdaGrid& grid,
                          const SolveOptions& opt = {}) {
    return solve_path(DenseDesign(data.X()), data.y(), family, gamma, grid, opt);
}

struct CvResult {
    std::vector<double> lambdas;
    std::vector<double> cv_mean;
    std::vector<double> cv_se;
    double lambda_hat = 0.0;
    std::size_t index_hat = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;  ///< fold id per observation

    friend bool operator==(const CvResult&, const CvResult&) = default;
};

/// Seeded fold labels: shuffle the rows, then deal them round-robin.
inline std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed) {
    Rng rng(seed, 0xcf01d5);
    const auto perm = random_permutation(n, rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i)
        fold[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
    return fold;
}

/// k-fold cross-validation of the fully penalized criterion. Each fold
/// fits the whole path on its training rows and scores squared prediction
/// error on the held-out rows. lambda_hat minimizes the mean fold MSE;
/// ties go to the larger lambda.
inline CvResult cross_validate(const Dataset& data, Family family, double gamma, const LambdaGrid& grid,
                               int n_folds, std::uint64_t seed, const SolveOptions& opt = {},
                               unsigned threads = 1) {
    if (n_folds < 2) throw InvalidInput("cross_validate: need at least 2 folds");
    if (data.n() < 2 * static_cast<Index>(n_folds))
        throw InvalidInput("cross_validate: every fold needs at least 2 observations");

    CvResult cv;
    cv.seed = seed;
    cv.lambdas = grid.values;
    cv.fold_of = assign_folds(data.n(), n_folds, seed);
    const auto L = static_cast<Index>(grid.size());
    MatrixXd fold_mse(n_folds, L);

    parallel_for(n_folds, threads, [&](Index f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < data.n(); ++i)
            (cv.fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const MatrixXd Xtr = data.X()(train, Eigen::all);
        const VectorXd ytr = data.y()(train);
        const MatrixXd Xte = data.X()(test, Eigen::all);
        const VectorXd yte = data.y()(test);
        const PathFit path = solve_path(DenseDesign(Xtr), ytr, family, gamma, grid, opt);
        const MatrixXd resid = (Xte * path.betas).colwise() - yte;
        fold_mse.row(f) = resid.colwise().squaredNorm() / static_cast<double>(test.size());
    });

    cv.cv_mean.resize(grid.size());
    cv.cv_se.resize(grid.size());
    const double k = n_folds;
    for (Index l = 0; l < L; ++l) {
        const auto col = fold_mse.col(l);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / (k - 1.0);
        cv.cv_mean[static_cast<std::size_t>(l)] = mean;
        cv.cv_se[static_cast<std::size_t>(l)] = std::sqrt(var / k);
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < grid.size(); ++l)
        if (cv.cv_mean[l] < cv.cv_mean[best]) best = l;
    cv.index_hat = best;
    cv.lambda_hat = grid[best];
    return cv;
}

}  // namespace spidr
