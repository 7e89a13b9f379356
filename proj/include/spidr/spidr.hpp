#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "spidr/cd_solver.hpp"
#include "spidr/core.hpp"
#include "spidr/design.hpp"
#include "spidr/parallel.hpp"
#include "spidr/penalty.hpp"
#include "spidr/rng.hpp"

namespace spidr {

/// Result of the semi-penalized fit for one coefficient j: every other
/// coefficient is penalized, beta_j is not.
struct CoefficientFit {
    double beta = 0.0;
    IndexSet support;          ///< companion set: nonzero penalized coefficients (global indices)
    VectorXd beta_on_support;  ///< their values, aligned with `support`
    bool converged = true;
    bool excluded = false;     ///< constant column, no estimate
    long sweeps = 0;
};

/// Semi-penalized estimate of beta_j.
///
/// The penalized part solves the residualized problem
///     min (1/2n)||Q_j y - Q_j X_{-j} b||^2 + sum_k rho(b_k)
/// with Q_j = I - x_j x_j'/||x_j||^2 applied column by column on the fly;
/// beta_j is then the least-squares coefficient of y - X_{-j} b on x_j.
/// `warm_full` (length p, entry j ignored) seeds the inner solver; the
/// full-data penalized fit at the same lambda is the natural choice.
inline CoefficientFit fit_one(Index j, const Dataset& data, const PenaltySpec& spec,
                              const VectorXd& warm_full = VectorXd(), const SolveOptions& opt = {}) {
    if (j < 0 || j >= data.p()) throw InvalidInput("fit_one: column index out of range");
    CoefficientFit out;
    if (data.excluded(j) || data.col_norms()[j] == 0.0) {
        out.excluded = true;
        return out;
    }
    const auto xj = data.x(j);
    const double ssj = xj.squaredNorm();

    VectorXd resid = data.y();
    if (data.p() > 1) {
        const ResidualizedDesign design(data.X(), j);
        VectorXd warm;
        if (warm_full.size() == data.p()) {
            warm.resize(data.p() - 1);
            for (Index k = 0; k < warm.size(); ++k) warm[k] = warm_full[design.global(k)];
        }
        const SolveResult s = solve_at_lambda(design, design.project(data.y()), spec, warm, opt);
        out.converged = s.converged;
        out.sweeps = s.sweeps;
        std::vector<Index> support;
        for (Index k : s.active) support.push_back(design.global(k));
        out.support = IndexSet(std::move(support));
        out.beta_on_support.resize(static_cast<Index>(out.support.size()));
        for (std::size_t i = 0; i < out.support.size(); ++i) {
            const double b = s.beta[design.local(out.support[i])];
            out.beta_on_support[static_cast<Index>(i)] = b;
            resid.noalias() -= b * data.x(out.support[i]);
        }
    }
    out.beta = xj.dot(resid) / ssj;
    return out;
}

/// beta_j(lambda) over a whole grid, warm-starting the residualized
/// problem from one grid point to the next.
inline VectorXd semi_penalized_path(Index j, const Dataset& data, Family family, double gamma,
                                    const LambdaGrid& grid, const SolveOptions& opt = {}) {
    if (j < 0 || j >= data.p()) throw InvalidInput("semi_penalized_path: column index out of range");
    VectorXd out = VectorXd::Constant(static_cast<Index>(grid.size()), std::numeric_limits<double>::quiet_NaN());
    if (data.excluded(j) || data.col_norms()[j] == 0.0) return out;
    const auto xj = data.x(j);
    const double ssj = xj.squaredNorm();
    if (data.p() == 1) return out.setConstant(xj.dot(data.y()) / ssj);

    const ResidualizedDesign design(data.X(), j);
    const PathFit path = solve_path(design, design.project(data.y()), family, gamma, grid, opt);
    for (std::size_t l = 0; l < grid.size(); ++l) {
        VectorXd resid = data.y();
        for (Index k : path.active_sets[l])
            resid.noalias() -= path.betas(k, static_cast<Index>(l)) * data.x(design.global(k));
        out[static_cast<Index>(l)] = xj.dot(resid) / ssj;
    }
    return out;
}

/// Per-coefficient estimates for the whole design plus, once
/// attach_inference() has run, standard errors and z-statistics.
struct SpidrFit {
    PenaltySpec spec;
    VectorXd beta_hat;
    std::vector<IndexSet> supports;
    std::vector<VectorXd> beta_on_support;
    std::vector<bool> converged;
    std::vector<bool> excluded;
    std::vector<long> sweeps;

    // filled by attach_inference()
    bool has_inference = false;
    double sigma2_hat = std::numeric_limits<double>::quiet_NaN();
    VectorXd se;
    VectorXd z;
    VectorXd precision;          ///< x_j'Q_{S_j}x_j
    std::vector<bool> collinear;

    Index p() const { return beta_hat.size(); }
    double lambda_hat() const { return spec.lambda; }
    bool usable(Index j) const {
        const auto u = static_cast<std::size_t>(j);
        return !excluded[u] && (!has_inference || !collinear[u]);
    }
    Index n_unconverged() const { return std::count(converged.begin(), converged.end(), false); }
};

/// fit_one for every j. Each j is independent and seeded from the same
/// warm start, so the result does not depend on thread count or order.
inline SpidrFit fit_all(const Dataset& data, const PenaltySpec& spec, const VectorXd& warm_full = VectorXd(),
                        const SolveOptions& opt = {}, unsigned threads = 1) {
    spec.validate();
    const Index p = data.p();
    std::vector<CoefficientFit> parts(static_cast<std::size_t>(p));
    parallel_for(p, threads, [&](Index j) { parts[static_cast<std::size_t>(j)] = fit_one(j, data, spec, warm_full, opt); });

    SpidrFit fit;
    fit.spec = spec;
    fit.beta_hat.resize(p);
    for (Index j = 0; j < p; ++j) {
        auto& part = parts[static_cast<std::size_t>(j)];
        fit.beta_hat[j] = part.beta;
        fit.supports.push_back(std::move(part.support));
        fit.beta_on_support.push_back(std::move(part.beta_on_support));
        fit.converged.push_back(part.converged);
        fit.excluded.push_back(part.excluded);
        fit.sweeps.push_back(part.sweeps);
    }
    return fit;
}

/// Recomputes beta_j from the companion set through
///     (x_j'Q_S x_j)^{-1} x_j'[Q_S y + X_S Sigma_S^{-1} rho'(beta_S)],
/// Sigma_S = X_S'X_S/n, and returns |difference| against the fitted value.
/// nullopt when Sigma_S is singular or the coefficient has no estimate.
inline std::optional<double> alternative_expression_check(Index j, const SpidrFit& fit, const Dataset& data,
                                                          const PenaltySpec& spec,
                                                          const Tolerances& tol = default_tolerances()) {
    const auto u = static_cast<std::size_t>(j);
    if (fit.excluded[u]) return std::nullopt;
    const IndexSet& S = fit.supports[u];
    const VectorXd xj = data.x(j);
    if (S.empty()) return std::abs(xj.dot(data.y()) / xj.squaredNorm() - fit.beta_hat[j]);

    const double n = static_cast<double>(data.n());
    const MatrixXd XS = gather_columns(data.X(), S);
    const MatrixXd Sigma = XS.transpose() * XS / n;
    Eigen::FullPivLU<MatrixXd> lu(Sigma);
    lu.setThreshold(tol.rank_rel);
    if (!lu.isInvertible()) return std::nullopt;

    VectorXd rho_dot(static_cast<Index>(S.size()));
    for (Index i = 0; i < rho_dot.size(); ++i) rho_dot[i] = penalty_derivative(fit.beta_on_support[u][i], spec);

    const VectorXd qx = project_out_set(xj, S, data, tol);
    const double denom = xj.dot(qx);
    if (!(denom > tol.collinear_rel * n)) return std::nullopt;
    const VectorXd bracket = project_out_set(data.y(), S, data, tol) + XS * lu.solve(rho_dot);
    return std::abs(xj.dot(bracket) / denom - fit.beta_hat[j]);
}

/// Denominator used by the split-refit variance estimator.
enum class Sigma2Denominator {
    PlusSupport,   ///< n2 + |S|: scaled out-of-sample prediction error (default)
    MinusSupport,  ///< n2 - |S|: classical residual degrees of freedom
};

struct Sigma2Options {
    int n_repeats = 10;
    Sigma2Denominator denominator = Sigma2Denominator::PlusSupport;
};

struct Sigma2Estimate {
    double value = 0.0;
    std::vector<double> repeats;
    IndexSet support;
    bool truncated = false;  ///< support cut to n1 - 1 largest coefficients
};

/// Split-refit estimate of the error variance. The support comes from a
/// full-data penalized fit `b_full`; each repeat splits the rows at random
/// into D1 (ceil(n/2) rows) and D2, fits OLS on D1 over that support and
/// scores the squared prediction error on D2. Repeats are averaged.
inline Sigma2Estimate estimate_sigma2(const Dataset& data, const VectorXd& b_full, std::uint64_t seed,
                                      const Sigma2Options& opt = {}, const Tolerances& tol = default_tolerances()) {
    const Index n = data.n();
    if (n < 4) throw InvalidInput("estimate_sigma2: need n >= 4");
    if (opt.n_repeats < 1) throw InvalidInput("estimate_sigma2: need at least one repeat");
    if (b_full.size() != data.p()) throw InvalidInput("estimate_sigma2: coefficient length mismatch");

    const Index n1 = (n + 1) / 2;
    const Index n2 = n - n1;
    Sigma2Estimate est;
    IndexSet S = IndexSet::support(b_full);
    if (static_cast<Index>(S.size()) >= n1) {
        std::vector<Index> order(S.begin(), S.end());
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return std::abs(b_full[a]) > std::abs(b_full[b]); });
        order.resize(static_cast<std::size_t>(n1 - 1));
        S = IndexSet(std::move(order));
        est.truncated = true;
    }
    est.support = S;
    const auto s = static_cast<double>(S.size());
    const double denom = opt.denominator == Sigma2Denominator::PlusSupport
                             ? static_cast<double>(n2) + s
                             : std::max(1.0, static_cast<double>(n2) - s);

    const MatrixXd XS = gather_columns(data.X(), S);
    for (int r = 0; r < opt.n_repeats; ++r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        const auto perm = random_permutation(n, rng);
        const std::vector<Index> d1(perm.begin(), perm.begin() + n1);
        const std::vector<Index> d2(perm.begin() + n1, perm.end());
        const VectorXd y2 = data.y()(d2);
        double rss;
        if (S.empty()) {
            rss = y2.squaredNorm();
        } else {
            const VectorXd b1 = min_norm_solve(XS(d1, Eigen::all), data.y()(d1), tol);
            rss = (y2 - XS(d2, Eigen::all) * b1).squaredNorm();
        }
        est.repeats.push_back(rss / denom);
    }
    double sum = 0.0;
    for (double v : est.repeats) sum += v;
    est.value = sum / static_cast<double>(opt.n_repeats);
    return est;
}

/// Standard errors sigma_j^2 = sigma2 / (x_j'Q_{S_j}x_j) and z_j = beta_j/sigma_j.
/// Coefficients whose column is (numerically) inside span(X_{S_j}) are
/// flagged collinear: se is NaN and z is 0, so they can never be selected.
inline void attach_inference(SpidrFit& fit, const Dataset& data, double sigma2_hat,
                             const Tolerances& tol = default_tolerances(), unsigned threads = 1) {
    if (!(sigma2_hat > 0.0) || !std::isfinite(sigma2_hat)) throw InvalidInput("attach_inference: sigma2 must be > 0");
    const Index p = fit.p();
    const double n = static_cast<double>(data.n());
    fit.sigma2_hat = sigma2_hat;
    fit.se = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    fit.z = VectorXd::Zero(p);
    fit.precision = VectorXd::Zero(p);
    fit.collinear.assign(static_cast<std::size_t>(p), false);
    std::vector<char> collinear(static_cast<std::size_t>(p), 0);
    parallel_for(p, threads, [&](Index j) {
        const auto u = static_cast<std::size_t>(j);
        if (fit.excluded[u]) return;
        const VectorXd xj = data.x(j);
        const double prec = xj.dot(project_out_set(xj, fit.supports[u], data, tol));
        fit.precision[j] = prec;
        if (!(prec > tol.collinear_rel * n)) {
            collinear[u] = 1;
            return;
        }
        fit.se[j] = std::sqrt(sigma2_hat / prec);
        fit.z[j] = fit.beta_hat[j] / fit.se[j];
    });
    for (std::size_t u = 0; u < collinear.size(); ++u) fit.collinear[u] = collinear[u] != 0;
    fit.has_inference = true;
}

/// Estimated covariance of beta_j and beta_k:
///     sigma2 x_j'Q_{S_j}Q_{S_k}x_k / ((x_j'Q_{S_j}x_j)(x_k'Q_{S_k}x_k)).
inline double covariance(Index j, Index k, const SpidrFit& fit, const Dataset& data, double sigma2_hat,
                         const Tolerances& tol = default_tolerances()) {
    const double n = static_cast<double>(data.n());
    auto projected = [&](Index i) {
        const auto u = static_cast<std::size_t>(i);
        if (fit.excluded[u]) throw InvalidInput("covariance: coefficient " + std::to_string(i) + " is excluded");
        VectorXd q = project_out_set(data.x(i), fit.supports[u], data, tol);
        const double prec = q.squaredNorm();
        if (!(prec > tol.collinear_rel * n))
            throw InvalidInput("covariance: coefficient " + std::to_string(i) + " is collinear with its companion set");
        return std::pair{std::move(q), prec};
    };
    const auto [qj, pj] = projected(j);
    const auto [qk, pk] = projected(k);
    return sigma2_hat * qj.dot(qk) / (pj * pk);
}

}  // namespace spidr
