#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spidr/core.hpp"

namespace spidr {

/// Least-squares fit that knows the true support: for each j, y regressed
/// on x_j together with S_j = S \ {j}. Needs the truth, so it is only
/// meaningful on simulated data.
struct IdealFit {
    VectorXd beta_tilde;     ///< NaN where undefined
    VectorXd m;              ///< signal multipliers (x_j'Q_{S_j}x_j)^{1/2}
    MatrixXd projected;      ///< column j holds Q_{S_j} x_j
    std::vector<bool> defined;

    double variance(Index j, double sigma) const { return sigma * sigma / (m[j] * m[j]); }
    double covariance(Index j, Index k, double sigma) const {
        return sigma * sigma * projected.col(j).dot(projected.col(k)) / (m[j] * m[j] * m[k] * m[k]);
    }
    /// Cov of the ideal z-scores, i.e. the residual correlation of Q_{S_j}x_j and Q_{S_k}x_k.
    double residual_correlation(Index j, Index k) const {
        return projected.col(j).dot(projected.col(k)) / (m[j] * m[k]);
    }
};

inline IdealFit ideal_fit(const Dataset& data, const IndexSet& truth,
                          const Tolerances& tol = default_tolerances()) {
    truth.check_bounds(data.p());
    const Index p = data.p();
    const double n = static_cast<double>(data.n());
    IdealFit fit;
    fit.beta_tilde = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    fit.m = VectorXd::Zero(p);
    fit.projected = MatrixXd::Zero(data.n(), p);
    fit.defined.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        const IndexSet Sj = truth.without(j);
        const VectorXd q = project_out_set(data.x(j), Sj, data, tol);
        const double m2 = q.squaredNorm();
        fit.projected.col(j) = q;
        if (!(m2 > tol.collinear_rel * n)) continue;
        fit.m[j] = std::sqrt(m2);
        fit.defined[static_cast<std::size_t>(j)] = true;
        // Coefficient of x_j in the OLS fit on {j} u S_j.
        std::vector<Index> cols{j};
        cols.insert(cols.end(), Sj.begin(), Sj.end());
        MatrixXd Xa(data.n(), static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) Xa.col(static_cast<Index>(i)) = data.x(cols[i]);
        fit.beta_tilde[j] = min_norm_solve(Xa, data.y(), tol)[0];
    }
    return fit;
}

struct SignalStrength {
    VectorXd psi;         ///< m_j beta_j / sigma
    VectorXd base;        ///< beta_j / sigma
    VectorXd multiplier;  ///< m_j
};

inline SignalStrength signal_strength(const Dataset& data, const IndexSet& truth, const VectorXd& beta,
                                      double sigma, const Tolerances& tol = default_tolerances()) {
    if (!(sigma > 0.0)) throw InvalidInput("signal_strength: sigma must be > 0");
    if (beta.size() != data.p()) throw InvalidInput("signal_strength: beta length mismatch");
    SignalStrength s;
    s.base = beta / sigma;
    s.multiplier.resize(data.p());
    for (Index j = 0; j < data.p(); ++j) {
        const double m2 = project_out_set(data.x(j), truth.without(j), data, tol).squaredNorm();
        s.multiplier[j] = m2 > tol.collinear_rel * static_cast<double>(data.n()) ? std::sqrt(m2) : 0.0;
    }
    s.psi = s.multiplier.cwiseProduct(s.base);
    return s;
}

struct Stickiness {
    double value = 0.0;                 ///< root mean squared difference of the ideal z-scores
    double residual_correlation = 1.0;  ///< Cov of the ideal z-scores
    double psi_j = 0.0;
    double psi_k = 0.0;
};

/// s_jk^2 = (psi_j - psi_k)^2 + 2 (1 - Cov(z_j, z_k)). nullopt when either
/// signal multiplier is zero.
inline std::optional<Stickiness> stickiness(Index j, Index k, const Dataset& data, const IndexSet& truth,
                                            const VectorXd& beta, double sigma,
                                            const Tolerances& tol = default_tolerances()) {
    if (!(sigma > 0.0)) throw InvalidInput("stickiness: sigma must be > 0");
    const double floor = tol.collinear_rel * static_cast<double>(data.n());
    const VectorXd qj = project_out_set(data.x(j), truth.without(j), data, tol);
    const VectorXd qk = project_out_set(data.x(k), truth.without(k), data, tol);
    const double mj2 = qj.squaredNorm();
    const double mk2 = qk.squaredNorm();
    if (!(mj2 > floor) || !(mk2 > floor)) return std::nullopt;
    Stickiness s;
    const double mj = std::sqrt(mj2);
    const double mk = std::sqrt(mk2);
    s.psi_j = mj * beta[j] / sigma;
    s.psi_k = mk * beta[k] / sigma;
    s.residual_correlation = j == k ? 1.0 : std::clamp(qj.dot(qk) / (mj * mk), -1.0, 1.0);
    const double d = s.psi_j - s.psi_k;
    s.value = std::sqrt(std::max(0.0, d * d + 2.0 * (1.0 - s.residual_correlation)));
    return s;
}

}  // namespace spidr
