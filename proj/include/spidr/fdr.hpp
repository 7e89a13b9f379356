#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "spidr/core.hpp"

namespace spidr {

/// Phi(-t), the upper standard-normal tail.
inline double normal_tail(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

inline double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi^{-1}(u) for u in (0,1).
inline double normal_quantile(double u) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u); }

/// t phi(t) / Phi(-t), switching to the Mills-ratio expansion where the
/// tail underflows.
inline double tail_hazard_times_t(double t) {
    if (t > 30.0) {
        const double t2 = t * t;
        const double mills = (1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2)) / t;
        return t / mills;
    }
    return t * normal_pdf(t) / normal_tail(t);
}

/// Correlation correction multiplying the plug-in FDR estimate:
/// 1 + 2A t phi(t) / (sqrt(2) Phi(-t)).
inline double correlation_factor(double t, double A) {
    return 1.0 + 2.0 * A * tail_hazard_times_t(t) / std::numbers::sqrt2;
}

/// Plug-in FDR estimates at every candidate threshold. Candidates are the
/// distinct |z| values in decreasing order; at candidate t the count is
/// taken just below t, so r_of_t[i] = #{|z_j| >= thresholds[i]}, which is
/// the size of the set the final rule would select.
struct FdrCurve {
    std::vector<double> thresholds;
    std::vector<Index> r_of_t;
    std::vector<double> v_hat;   ///< 2 p Phi(-t)
    std::vector<double> q0_hat;  ///< v_hat / R, or 0 when R = 0
    std::vector<double> q_hat;   ///< q0_hat times the correlation factor (uncapped)
    double dispersion_A = 0.0;
    Index p = 0;

    std::size_t size() const { return thresholds.size(); }
    /// Reported value: clamped to [0, 1].
    double q_hat_reported(std::size_t i) const { return std::clamp(q_hat[i], 0.0, 1.0); }
};

inline FdrCurve fdr_curve(const VectorXd& z, Index p, double A) {
    if (!z.allFinite()) throw InvalidInput("fdr_curve: z must be finite");
    if (p < z.size()) throw InvalidInput("fdr_curve: p smaller than number of statistics");
    std::vector<double> absz(static_cast<std::size_t>(z.size()));
    for (Index j = 0; j < z.size(); ++j) absz[static_cast<std::size_t>(j)] = std::abs(z[j]);
    std::sort(absz.begin(), absz.end(), std::greater<>());

    FdrCurve c;
    c.dispersion_A = A;
    c.p = p;
    for (std::size_t i = 0; i < absz.size(); ++i) {
        if (i + 1 < absz.size() && absz[i + 1] == absz[i]) continue;  // last of a tie run carries the count
        const double t = absz[i];
        const auto r = static_cast<Index>(i + 1);
        const double v = 2.0 * static_cast<double>(p) * normal_tail(t);
        const double q0 = v / static_cast<double>(r);
        c.thresholds.push_back(t);
        c.r_of_t.push_back(r);
        c.v_hat.push_back(v);
        c.q0_hat.push_back(q0);
        c.q_hat.push_back(q0 * correlation_factor(t, A));
    }
    return c;
}

struct DispersionEstimate {
    double A = 0.0;
    double sigma0 = 1.0;  ///< central spread of the z ensemble
    bool degenerate = false;
};

namespace detail {

// Upper quartile of |Z| for Z ~ N(0, s^2) conditioned on |Z| <= 2.
inline double truncated_upper_quartile(double s) {
    const double mass = normal_tail(-2.0 / s) - 0.5;
    return s * normal_quantile(0.5 + 0.5 * mass);
}

inline double quantile_sorted(const std::vector<double>& v, double prob) {
    const double h = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Dispersion A for the correlation correction, from the central spread of
/// the statistics. Take the z values inside [-2, 2], measure their
/// interquartile range, and find the normal scale sigma0 whose [-2, 2]
/// truncation has that same IQR (for an untruncated normal this is
/// IQR/1.349). Then A = (sigma0^2 - 1)/sqrt(2), clamped to [-1/sqrt(2), 2].
/// Fewer than 10 central values, or a zero IQR, gives A = 0 flagged
/// degenerate.
inline DispersionEstimate estimate_dispersion_A(const VectorXd& z) {
    DispersionEstimate out;
    std::vector<double> central;
    for (Index j = 0; j < z.size(); ++j)
        if (std::isfinite(z[j]) && std::abs(z[j]) <= 2.0) central.push_back(z[j]);
    if (central.size() < 10) {
        out.degenerate = true;
        return out;
    }
    std::sort(central.begin(), central.end());
    const double half_iqr =
        0.5 * (detail::quantile_sorted(central, 0.75) - detail::quantile_sorted(central, 0.25));
    if (!(half_iqr > 0.0)) {
        out.degenerate = true;
        return out;
    }
    constexpr double a_max = 2.0;
    const double a_min = -1.0 / std::numbers::sqrt2;
    // Scale range implied by the clamp on A; the truncated quartile is
    // increasing in s, so bisection is safe.
    double lo = std::sqrt(1.0 + std::numbers::sqrt2 * a_min) + 1e-12;
    double hi = std::sqrt(1.0 + std::numbers::sqrt2 * a_max);
    if (half_iqr <= detail::truncated_upper_quartile(lo)) {
        out.sigma0 = lo;
    } else if (half_iqr >= detail::truncated_upper_quartile(hi)) {
        out.sigma0 = hi;
    } else {
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (detail::truncated_upper_quartile(mid) < half_iqr ? lo : hi) = mid;
        }
        out.sigma0 = 0.5 * (lo + hi);
    }
    out.A = std::clamp((out.sigma0 * out.sigma0 - 1.0) / std::numbers::sqrt2, a_min, a_max);
    return out;
}

struct SelectionResult {
    double q = 0.0;
    std::optional<double> t_hat;  ///< nullopt: no threshold reaches q, nothing selected
    IndexSet selected;
    std::vector<double> ci_lower;  ///< aligned with `selected`
    std::vector<double> ci_upper;
    double q_hat_at_t = 0.0;
    double dispersion_A = 0.0;
    FdrCurve curve;
};

/// Threshold selection at nominal FDR level q. Walking the candidate
/// thresholds from the largest |z| downward, t_hat is the smallest
/// candidate such that every candidate at or above it has Q_hat <= q.
/// Selected: {j : |z_j| >= t_hat}; intervals beta_j +- t_hat * se_j.
inline SelectionResult select(const VectorXd& z, const VectorXd& se, const VectorXd& beta_hat, Index p, double q,
                              double A) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidInput("select: q must lie in (0, 1)");
    if (se.size() != z.size() || beta_hat.size() != z.size()) throw InvalidInput("select: length mismatch");

    SelectionResult res;
    res.q = q;
    res.dispersion_A = A;
    res.curve = fdr_curve(z, p, A);
    std::optional<std::size_t> last_ok;
    for (std::size_t i = 0; i < res.curve.size(); ++i) {
        if (res.curve.q_hat[i] > q) break;
        last_ok = i;
    }
    if (!last_ok) return res;

    const double t = res.curve.thresholds[*last_ok];
    res.t_hat = t;
    res.q_hat_at_t = res.curve.q_hat_reported(*last_ok);
    std::vector<Index> sel;
    for (Index j = 0; j < z.size(); ++j)
        if (std::abs(z[j]) >= t) sel.push_back(j);
    res.selected = IndexSet(std::move(sel));
    for (Index j : res.selected) {
        res.ci_lower.push_back(beta_hat[j] - t * se[j]);
        res.ci_upper.push_back(beta_hat[j] + t * se[j]);
    }
    return res;
}

struct SelectionError {
    double fdp = 0.0;
    double fmp = 0.0;
    bool empty_truth = false;
};

/// Realized false discovery and false miss proportions of a selection.
inline SelectionError selection_error(const IndexSet& selected, const IndexSet& truth) {
    SelectionError e;
    std::size_t hits = 0;
    for (Index j : selected)
        if (truth.contains(j)) ++hits;
    if (!selected.empty())
        e.fdp = static_cast<double>(selected.size() - hits) / static_cast<double>(selected.size());
    if (truth.empty()) {
        e.empty_truth = true;
    } else {
        e.fmp = static_cast<double>(truth.size() - hits) / static_cast<double>(truth.size());
    }
    return e;
}

}  // namespace spidr
