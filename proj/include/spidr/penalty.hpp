#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "spidr/core.hpp"

namespace spidr {

enum class Family { MCP, Lasso };

inline std::string_view to_string(Family f) { return f == Family::MCP ? "mcp" : "lasso"; }

inline Family parse_family(std::string_view s) {
    if (s == "mcp" || s == "MCP") return Family::MCP;
    if (s == "lasso" || s == "Lasso") return Family::Lasso;
    throw InvalidInput("unknown penalty family '" + std::string(s) + "' (expected mcp or lasso)");
}

struct PenaltySpec {
    Family family = Family::MCP;
    double lambda = 0.0;
    double gamma = 6.0;  // MCP concavity; unused for Lasso

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("penalty: lambda must be >= 0");
        if (family == Family::MCP && !(gamma > 1.0)) throw InvalidInput("penalty: MCP needs gamma > 1");
    }
};

inline double sign(double t) { return (t > 0.0) - (t < 0.0); }

inline double soft_threshold(double z, double lambda) {
    const double a = std::abs(z) - lambda;
    return a > 0.0 ? sign(z) * a : 0.0;
}

/// rho(t; lambda). MCP: lambda|t| - t^2/(2 gamma) up to gamma*lambda, flat
/// at gamma*lambda^2/2 beyond.
inline double penalty_value(double t, const PenaltySpec& spec) {
    const double a = std::abs(t);
    if (spec.family == Family::Lasso) return spec.lambda * a;
    const double knot = spec.gamma * spec.lambda;
    if (a <= knot) return spec.lambda * a - a * a / (2.0 * spec.gamma);
    return 0.5 * spec.gamma * spec.lambda * spec.lambda;
}

/// Derivative of rho for t != 0; returns 0 at t = 0.
inline double penalty_derivative(double t, const PenaltySpec& spec) {
    if (t == 0.0) return 0.0;
    if (spec.family == Family::Lasso) return spec.lambda * sign(t);
    const double a = std::abs(t);
    const double knot = spec.gamma * spec.lambda;
    if (a >= knot) return 0.0;
    return (spec.lambda - a / spec.gamma) * sign(t);
}

/// d b^2/2 - z b + rho(b).
inline double univariate_objective(double b, double z, double d, const PenaltySpec& spec) {
    return 0.5 * d * b * b - z * b + penalty_value(b, spec);
}

/// Global minimizer of d b^2/2 - z b + rho(b; spec), d > 0.
inline double univariate_minimizer(double z, double d, const PenaltySpec& spec) {
    if (!(d > 0.0)) throw InvalidInput("univariate_minimizer: curvature d must be > 0");
    const double lam = spec.lambda;
    if (spec.family == Family::Lasso) return soft_threshold(z, lam) / d;

    const double g = spec.gamma;
    const double az = std::abs(z);
    if (d * g > 1.0) {
        if (az <= lam) return 0.0;
        if (az <= d * g * lam) return soft_threshold(z, lam) / (d - 1.0 / g);
        return z / d;
    }

    // The inner piece is concave (or linear): its minimum sits on the
    // boundary of |b| <= gamma*lambda, so compare 0, the knot and the
    // unpenalized stationary point.
    const double s = z >= 0.0 ? 1.0 : -1.0;
    double best = 0.0;
    double fbest = 0.0;
    auto consider = [&](double b) {
        const double f = univariate_objective(b, z, d, spec);
        if (f < fbest) {
            fbest = f;
            best = b;
        }
    };
    consider(s * g * lam);
    if (az / d >= g * lam) consider(z / d);
    return best;
}

}  // namespace spidr
