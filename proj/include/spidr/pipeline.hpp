#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spidr/cd_solver.hpp"
#include "spidr/core.hpp"
#include "spidr/fdr.hpp"
#include "spidr/penalty.hpp"
#include "spidr/spidr.hpp"

namespace spidr {

struct PipelineOptions {
    Family family = Family::MCP;
    double gamma = 6.0;
    int n_folds = 5;
    std::size_t n_lambda = 100;
    std::optional<double> lambda_min_ratio;  ///< default depends on p > n
    std::uint64_t seed = 1;
    std::optional<double> sigma2_override;
    std::optional<double> A_override;
    Sigma2Options sigma2;
    SolveOptions solve;
    unsigned threads = 1;
};

/// Everything the full procedure produces for one standardized dataset.
struct SpidrAnalysis {
    LambdaGrid grid;
    CvResult cv;
    SolveResult penalized;  ///< fully penalized fit at lambda_hat
    SpidrFit fit;
    std::optional<Sigma2Estimate> sigma2;  ///< absent when overridden
    DispersionEstimate dispersion;
    std::vector<std::string> warnings;
};

/// Seeds for the random pieces of one analysis, derived from a single seed.
inline std::uint64_t cv_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ULL + 0x1; }
inline std::uint64_t sigma2_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ULL + 0x2; }

/// lambda_hat by k-fold CV of the fully penalized criterion, then the
/// semi-penalized fit of every coefficient at that lambda, the split-refit
/// variance estimate, standard errors and the dispersion estimate.
/// `data` must already be standardized.
inline SpidrAnalysis analyze(const Dataset& data, const PipelineOptions& opt = {}) {
    if (!data.standardized()) throw InvalidInput("analyze: dataset must be standardized");
    SpidrAnalysis out;
    out.grid = make_lambda_grid(data, opt.n_lambda, opt.lambda_min_ratio);
    out.cv = cross_validate(data, opt.family, opt.gamma, out.grid, opt.n_folds, cv_seed(opt.seed), opt.solve,
                            opt.threads);

    // Full-data path up to lambda_hat, so the fit at lambda_hat is reached
    // by the same warm-start route CV used.
    const DenseDesign design(data.X());
    VectorXd warm;
    for (std::size_t l = 0; l <= out.cv.index_hat; ++l) {
        out.penalized = solve_at_lambda(design, data.y(), PenaltySpec{opt.family, out.grid[l], opt.gamma}, warm,
                                        opt.solve);
        warm = out.penalized.beta;
    }
    if (!out.penalized.converged) out.warnings.push_back("penalized fit at lambda_hat did not converge");

    const PenaltySpec spec{opt.family, out.cv.lambda_hat, opt.gamma};
    out.fit = fit_all(data, spec, out.penalized.beta, opt.solve, opt.threads);
    if (const Index bad = out.fit.n_unconverged(); bad > 0)
        out.warnings.push_back(std::to_string(bad) + " semi-penalized fits did not converge");

    double sigma2;
    if (opt.sigma2_override) {
        sigma2 = *opt.sigma2_override;
    } else {
        out.sigma2 = estimate_sigma2(data, out.penalized.beta, sigma2_seed(opt.seed), opt.sigma2, opt.solve.tol);
        if (out.sigma2->truncated) out.warnings.push_back("variance refit support truncated to n1 - 1 columns");
        sigma2 = out.sigma2->value;
    }
    attach_inference(out.fit, data, sigma2, opt.solve.tol, opt.threads);
    for (Index j = 0; j < out.fit.p(); ++j)
        if (out.fit.collinear[static_cast<std::size_t>(j)])
            out.warnings.push_back("coefficient " + std::to_string(j + 1) + " collinear with its companion set");

    if (opt.A_override) {
        out.dispersion.A = *opt.A_override;
    } else {
        out.dispersion = estimate_dispersion_A(out.fit.z);
        if (out.dispersion.degenerate) out.warnings.push_back("dispersion estimate degenerate; using A = 0");
    }
    return out;
}

inline SelectionResult select(const SpidrAnalysis& a, double q) {
    return select(a.fit.z, a.fit.se, a.fit.beta_hat, a.fit.p(), q, a.dispersion.A);
}

/// Support of the fully penalized fit at its CV-selected lambda.
struct PenalizedSelection {
    CvResult cv;
    SolveResult fit;
    IndexSet selected;
};

inline PenalizedSelection penalized_selection(const Dataset& data, Family family, const PipelineOptions& opt) {
    PenalizedSelection out;
    const LambdaGrid grid = make_lambda_grid(data, opt.n_lambda, opt.lambda_min_ratio);
    out.cv = cross_validate(data, family, opt.gamma, grid, opt.n_folds, cv_seed(opt.seed), opt.solve, opt.threads);
    const DenseDesign design(data.X());
    VectorXd warm;
    for (std::size_t l = 0; l <= out.cv.index_hat; ++l) {
        out.fit = solve_at_lambda(design, data.y(), PenaltySpec{family, grid[l], opt.gamma}, warm, opt.solve);
        warm = out.fit.beta;
    }
    out.selected = out.fit.active;
    return out;
}

}  // namespace spidr
