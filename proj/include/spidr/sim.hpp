#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spidr/core.hpp"
#include "spidr/fdr.hpp"
#include "spidr/oracle.hpp"
#include "spidr/parallel.hpp"
#include "spidr/pipeline.hpp"
#include "spidr/rng.hpp"

namespace spidr {

enum class DesignName { PathDemo, Example1, Example2, Example3 };

inline std::string_view to_string(DesignName d) {
    switch (d) {
        case DesignName::PathDemo: return "PathDemo";
        case DesignName::Example1: return "Example1";
        case DesignName::Example2: return "Example2";
        case DesignName::Example3: return "Example3";
    }
    return "?";
}

inline constexpr std::string_view kDesignNames = "PathDemo, Example1, Example2, Example3";

/// Simulation design. The named constructors give the standard settings;
/// fields can be edited afterwards (smaller n, lower noise, ...).
struct SimDesign {
    DesignName name = DesignName::Example1;
    Index n = 162;
    Index p = 1000;
    VectorXd beta_nonzero;  ///< leading nonzero coefficients
    double sigma = 3.0;
    double a = 0.0;         ///< PathDemo factor loading
    double a1 = 1.0, a2 = 0.5, a3 = 0.1;
    double ar = 0.5;        ///< Example3 AR(1) coefficient
    /// Place the nonzero coefficients at random indices instead of 1..s.
    bool random_support = false;

    static SimDesign path_demo(double loading = std::sqrt(1.0 / 3.0)) {
        SimDesign d;
        d.name = DesignName::PathDemo;
        d.n = 100;
        d.p = 1000;
        d.beta_nonzero = (VectorXd(6) << 3.0, 2.0, 1.0, -0.5, -1.0, -1.5).finished();
        d.sigma = 2.5;
        d.a = loading;
        return d;
    }
    static SimDesign example1() {
        SimDesign d;
        d.name = DesignName::Example1;
        d.beta_nonzero = (VectorXd(18) << 1, 1, 1, .8, .8, .8, .6, .6, .6, -.6, -.6, -.6, -.8, -.8, -.8, -1, -1, -1)
                             .finished();
        return d;
    }
    static SimDesign example2() {
        SimDesign d = example1();
        d.name = DesignName::Example2;
        d.a1 = 2.0;
        return d;
    }
    static SimDesign example3() {
        SimDesign d = example1();
        d.name = DesignName::Example3;
        return d;
    }
    static SimDesign from_name(std::string_view s) {
        if (s == "PathDemo" || s == "pathdemo") return path_demo();
        if (s == "Example1" || s == "example1") return example1();
        if (s == "Example2" || s == "example2") return example2();
        if (s == "Example3" || s == "example3") return example3();
        throw InvalidInput("unknown design '" + std::string(s) + "'; valid designs: " + std::string(kDesignNames));
    }
};

struct SimData {
    Dataset data;  ///< raw, not standardized
    VectorXd beta;
    IndexSet support;
    std::array<IndexSet, 5> blocks;  ///< A1..A5 for the factor designs
};

/// One draw from the design. Deterministic in (design, seed, stream).
inline SimData generate(const SimDesign& d, std::uint64_t seed, std::uint64_t stream = 0) {
    const Index s = d.beta_nonzero.size();
    if (d.n < 2 || d.p < s) throw InvalidInput("generate: design too small");
    Rng rng(seed, stream);

    // Placement of the nonzero coefficients.
    std::vector<Index> signal(static_cast<std::size_t>(s));
    if (d.random_support) {
        auto perm = random_permutation(d.p, rng);
        for (Index k = 0; k < s; ++k) signal[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(k)];
    } else {
        for (Index k = 0; k < s; ++k) signal[static_cast<std::size_t>(k)] = k;
    }
    VectorXd beta = VectorXd::Zero(d.p);
    for (Index k = 0; k < s; ++k) beta[signal[static_cast<std::size_t>(k)]] = d.beta_nonzero[k];

    // Row-wise factor loadings (on u1, u2) per column.
    MatrixXd load = MatrixXd::Zero(d.p, 2);
    std::array<IndexSet, 5> blocks;
    const bool factor = d.name != DesignName::Example3;
    if (d.name == DesignName::PathDemo) {
        // Columns 1-4, 5-8, 9-17, 18-26 (1-based) load on the two factors.
        for (Index j = 0; j < std::min<Index>(26, d.p); ++j) {
            if (j < 4) load(j, 0) = d.a;
            else if (j < 8) load(j, 1) = d.a;
            else if (j < 17) load(j, 0) = 1.0;
            else load(j, 1) = 1.0;
        }
    } else if (factor) {
        const Index half = s / 2;
        std::vector<Index> a1(signal.begin(), signal.begin() + half), a2(signal.begin() + half, signal.end());
        std::vector<bool> taken(static_cast<std::size_t>(d.p), false);
        for (Index j : signal) taken[static_cast<std::size_t>(j)] = true;
        std::vector<Index> pool;
        for (Index j = 0; j < d.p; ++j)
            if (!taken[static_cast<std::size_t>(j)]) pool.push_back(j);
        rng.shuffle(pool);
        const std::size_t block = std::min<std::size_t>(50, pool.size() / 3);
        blocks[0] = IndexSet(a1);
        blocks[1] = IndexSet(a2);
        for (int b = 0; b < 3; ++b)
            blocks[static_cast<std::size_t>(2 + b)] =
                IndexSet(std::vector<Index>(pool.begin() + static_cast<std::ptrdiff_t>(b * block),
                                            pool.begin() + static_cast<std::ptrdiff_t>((b + 1) * block)));
        for (Index j : blocks[0]) load(j, 0) = d.a1;
        for (Index j : blocks[1]) load(j, 1) = d.a1;
        for (Index j : blocks[2]) load(j, 0) = d.a2;
        for (Index j : blocks[3]) load(j, 1) = d.a2;
        for (Index j : blocks[4]) {
            load(j, 0) = d.a3;
            load(j, 1) = -d.a3;
        }
    }

    MatrixXd X(d.n, d.p);
    if (factor) {
        MatrixXd u(d.n, 2);
        for (Index c = 0; c < 2; ++c)
            for (Index i = 0; i < d.n; ++i) u(i, c) = rng.normal();
        for (Index j = 0; j < d.p; ++j)
            for (Index i = 0; i < d.n; ++i) X(i, j) = rng.normal();
        X.noalias() += u * load.transpose();
    } else {
        const double innov = std::sqrt(1.0 - d.ar * d.ar);
        for (Index i = 0; i < d.n; ++i) {
            X(i, 0) = rng.normal();
            for (Index j = 1; j < d.p; ++j) X(i, j) = d.ar * X(i, j - 1) + innov * rng.normal();
        }
    }
    VectorXd eps(d.n);
    for (Index i = 0; i < d.n; ++i) eps[i] = d.sigma * rng.normal();
    VectorXd y = X * beta + eps;

    return SimData{Dataset(std::move(y), std::move(X)), std::move(beta), IndexSet(signal), blocks};
}

enum class Method { Lasso, MCP, SPIDR };
inline constexpr std::array<Method, 3> kAllMethods{Method::Lasso, Method::MCP, Method::SPIDR};

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::Lasso: return "Lasso";
        case Method::MCP: return "MCP";
        case Method::SPIDR: return "SPIDR";
    }
    return "?";
}

/// One method on one replication.
struct RepRecord {
    int rep = 0;
    Method method = Method::SPIDR;
    bool ok = true;
    std::string error;
    Index nvs = 0;
    double fdp = 0.0;
    double fmp = 0.0;
    double lambda_hat = 0.0;
    double t_hat = std::numeric_limits<double>::quiet_NaN();  ///< SPIDR only
    double sigma2_hat = std::numeric_limits<double>::quiet_NaN();
    /// SPIDR only: share of coefficients whose estimate matches the ideal
    /// (true-support) estimator to 1e-8.
    double ideal_agreement = std::numeric_limits<double>::quiet_NaN();
    IndexSet selected;
};

struct MethodSummary {
    Method method = Method::SPIDR;
    int n_ok = 0;
    int n_failed = 0;
    double mean_nvs = 0, sd_nvs = 0;
    double mean_fdr = 0, sd_fdr = 0;
    double mean_fmr = 0, sd_fmr = 0;
    double mean_ideal_agreement = std::numeric_limits<double>::quiet_NaN();
    VectorXd selection_freq;  ///< fraction of successful replications selecting j
};

struct RepSummary {
    SimDesign design;
    int n_reps = 0;
    double q = 0.15;
    std::uint64_t seed = 0;
    IndexSet support;  ///< true support (fixed placement) of the first replication
    std::vector<RepRecord> records;  ///< rep-major, methods in request order
    std::vector<MethodSummary> methods;

    const MethodSummary& summary(Method m) const {
        for (const auto& s : methods)
            if (s.method == m) return s;
        throw InvalidInput("method not part of this run");
    }
};

namespace detail {

// Neumaier-compensated mean and sample standard deviation.
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    auto csum = [](const std::vector<double>& xs) {
        double sum = 0.0, comp = 0.0;
        for (double x : xs) {
            const double t = sum + x;
            comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
            sum = t;
        }
        return sum + comp;
    };
    const double mean = csum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    std::vector<double> sq;
    sq.reserve(v.size());
    for (double x : v) sq.push_back((x - mean) * (x - mean));
    return {mean, std::sqrt(csum(sq) / static_cast<double>(v.size() - 1))};
}

inline RepRecord score(int rep, Method m, const IndexSet& selected, const IndexSet& truth, double lambda_hat) {
    RepRecord r;
    r.rep = rep;
    r.method = m;
    r.selected = selected;
    r.nvs = static_cast<Index>(selected.size());
    const SelectionError e = selection_error(selected, truth);
    r.fdp = e.fdp;
    r.fmp = e.fmp;
    r.lambda_hat = lambda_hat;

    std::vector<Index> hits;
    std::set_intersection(selected.begin(), selected.end(), truth.begin(), truth.end(), std::back_inserter(hits));
    const double fdp = selected.empty() ? 0.0 : 1.0 - static_cast<double>(hits.size()) / static_cast<double>(selected.size());
    const double fmp = truth.empty() ? 0.0 : 1.0 - static_cast<double>(hits.size()) / static_cast<double>(truth.size());
    if (std::abs(fdp - r.fdp) > 1e-12 || std::abs(fmp - r.fmp) > 1e-12)
        throw std::logic_error("selection error bookkeeping disagrees with set arithmetic");
    return r;
}

}  // namespace detail

/// Simulates n_reps datasets from `design` and scores each requested
/// method. Replication r draws from RNG stream r and analyzes with seed
/// derived from (seed, r), so results are identical for any thread count.
/// A failing replication is recorded and left out of the averages.
inline RepSummary run_replications(const SimDesign& design, int n_reps, double q, const std::vector<Method>& methods,
                                   std::uint64_t seed, PipelineOptions opt = {}, unsigned threads = 1) {
    if (n_reps < 1) throw InvalidInput("run_replications: need at least one replication");
    if (!(q > 0.0 && q < 1.0)) throw InvalidInput("run_replications: q must lie in (0, 1)");
    if (methods.empty()) throw InvalidInput("run_replications: no methods requested");
    opt.threads = 1;

    RepSummary out;
    out.design = design;
    out.n_reps = n_reps;
    out.q = q;
    out.seed = seed;
    const std::size_t nm = methods.size();
    out.records.resize(static_cast<std::size_t>(n_reps) * nm);

    parallel_for(n_reps, threads, [&](Index r) {
        const int rep = static_cast<int>(r);
        auto* slot = &out.records[static_cast<std::size_t>(r) * nm];
        try {
            const SimData sim = generate(design, seed, static_cast<std::uint64_t>(r));
            const Dataset data = standardize(sim.data);
            PipelineOptions ropt = opt;
            ropt.seed = seed ^ (0x5851f42d4c957f2dULL * (static_cast<std::uint64_t>(r) + 1));

            std::optional<SpidrAnalysis> analysis;
            auto need_analysis = [&] {
                if (!analysis) analysis = analyze(data, ropt);
                return &*analysis;
            };
            for (std::size_t mi = 0; mi < nm; ++mi) {
                const Method m = methods[mi];
                if (m == Method::Lasso) {
                    const PenalizedSelection ps = penalized_selection(data, Family::Lasso, ropt);
                    slot[mi] = detail::score(rep, m, ps.selected, sim.support, ps.cv.lambda_hat);
                } else if (m == Method::MCP) {
                    const SpidrAnalysis* a = need_analysis();
                    slot[mi] = detail::score(rep, m, a->penalized.active, sim.support, a->cv.lambda_hat);
                } else {
                    const SpidrAnalysis* a = need_analysis();
                    const SelectionResult sel = select(*a, q);
                    slot[mi] = detail::score(rep, m, sel.selected, sim.support, a->cv.lambda_hat);
                    slot[mi].t_hat = sel.t_hat.value_or(std::numeric_limits<double>::infinity());
                    slot[mi].sigma2_hat = a->fit.sigma2_hat;
                    const IdealFit ideal = ideal_fit(data, sim.support);
                    Index agree = 0;
                    for (Index j = 0; j < data.p(); ++j)
                        if (ideal.defined[static_cast<std::size_t>(j)] &&
                            std::abs(a->fit.beta_hat[j] - ideal.beta_tilde[j]) <= 1e-8)
                            ++agree;
                    slot[mi].ideal_agreement = static_cast<double>(agree) / static_cast<double>(data.p());
                }
            }
        } catch (const std::exception& e) {
            for (std::size_t mi = 0; mi < nm; ++mi) {
                slot[mi] = RepRecord{};
                slot[mi].rep = rep;
                slot[mi].method = methods[mi];
                slot[mi].ok = false;
                slot[mi].error = e.what();
            }
        }
    });

    out.support = generate(design, seed, 0).support;
    for (std::size_t mi = 0; mi < nm; ++mi) {
        MethodSummary s;
        s.method = methods[mi];
        s.selection_freq = VectorXd::Zero(design.p);
        std::vector<double> nvs, fdr, fmr, agreement;
        for (int r = 0; r < n_reps; ++r) {
            const RepRecord& rec = out.records[static_cast<std::size_t>(r) * nm + mi];
            if (!rec.ok) {
                ++s.n_failed;
                continue;
            }
            ++s.n_ok;
            nvs.push_back(static_cast<double>(rec.nvs));
            fdr.push_back(rec.fdp);
            fmr.push_back(rec.fmp);
            if (std::isfinite(rec.ideal_agreement)) agreement.push_back(rec.ideal_agreement);
            for (Index j : rec.selected) s.selection_freq[j] += 1.0;
        }
        if (s.n_ok > 0) s.selection_freq /= static_cast<double>(s.n_ok);
        std::tie(s.mean_nvs, s.sd_nvs) = detail::mean_sd(nvs);
        std::tie(s.mean_fdr, s.sd_fdr) = detail::mean_sd(fdr);
        std::tie(s.mean_fmr, s.sd_fmr) = detail::mean_sd(fmr);
        if (!agreement.empty()) s.mean_ideal_agreement = detail::mean_sd(agreement).first;
        out.methods.push_back(std::move(s));
    }
    return out;
}

}  // namespace spidr
