#pragma once

// The four commands behind the `spidr` executable. Each takes a RunConfig,
// writes its artifacts into config.outdir and returns a process exit code:
// 0 on success (warnings included), 2 on invalid configuration or I/O
// failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "spidr/cd_solver.hpp"
#include "spidr/core.hpp"
#include "spidr/fdr.hpp"
#include "spidr/io.hpp"
#include "spidr/pipeline.hpp"
#include "spidr/sim.hpp"
#include "spidr/spidr.hpp"

namespace spidr {

inline constexpr int kSchemaVersion = 1;

enum class OutputFormat { Both, Csv, Json };

struct RunConfig {
    std::string command;
    std::string input;     ///< CSV, response in the first column
    std::string fit_path;  ///< select: a fit.json written by `fit`
    bool has_header = true;
    double q = 0.15;
    double gamma = 6.0;
    Family family = Family::MCP;
    int n_folds = 5;
    std::size_t n_lambda = 100;
    std::optional<double> lambda_min_ratio;
    std::optional<double> sigma2;
    std::optional<double> A;
    Sigma2Denominator sigma2_denominator = Sigma2Denominator::PlusSupport;
    std::uint64_t seed = 1;
    int n_reps = 100;
    std::string design = "Example1";
    std::optional<double> noise_sd;     ///< overrides the design's sigma
    std::optional<double> loading;      ///< PathDemo factor loading a
    bool random_support = false;
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    std::vector<long> indices;          ///< paths: 1-based coefficient indices
    std::string outdir = ".";
    OutputFormat format = OutputFormat::Both;
    unsigned threads = 0;               ///< 0: all cores

    bool wants_json() const { return format != OutputFormat::Csv; }
    bool wants_csv() const { return format != OutputFormat::Json; }

    void validate() const {
        if (!(q > 0.0 && q < 1.0)) throw InvalidInput("q must lie in (0, 1)");
        if (!(gamma > 1.0)) throw InvalidInput("gamma must be > 1");
        if (n_folds < 2) throw InvalidInput("n_folds must be >= 2");
        if (n_lambda < 2) throw InvalidInput("n_lambda must be >= 2");
        if (lambda_min_ratio && !(*lambda_min_ratio > 0.0 && *lambda_min_ratio < 1.0))
            throw InvalidInput("lambda_min_ratio must lie in (0, 1)");
        if (sigma2 && !(*sigma2 > 0.0 && std::isfinite(*sigma2))) throw InvalidInput("sigma2 must be > 0");
        if (A && !std::isfinite(*A)) throw InvalidInput("A must be finite");
        if (n_reps < 1) throw InvalidInput("n_reps must be >= 1");
        if (noise_sd && !(*noise_sd >= 0.0)) throw InvalidInput("noise sd must be >= 0");
        if (methods.empty()) throw InvalidInput("no methods requested");
        for (long j : indices)
            if (j < 1) throw InvalidInput("coefficient indices are 1-based");
    }

    PipelineOptions pipeline() const {
        PipelineOptions o;
        o.family = family;
        o.gamma = gamma;
        o.n_folds = n_folds;
        o.n_lambda = n_lambda;
        o.lambda_min_ratio = lambda_min_ratio;
        o.seed = seed;
        o.sigma2_override = sigma2;
        o.A_override = A;
        o.sigma2.denominator = sigma2_denominator;
        o.threads = resolve_threads(threads);
        return o;
    }
};

namespace detail {

using nlohmann::ordered_json;

inline ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

inline std::filesystem::path output_path(const RunConfig& cfg, const char* name) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.outdir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.outdir + "': " + ec.message());
    return std::filesystem::path(cfg.outdir) / name;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void write_json(const RunConfig& cfg, const char* name, const ordered_json& j) {
    const auto path = output_path(cfg, name);
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

inline std::string fmt(double v) { return format_double(v); }

struct FitBundle {
    CsvTable table;
    Dataset data;  ///< standardized
    SpidrAnalysis analysis;
};

inline FitBundle run_fit(const RunConfig& cfg) {
    if (cfg.input.empty()) throw InvalidInput("no input file given");
    CsvTable table = read_csv(cfg.input, cfg.has_header);
    Dataset data = standardize(table.data);
    if (data.n() < 2 * cfg.n_folds)
        throw InvalidInput("need at least " + std::to_string(2 * cfg.n_folds) + " rows for " +
                           std::to_string(cfg.n_folds) + "-fold cross-validation");
    SpidrAnalysis a = analyze(data, cfg.pipeline());
    return FitBundle{std::move(table), std::move(data), std::move(a)};
}

inline ordered_json selection_json(const SelectionResult& sel, const VectorXd& beta, const VectorXd& se, Index p) {
    ordered_json j;
    j["schema"] = "spidr.selection";
    j["schema_version"] = kSchemaVersion;
    j["q"] = sel.q;
    j["p"] = p;
    j["dispersion_A"] = sel.dispersion_A;
    j["t_hat"] = sel.t_hat ? ordered_json(*sel.t_hat) : ordered_json(nullptr);
    j["q_hat_at_t"] = sel.t_hat ? ordered_json(sel.q_hat_at_t) : ordered_json(nullptr);
    j["n_selected"] = sel.selected.size();
    ordered_json idx = ordered_json::array();
    ordered_json intervals = ordered_json::array();
    for (std::size_t i = 0; i < sel.selected.size(); ++i) {
        const Index k = sel.selected[i];
        idx.push_back(k + 1);
        intervals.push_back({{"index", k + 1},
                             {"beta_hat", beta[k]},
                             {"se", se[k]},
                             {"lower", sel.ci_lower[i]},
                             {"upper", sel.ci_upper[i]}});
    }
    j["selected"] = std::move(idx);
    j["intervals"] = std::move(intervals);
    return j;
}

inline void write_fdr_curve(const RunConfig& cfg, const FdrCurve& c) {
    const auto path = output_path(cfg, "fdr_curve.csv");
    auto out = open_output(path);
    out << "threshold,R,V_hat,Q0_hat,Q_hat\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        out << fmt(c.thresholds[i]) << ',' << c.r_of_t[i] << ',' << fmt(c.v_hat[i]) << ',' << fmt(c.q0_hat[i])
            << ',' << fmt(c.q_hat_reported(i)) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        body();
        return 0;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed JSON: " << e.what() << '\n';
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
    }
    return 2;
}

}  // namespace detail

/// fit: cross-validated lambda, semi-penalized estimates, standard errors
/// and z-statistics. Writes fit.json and fit.csv.
inline int cmd_fit(const RunConfig& cfg, std::ostream& err = std::cerr) {
    using detail::fmt;
    using detail::number_or_null;
    using detail::ordered_json;
    return detail::guarded(err, [&] {
        cfg.validate();
        const detail::FitBundle b = detail::run_fit(cfg);
        const SpidrAnalysis& a = b.analysis;
        const SpidrFit& f = a.fit;
        const Dataset& data = b.data;
        const auto [intercept, beta] = data.to_original_scale(f.beta_hat);
        const VectorXd se = data.se_to_original_scale(f.se);
        const Index p = data.p();

        auto name_of = [&](Index j) -> std::string {
            const auto u = static_cast<std::size_t>(j + 1);
            return u < b.table.header.size() ? b.table.header[u] : "x" + std::to_string(j + 1);
        };

        if (cfg.wants_json()) {
            ordered_json j;
            j["schema"] = "spidr.fit";
            j["schema_version"] = kSchemaVersion;
            j["input"] = cfg.input;
            j["n"] = data.n();
            j["p"] = p;
            j["family"] = std::string(to_string(cfg.family));
            j["gamma"] = cfg.gamma;
            j["n_folds"] = cfg.n_folds;
            j["seed"] = cfg.seed;
            j["lambda_hat"] = a.cv.lambda_hat;
            j["lambda_index"] = a.cv.index_hat + 1;
            j["sigma2_hat"] = f.sigma2_hat;
            j["sigma2_overridden"] = cfg.sigma2.has_value();
            j["dispersion_A"] = a.dispersion.A;
            j["A_overridden"] = cfg.A.has_value();
            j["intercept"] = intercept;
            ordered_json coefs = ordered_json::array();
            for (Index k = 0; k < p; ++k) {
                const auto u = static_cast<std::size_t>(k);
                coefs.push_back({{"index", k + 1},
                                 {"name", name_of(k)},
                                 {"beta_hat", number_or_null(f.excluded[u] ? NAN : beta[k])},
                                 {"se", number_or_null(se[k])},
                                 {"z", number_or_null(f.usable(k) ? f.z[k] : NAN)},
                                 {"beta_hat_std", number_or_null(f.excluded[u] ? NAN : f.beta_hat[k])},
                                 {"se_std", number_or_null(f.se[k])},
                                 {"support_size", f.supports[u].size()},
                                 {"converged", static_cast<bool>(f.converged[u])},
                                 {"excluded", static_cast<bool>(f.excluded[u])},
                                 {"collinear", static_cast<bool>(f.collinear[u])}});
            }
            j["coefficients"] = std::move(coefs);
            j["cv"] = {{"lambda", a.cv.lambdas}, {"cv_mean", a.cv.cv_mean}, {"cv_se", a.cv.cv_se}};
            j["warnings"] = a.warnings;
            detail::write_json(cfg, "fit.json", j);
        }
        if (cfg.wants_csv()) {
            const auto path = detail::output_path(cfg, "fit.csv");
            auto out = detail::open_output(path);
            out << "index,name,beta_hat,se,z,beta_hat_std,se_std,support_size,converged,excluded,collinear\n";
            for (Index k = 0; k < p; ++k) {
                const auto u = static_cast<std::size_t>(k);
                out << k + 1 << ',' << detail::csv_field(name_of(k)) << ','
                    << fmt(f.excluded[u] ? NAN : beta[k]) << ',' << fmt(se[k]) << ','
                    << fmt(f.usable(k) ? f.z[k] : NAN) << ',' << fmt(f.excluded[u] ? NAN : f.beta_hat[k]) << ','
                    << fmt(f.se[k]) << ',' << f.supports[u].size() << ',' << int(f.converged[u]) << ','
                    << int(f.excluded[u]) << ',' << int(f.collinear[u]) << '\n';
            }
            if (!out) throw IoError("write failed for '" + path.string() + "'");
        }
        for (const auto& w : a.warnings) err << "warning: " << w << '\n';
    });
}

/// select: threshold, selected set and intervals at level q, from either a
/// fit.json (config.fit_path) or raw data (config.input). Writes
/// selection.json and fdr_curve.csv.
inline int cmd_select(const RunConfig& cfg, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        cfg.validate();
        VectorXd z, se, beta;
        Index p = 0;
        double A = 0.0;
        if (!cfg.fit_path.empty()) {
            std::ifstream in(cfg.fit_path);
            if (!in) throw IoError("cannot open '" + cfg.fit_path + "'");
            const auto j = nlohmann::json::parse(in);
            if (j.value("schema", "") != "spidr.fit") throw IoError(cfg.fit_path + ": not a fit.json file");
            const auto& coefs = j.at("coefficients");
            p = static_cast<Index>(coefs.size());
            z = VectorXd::Zero(p);
            se = VectorXd::Constant(p, NAN);
            beta = VectorXd::Constant(p, NAN);
            for (Index k = 0; k < p; ++k) {
                const auto& c = coefs[static_cast<std::size_t>(k)];
                if (c.at("index").get<Index>() != k + 1) throw IoError(cfg.fit_path + ": coefficients out of order");
                if (c.at("z").is_number()) z[k] = c.at("z").get<double>();
                if (c.at("se").is_number()) se[k] = c.at("se").get<double>();
                if (c.at("beta_hat").is_number()) beta[k] = c.at("beta_hat").get<double>();
            }
            A = cfg.A ? *cfg.A : j.at("dispersion_A").get<double>();
        } else {
            const detail::FitBundle b = detail::run_fit(cfg);
            const SpidrFit& f = b.analysis.fit;
            p = f.p();
            z = f.z;
            beta = b.data.to_original_scale(f.beta_hat).second;
            se = b.data.se_to_original_scale(f.se);
            A = b.analysis.dispersion.A;
            for (const auto& w : b.analysis.warnings) err << "warning: " << w << '\n';
        }
        const SelectionResult sel = select(z, se, beta, p, cfg.q, A);
        if (cfg.wants_json()) detail::write_json(cfg, "selection.json", detail::selection_json(sel, beta, se, p));
        if (cfg.wants_csv()) detail::write_fdr_curve(cfg, sel.curve);
    });
}

inline SimDesign design_from_config(const RunConfig& cfg) {
    SimDesign d = SimDesign::from_name(cfg.design);
    if (cfg.loading) {
        if (d.name != DesignName::PathDemo) throw InvalidInput("loading applies to PathDemo only");
        d.a = *cfg.loading;
    }
    if (cfg.noise_sd) d.sigma = *cfg.noise_sd;
    d.random_support = cfg.random_support;
    return d;
}

/// simulate: replications of a named design. Writes summary.json (mean and
/// SD of NVS, FDR, FMR per method, selection frequencies) and reps.csv.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& err = std::cerr) {
    using detail::fmt;
    using detail::number_or_null;
    using detail::ordered_json;
    return detail::guarded(err, [&] {
        cfg.validate();
        const SimDesign design = design_from_config(cfg);
        PipelineOptions opt = cfg.pipeline();
        const RepSummary s =
            run_replications(design, cfg.n_reps, cfg.q, cfg.methods, cfg.seed, opt, resolve_threads(cfg.threads));

        if (cfg.wants_json()) {
            ordered_json j;
            j["schema"] = "spidr.summary";
            j["schema_version"] = kSchemaVersion;
            j["design"] = std::string(to_string(design.name));
            j["n"] = design.n;
            j["p"] = design.p;
            j["sigma"] = design.sigma;
            j["random_support"] = design.random_support;
            j["n_reps"] = s.n_reps;
            j["q"] = s.q;
            j["seed"] = s.seed;
            ordered_json truth = ordered_json::array();
            for (Index k : s.support) truth.push_back(k + 1);
            j["true_support"] = std::move(truth);
            ordered_json methods = ordered_json::array();
            for (const MethodSummary& m : s.methods) {
                ordered_json pcs = ordered_json::array();
                for (Index k : s.support) pcs.push_back(m.selection_freq[k]);
                std::vector<double> freq(m.selection_freq.data(), m.selection_freq.data() + m.selection_freq.size());
                methods.push_back({{"method", std::string(to_string(m.method))},
                                   {"n_ok", m.n_ok},
                                   {"n_failed", m.n_failed},
                                   {"NVS", {{"mean", number_or_null(m.mean_nvs)}, {"sd", number_or_null(m.sd_nvs)}}},
                                   {"FDR", {{"mean", number_or_null(m.mean_fdr)}, {"sd", number_or_null(m.sd_fdr)}}},
                                   {"FMR", {{"mean", number_or_null(m.mean_fmr)}, {"sd", number_or_null(m.sd_fmr)}}},
                                   {"ideal_agreement", number_or_null(m.mean_ideal_agreement)},
                                   {"pcs", std::move(pcs)},
                                   {"selection_frequency", std::move(freq)}});
            }
            j["methods"] = std::move(methods);
            detail::write_json(cfg, "summary.json", j);
        }
        if (cfg.wants_csv()) {
            const auto path = detail::output_path(cfg, "reps.csv");
            auto out = detail::open_output(path);
            out << "rep,method,ok,nvs,fdp,fmp,lambda_hat,t_hat,sigma2_hat,ideal_agreement,error\n";
            for (const RepRecord& r : s.records) {
                out << r.rep + 1 << ',' << to_string(r.method) << ',' << int(r.ok) << ',' << r.nvs << ','
                    << fmt(r.fdp) << ',' << fmt(r.fmp) << ',' << fmt(r.lambda_hat) << ',' << fmt(r.t_hat) << ','
                    << fmt(r.sigma2_hat) << ',' << fmt(r.ideal_agreement) << ',' << detail::csv_field(r.error)
                    << '\n';
            }
            if (!out) throw IoError("write failed for '" + path.string() + "'");
        }
        for (const MethodSummary& m : s.methods)
            if (m.n_failed > 0)
                err << "warning: " << to_string(m.method) << ": " << m.n_failed << " replications failed\n";
    });
}

/// paths: Lasso and MCP coefficient paths over the lambda grid plus the
/// semi-penalized beta_j(lambda) for the requested indices. Data come from
/// config.input, or from one draw of config.design when no input is given.
/// Writes paths.csv in long format: method,lambda_index,lambda,coefficient,value.
inline int cmd_paths(const RunConfig& cfg, std::ostream& err = std::cerr) {
    using detail::fmt;
    return detail::guarded(err, [&] {
        cfg.validate();
        Dataset raw = cfg.input.empty() ? generate(design_from_config(cfg), cfg.seed, 0).data
                                        : read_csv(cfg.input, cfg.has_header).data;
        const Dataset data = standardize(raw);
        for (long j : cfg.indices)
            if (j > data.p()) throw InvalidInput("coefficient index " + std::to_string(j) + " exceeds p");
        const LambdaGrid grid = make_lambda_grid(data, cfg.n_lambda, cfg.lambda_min_ratio);
        const unsigned threads = resolve_threads(cfg.threads);

        std::vector<PathFit> full(2);
        const Family fams[2] = {Family::Lasso, Family::MCP};
        parallel_for(2, threads, [&](Index f) {
            full[static_cast<std::size_t>(f)] = solve_path(data, fams[f], cfg.gamma, grid);
        });
        std::vector<VectorXd> semi(cfg.indices.size());
        parallel_for(static_cast<Index>(cfg.indices.size()), threads, [&](Index i) {
            semi[static_cast<std::size_t>(i)] =
                semi_penalized_path(cfg.indices[static_cast<std::size_t>(i)] - 1, data, cfg.family, cfg.gamma, grid);
        });

        const auto path = detail::output_path(cfg, "paths.csv");
        auto out = detail::open_output(path);
        out << "method,lambda_index,lambda,coefficient,value\n";
        for (int f = 0; f < 2; ++f) {
            const std::string name = fams[f] == Family::Lasso ? "Lasso" : "MCP";
            for (std::size_t l = 0; l < grid.size(); ++l)
                for (Index k = 0; k < data.p(); ++k)
                    out << name << ',' << l + 1 << ',' << fmt(grid[l]) << ',' << k + 1 << ','
                        << fmt(full[static_cast<std::size_t>(f)].betas(k, static_cast<Index>(l))) << '\n';
        }
        for (std::size_t i = 0; i < cfg.indices.size(); ++i)
            for (std::size_t l = 0; l < grid.size(); ++l)
                out << "SPIDR," << l + 1 << ',' << fmt(grid[l]) << ',' << cfg.indices[i] << ','
                    << fmt(semi[i][static_cast<Index>(l)]) << '\n';
        if (!out) throw IoError("write failed for '" + path.string() + "'");
        for (int f = 0; f < 2; ++f)
            if (!full[static_cast<std::size_t>(f)].all_converged())
                err << "warning: " << to_string(fams[f]) << " path has unconverged grid points\n";
    });
}

inline int run_command(const RunConfig& cfg, std::ostream& err = std::cerr) {
    if (cfg.command == "fit") return cmd_fit(cfg, err);
    if (cfg.command == "select") return cmd_select(cfg, err);
    if (cfg.command == "simulate") return cmd_simulate(cfg, err);
    if (cfg.command == "paths") return cmd_paths(cfg, err);
    err << "error: unknown command '" << cfg.command << "'; valid commands: fit, select, simulate, paths\n";
    return 2;
}

}  // namespace spidr
