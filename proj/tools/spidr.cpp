#include <cctype>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "spidr/cli.hpp"

namespace {

// Options shared by fit, select and paths.
void add_model_options(CLI::App* app, spidr::RunConfig& cfg, std::string& family) {
    app->add_option("--family", family, "Penalty family: mcp or lasso")
        ->check(CLI::IsMember({"mcp", "lasso"}, CLI::ignore_case))
        ->envname("SPIDR_FAMILY");
    app->add_option("--gamma", cfg.gamma, "MCP concavity")->envname("SPIDR_GAMMA");
    app->add_option("--folds", cfg.n_folds, "Cross-validation folds")->envname("SPIDR_FOLDS");
    app->add_option("--n-lambda", cfg.n_lambda, "Lambda grid size")->envname("SPIDR_N_LAMBDA");
    app->add_option("--lambda-min-ratio", cfg.lambda_min_ratio, "Smallest lambda as a fraction of lambda_max")
        ->envname("SPIDR_LAMBDA_MIN_RATIO");
    app->add_option("--sigma2", cfg.sigma2, "Use this error variance instead of estimating it")
        ->envname("SPIDR_SIGMA2");
    app->add_option("--A", cfg.A, "Use this dispersion A instead of estimating it")->envname("SPIDR_A");
    app->add_flag_callback(
        "--sigma2-minus-support",
        [&cfg] { cfg.sigma2_denominator = spidr::Sigma2Denominator::MinusSupport; },
        "Divide the split-refit residual sum of squares by n2 - |S| instead of n2 + |S|");
}

void add_data_options(CLI::App* app, spidr::RunConfig& cfg, bool required) {
    auto* opt = app->add_option("-i,--input", cfg.input, "CSV data file, response in the first column")
                    ->envname("SPIDR_INPUT");
    if (required) opt->required();
    app->add_flag_callback(
        "--no-header", [&cfg] { cfg.has_header = false; }, "The CSV file has no header row");
}

}  // namespace

int main(int argc, char** argv) {
    spidr::RunConfig cfg;
    CLI::App app{"Variable selection with FDR-controlled semi-penalized estimates"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string family = "mcp";
    std::string format = "both";
    app.add_option("-o,--outdir", cfg.outdir, "Output directory")->envname("SPIDR_OUTDIR");
    app.add_option("--format", format, "Which reports to write: both, csv or json")
        ->check(CLI::IsMember({"both", "csv", "json"}, CLI::ignore_case))
        ->envname("SPIDR_FORMAT");
    app.add_option("--seed", cfg.seed, "Random seed")->envname("SPIDR_SEED");
    app.add_option("--threads", cfg.threads, "Worker threads, 0 for all cores")->envname("SPIDR_THREADS");
    app.add_option("-q,--q", cfg.q, "Nominal FDR level")->envname("SPIDR_Q");

    auto* fit = app.add_subcommand("fit", "Estimate coefficients, standard errors and z-statistics");
    add_data_options(fit, cfg, true);
    add_model_options(fit, cfg, family);

    auto* sel = app.add_subcommand("select", "Select variables at FDR level q");
    auto* fit_in = sel->add_option("--fit", cfg.fit_path, "fit.json produced by the fit command")
                       ->envname("SPIDR_FIT");
    add_data_options(sel, cfg, false);
    add_model_options(sel, cfg, family);
    sel->get_option("--input")->excludes(fit_in);

    auto* sim = app.add_subcommand("simulate", "Run replications of a simulation design");
    sim->add_option("--design", cfg.design, "PathDemo, Example1, Example2 or Example3")->envname("SPIDR_DESIGN");
    sim->add_option("--reps", cfg.n_reps, "Number of replications")->envname("SPIDR_REPS");
    sim->add_option("--noise-sd", cfg.noise_sd, "Override the design's noise standard deviation");
    sim->add_option("--loading", cfg.loading, "PathDemo factor loading a");
    sim->add_flag("--random-support", cfg.random_support, "Place the nonzero coefficients at random indices");
    std::vector<std::string> method_names;
    sim->add_option("--methods", method_names, "Subset of Lasso, MCP, SPIDR")->delimiter(',');
    add_model_options(sim, cfg, family);

    auto* paths = app.add_subcommand("paths", "Write solution paths over the lambda grid");
    add_data_options(paths, cfg, false);
    paths->add_option("--design", cfg.design, "Simulate one dataset from this design when no input is given")
        ->envname("SPIDR_DESIGN");
    paths->add_option("--loading", cfg.loading, "PathDemo factor loading a");
    paths->add_option("--index", cfg.indices, "1-based coefficients for semi-penalized paths")->delimiter(',');
    add_model_options(paths, cfg, family);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    cfg.family = spidr::parse_family(lower(family));
    if (lower(format) == "csv") cfg.format = spidr::OutputFormat::Csv;
    else if (lower(format) == "json") cfg.format = spidr::OutputFormat::Json;

    if (!method_names.empty()) {
        cfg.methods.clear();
        for (const auto& m : method_names) {
            if (m == "Lasso" || m == "lasso") cfg.methods.push_back(spidr::Method::Lasso);
            else if (m == "MCP" || m == "mcp") cfg.methods.push_back(spidr::Method::MCP);
            else if (m == "SPIDR" || m == "spidr") cfg.methods.push_back(spidr::Method::SPIDR);
            else {
                std::cerr << "error: unknown method '" << m << "'; valid methods: Lasso, MCP, SPIDR\n";
                return 2;
            }
        }
    }
    if (fit->parsed()) cfg.command = "fit";
    else if (sel->parsed()) cfg.command = "select";
    else if (sim->parsed()) cfg.command = "simulate";
    else cfg.command = "paths";
    if (cfg.command == "paths" && cfg.design == "Example1" && cfg.input.empty() &&
        !paths->get_option("--design")->count())
        cfg.design = "PathDemo";
    if (cfg.command == "select" && cfg.fit_path.empty() && cfg.input.empty()) {
        std::cerr << "error: select needs --fit or --input\n";
        return 2;
    }
    return spidr::run_command(cfg, std::cerr);
}
