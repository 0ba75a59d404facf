// Command-line front end: single solves from a config file, benchmark
// sweeps over measurement-count/SNR grids, the penalty-profile curve, and
// a verification report for one configuration.
//
// Exit codes: 0 success, 2 config/usage error, 3 verification failure
// (check), 4 sweep finished but some trials did not converge (CSV still
// written).

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gmemi/experiments.hpp"
#include "gmemi/gme_design.hpp"
#include "gmemi/linalg.hpp"
#include "gmemi/seeds.hpp"
#include "gmemi/solver.hpp"

namespace {

using namespace gmemi;

int write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return 0;
    }
    std::ofstream out(path);
    if (!out) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return 2;
    }
    out << text;
    return 0;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("bad number '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

// Candidate grids for --grid mode: coarse log grid on lambda, a
// model-appropriate coupling grid, an envelope-strength grid for the
// gme variants. Oracle criterion: mean NMSE against the known truth.
struct GridChoice {
    double lambda = 0.0, alpha = 0.0, theta = 0.0, mean_nmse = 0.0;
};

GridChoice grid_search(TrialConfig cell) {
    const std::string base =
        cell.model.rfind("gme-", 0) == 0 ? cell.model.substr(4) : cell.model;
    const bool gme = cell.model.rfind("gme-", 0) == 0;

    std::vector<double> lambdas = {0.003, 0.01, 0.03, 0.1, 0.3, 1.0};
    std::vector<double> alphas = {0.0};
    if (base == "lop") alphas = {1.0, 3.0, 6.0, 12.0, 24.0};
    if (base == "tgv") alphas = {0.2, 0.35, 0.5, 0.65, 0.8};
    std::vector<double> thetas = gme ? std::vector<double>{0.5, 0.8, 0.95}
                                     : std::vector<double>{0.0};

    GridChoice best;
    best.mean_nmse = std::numeric_limits<double>::infinity();
    for (double lam : lambdas)
        for (double al : alphas)
            for (double th : thetas) {
                TrialConfig c = cell;
                c.lambda = lam;
                c.alpha = al;
                c.theta = th;
                double sum = 0.0;
                bool ok = true;
                for (std::size_t t = 0; t < c.trials; ++t) {
                    TrialRecord rec = run_trial(c, t);
                    sum += rec.nmse;
                    ok = ok && rec.converged;
                }
                double mean = sum / static_cast<double>(c.trials);
                if (ok && mean < best.mean_nmse)
                    best = {lam, al, th, mean};
            }
    if (!std::isfinite(best.mean_nmse))
        throw std::runtime_error("grid search: no converged candidate for " + cell.model);
    return best;
}

int run_bench(const std::string& scenario, std::size_t n, const std::string& d_list,
              const std::string& snr_list, std::size_t trials, std::uint64_t seed,
              const std::string& models_csv, double lambda, double alpha, double theta,
              double threshold, std::size_t max_iters, const std::string& constraint,
              const std::string& out, const std::string& agg_out, bool walltime, bool grid) {
    std::vector<std::string> models;
    if (!models_csv.empty()) {
        models = parse_string_list(models_csv);
    } else if (scenario == "block-sparse") {
        models = {"gme-lop", "lop", "gme-l21", "l21", "gme-l1", "l1"};
    } else {
        models = {"gme-tgv", "tgv", "gme-tv", "tv"};
    }
    std::vector<double> ds = parse_double_list(d_list);
    std::vector<double> snrs = parse_double_list(snr_list);

    std::vector<TrialConfig> cells;
    for (const std::string& model : models)
        for (double d : ds)
            for (double snr : snrs) {
                TrialConfig c;
                c.scenario = scenario;
                c.model = model;
                c.n = n;
                c.d = static_cast<std::size_t>(d);
                c.snr_db = snr;
                c.trials = trials;
                c.rng_seed = seed;
                c.lambda = lambda;
                c.alpha = alpha;
                c.theta = theta;
                c.threshold = threshold;
                c.max_iters = max_iters;
                c.constraint = constraint;
                validate_config(resolve_defaults(c));
                if (grid) {
                    GridChoice g = grid_search(c);
                    std::fprintf(stderr,
                                 "grid %-8s d=%zu snr=%g -> lambda=%g alpha=%g theta=%g "
                                 "(mean nmse %.4g)\n",
                                 model.c_str(), c.d, snr, g.lambda, g.alpha, g.theta,
                                 g.mean_nmse);
                    c.lambda = g.lambda;
                    c.alpha = g.alpha;
                    c.theta = g.theta;
                }
                cells.push_back(c);
            }

    SweepOptions opts;
    opts.record_walltime = walltime;
    SweepResult res = run_sweep(cells, opts);
    int rc = write_text(out, res.detail_csv);
    if (rc) return rc;
    if (!agg_out.empty()) {
        rc = write_text(agg_out, res.aggregate_csv);
        if (rc) return rc;
    }
    return res.all_converged ? 0 : 4;
}

int run_check(const std::string& config_path) {
    TrialConfig cfg = resolve_defaults(parse_config_file(config_path));
    validate_config(cfg);

    // a deterministic instance of the configured cell
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, 0));
    Vector x_org = make_scenario_signal(cfg, rng);
    auto [a, y] = gen_measurements(x_org, cfg.d, cfg.snr_db, rng);
    ProblemSpec spec = build_model(cfg, a, y);

    bool ok = true;

    DenseMatrix q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
    auto [convex, qmin] = verify_overall_convexity(q, 1e-8);
    std::printf("overall convexity: lambda_min(Q) = %.6g  [%s]\n", qmin,
                convex ? "ok" : "FAIL");
    ok = ok && convex;

    StepParams params;
    try {
        params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
    } catch (const std::exception& e) {
        std::printf("step selection: FAILED (%s)\n", e.what());
        return 3;
    }
    std::printf("steps: gamma1=%.6g gamma2=%.6g gamma3=%.6g gamma4=%.6g\n", params.gamma1,
                params.gamma2, params.gamma3, params.gamma4);

    // margins of the four step conditions, recomputed directly
    const double kap = params.kappa;
    DenseMatrix ata = gram(spec.A);
    DenseMatrix ltl = gram(spec.L);
    DenseMatrix s1 = add(scaled(ata, kap / 2.0), scaled(ltl, spec.lambda));
    double m1 = 1.0 / params.gamma1 - operator_norm(s1);
    double mnorm = spec.seed.M.empty() ? 0.0 : operator_norm(spec.seed.M);
    double m2 = 1.0 / params.gamma2 - 1.0 - mnorm * mnorm;
    double m3 =
        1.0 / params.gamma3 - (kap / 2.0 + 2.0 / kap) * operator_norm(spec.BtB);
    double m4 = 1.0 / params.gamma4 - params.gamma3 * mnorm * mnorm;
    for (int i = 0; i < 4; ++i) {
        double m = (i == 0 ? m1 : i == 1 ? m2 : i == 2 ? m3 : m4);
        std::printf("step condition %d margin: %.6g  [%s]\n", i + 1, m,
                    m > 0.0 ? "ok" : "FAIL");
        ok = ok && m > 0.0;
    }

    PMetric metric = build_p_metric(spec.L, spec.seed.M, spec.BtB, params, spec.lambda);
    double pmin = min_eigenvalue_symmetric(metric.full);
    std::printf("metric: lambda_min(P) = %.6g  [%s]\n", pmin, pmin > 0.0 ? "ok" : "FAIL");
    ok = ok && pmin > 0.0;

    std::printf("%s\n", ok ? "all checks passed" : "verification failed");
    return ok ? 0 : 3;
}

int run_solve(const std::string& config_path, const std::string& out, bool walltime) {
    TrialConfig cfg = resolve_defaults(parse_config_file(config_path));
    validate_config(cfg);
    SweepOptions opts;
    opts.record_walltime = walltime;
    SweepResult res = run_sweep({cfg}, opts);
    int rc = write_text(out, res.detail_csv);
    if (rc) return rc;
    return res.all_converged ? 0 : 4;
}

int run_curve(double alpha, const std::string& btb, const std::string& r_spec, double s,
              const std::string& out) {
    std::vector<double> r_grid;
    // either a comma list or lo:hi:count
    if (r_spec.find(':') != std::string::npos) {
        std::istringstream in(r_spec);
        std::string a, b, c;
        std::getline(in, a, ':');
        std::getline(in, b, ':');
        std::getline(in, c);
        double lo = std::stod(a), hi = std::stod(b);
        std::size_t count = static_cast<std::size_t>(std::stoul(c));
        if (count < 2 || !(hi > lo)) throw std::invalid_argument("bad range spec");
        for (std::size_t i = 0; i < count; ++i)
            r_grid.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(count - 1));
    } else {
        r_grid = parse_double_list(r_spec);
    }
    std::string csv = penalty_curve(alpha, btb, r_grid, s);
    int rc = write_text(out, csv);
    if (rc) return rc;
    // nan rows signal evaluation failures
    return csv.find("nan") == std::string::npos ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convex-nonconvex regularization workbench"};
    app.require_subcommand(1);

    std::string config_path, out_path, agg_path, models_csv, d_list = "220",
                snr_list = "40", constraint = "default", btb_choice = "identity",
                r_spec = "0:8:33";
    std::size_t n = 256, trials = 20, max_iters = 10000;
    std::uint64_t seed = 1;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();
    double threshold = 1e-4, curve_alpha = 0.2, curve_s = 0.0;
    bool walltime = false, grid_mode = false, fixed_mode = false;

    auto* solve_cmd = app.add_subcommand("solve", "run one configured cell");
    solve_cmd->add_option("--config", config_path, "config file")->required();
    solve_cmd->add_option("--out", out_path, "detail CSV path ('-' = stdout)");
    solve_cmd->add_flag("--walltime", walltime, "record wall times (nondeterministic)");

    auto* bench_cmd = app.add_subcommand("bench", "benchmark sweeps");
    bench_cmd->require_subcommand(1);
    for (const char* name : {"block-sparse", "piecewise-linear"}) {
        auto* sc = bench_cmd->add_subcommand(name, std::string("scenario ") + name);
        sc->add_option("--n", n, "signal length");
        sc->add_option("--d", d_list, "measurement counts (comma list)");
        sc->add_option("--snr", snr_list, "SNR values in dB (comma list)");
        sc->add_option("--trials", trials, "trials per cell");
        sc->add_option("--seed", seed, "sweep seed");
        sc->add_option("--models", models_csv, "models (comma list; scenario roster)");
        sc->add_option("--lambda", lambda, "regularization weight");
        sc->add_option("--alpha", alpha, "coupling parameter");
        sc->add_option("--theta", theta, "envelope strength");
        sc->add_option("--threshold", threshold, "stopping threshold");
        sc->add_option("--max-iters", max_iters, "iteration cap");
        sc->add_option("--constraint", constraint, "default | whole-space | box:lo:hi");
        sc->add_option("--out", out_path, "detail CSV path ('-' = stdout)");
        sc->add_option("--aggregate-out", agg_path, "aggregate CSV path");
        sc->add_flag("--walltime", walltime, "record wall times (nondeterministic)");
        sc->add_flag("--grid", grid_mode, "coarse grid search per cell (oracle NMSE)");
        sc->add_flag("--fixed", fixed_mode, "pinned defaults (no search; the default)");
    }

    auto* curve_cmd = app.add_subcommand("curve", "penalty profile curves");
    auto* curve_tgv = curve_cmd->add_subcommand("tgv", "coupled-difference penalty curve");
    curve_tgv->add_option("--alpha", curve_alpha, "first-order weight in (0,1)");
    curve_tgv->add_option("--btb", btb_choice, "envelope metric choice");
    curve_tgv->add_option("--r", r_spec, "offset grid: comma list or lo:hi:count");
    curve_tgv->add_option("--s", curve_s, "ramp slope");
    curve_tgv->add_option("--out", out_path, "CSV path ('-' = stdout)");

    auto* check_cmd = app.add_subcommand("check", "verify one configured cell");
    check_cmd->add_option("--config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) return run_solve(config_path, out_path, walltime);
        if (*check_cmd) return run_check(config_path);
        if (*curve_cmd) return run_curve(curve_alpha, btb_choice, r_spec, curve_s, out_path);
        if (*bench_cmd) {
            if (grid_mode && fixed_mode) {
                std::cerr << "error: --grid and --fixed are mutually exclusive\n";
                return 2;
            }
            CLI::App* sc = bench_cmd->get_subcommands().front();
            const std::string scenario = sc->get_name();
            if (scenario == "piecewise-linear") {
                // flagship cell for this scenario
                if (!sc->count("--n")) n = 50;
                if (!sc->count("--d")) d_list = "100";
                if (!sc->count("--snr")) snr_list = "30";
            }
            return run_bench(scenario, n, d_list, snr_list, trials, seed, models_csv,
                             lambda, alpha, theta, threshold, max_iters, constraint,
                             out_path, agg_path, walltime, grid_mode);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
