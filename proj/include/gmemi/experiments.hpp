#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gmemi/linalg.hpp"
#include "gmemi/solver.hpp"

namespace gmemi {

// One sweep cell. lambda / alpha / theta left NaN mean "resolve to the
// pinned per-model default" (see resolve_defaults).
struct TrialConfig {
    std::string scenario = "block-sparse";  // block-sparse | piecewise-linear
    std::string model = "gme-lop";  // gme-lop lop gme-l21 l21 gme-l1 l1
                                    // gme-tgv tgv gme-tv tv
    std::size_t n = 256;
    std::size_t d = 220;
    double snr_db = 40.0;  // +inf sentinel: noiseless
    std::size_t trials = 1;
    std::uint64_t rng_seed = 1;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();
    double threshold = 1e-4;
    std::size_t max_iters = 10000;
    std::string constraint = "default";  // default | whole-space | box:lo:hi
};

// Key/value text: one `key = value` (or `key: value`, `key value`) per
// line, '#' comments. Unknown keys or malformed values throw
// std::invalid_argument. Keys: scenario, model, n, d, snr_db, trials,
// rng_seed, lambda, alpha, theta, threshold, max_iters, constraint.
TrialConfig parse_config_text(const std::string& text);
TrialConfig parse_config_file(const std::string& path);

// Throws std::invalid_argument on out-of-domain fields.
void validate_config(const TrialConfig& cfg);

// Fills NaN lambda/alpha/theta with per-model defaults tuned at the
// flagship cells (block-sparse 256/220/40dB, piecewise-linear 50/100/30dB).
TrialConfig resolve_defaults(TrialConfig cfg);

// `blocks` disjoint runs with lengths >= 1 summing to `nonzeros` (lengths
// from a symmetric Dirichlet via normalized exponentials, largest-remainder
// rounding; gaps >= 1 between runs placed by a uniform composition),
// amplitudes i.i.d. N(0,1). Throws when the packing cannot fit.
Vector gen_block_sparse(std::size_t n, std::size_t blocks, std::size_t nonzeros,
                        std::mt19937_64& rng);

// profile "default": fixed signal in [-1,1]^n with two plateaus-to-ramp
// slope changes and one jump. profile "fig2:<s>:<r>": zeros on the first
// half, then the ramp s*(i - n/2) + r.
Vector gen_piecewise_linear(std::size_t n, const std::string& profile);

// A with i.i.d. N(0,1) entries; y = A x_org + eps, eps white Gaussian with
// variance ||A x_org||^2 / (d * 10^(snr_db/10)) (empirical per-trial
// power). snr_db = +inf yields eps = 0.
std::pair<DenseMatrix, Vector> gen_measurements(const Vector& x_org, std::size_t d,
                                                double snr_db, std::mt19937_64& rng);

// ||x_org - x_hat||^2 / ||x_org||^2; throws on x_org = 0.
double nmse(const Vector& x_org, const Vector& x_hat);

// Per-trial generator stream: splitmix-style mix of (seed, trial).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t trial);

// The scenario's ground-truth signal for one trial (block-sparse draws
// from rng; piecewise-linear is the fixed default profile).
Vector make_scenario_signal(const TrialConfig& cfg, std::mt19937_64& rng);

// Assembles the ProblemSpec for cfg.model on data (A, y): seed + analysis
// operator per model family, envelope BtB from the matching construction
// (theta = 0 for the convex baselines), constraint resolved per scenario.
// cfg must have concrete (non-NaN) lambda/alpha/theta.
ProblemSpec build_model(const TrialConfig& cfg, const DenseMatrix& A, const Vector& y);

struct TrialRecord {
    TrialConfig config;  // cell echo (resolved values)
    std::size_t trial = 0;
    double nmse = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double wall_time_s = 0.0;
    double final_residual = 0.0;  // cross-check field, not a CSV column
};

struct SweepOptions {
    // Wall time is the one nondeterministic column; it stays 0.000000
    // unless explicitly requested, keeping CSVs byte-identical per seed.
    bool record_walltime = false;
};

struct SweepResult {
    std::vector<TrialRecord> records;
    std::string detail_csv;     // scenario,model,n,d,snr_db,trial,nmse,
                                // iterations,converged,wall_time_s
    std::string aggregate_csv;  // scenario,model,n,d,snr_db,trials,
                                // mean_nmse,mean_iterations
    bool all_converged = true;
};

// One trial of one cell: generate signal + measurements from the
// (rng_seed, trial) stream, build the model, solve, record NMSE. A trial
// that throws is recorded as converged=false with the zero estimate.
TrialRecord run_trial(const TrialConfig& cfg, std::size_t trial, const SweepOptions& opts = {});

// All cells, all trials, in deterministic order.
SweepResult run_sweep(const std::vector<TrialConfig>& grid, const SweepOptions& opts = {});

// Penalty profile along the slope-offset family of the n = 50 ramp
// signal: for each r, evaluates the coupled-difference penalty and its
// envelope-corrected variant on the differenced signal. btb_choice:
// "identity" only. CSV: r,s,alpha,tgv,gme_tgv; failed evaluations print
// nan. Evaluation accuracy 1e-6.
std::string penalty_curve(double alpha, const std::string& btb_choice,
                          const std::vector<double>& r_grid, double s);

}  // namespace gmemi
