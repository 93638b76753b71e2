#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "batchbandit/datasets.hpp"
#include "batchbandit/engine.hpp"

namespace batchbandit {

struct DecisionRecord {
    int experiment = 0;
    Hypothesis hypothesis = Hypothesis::h1;
    std::optional<std::size_t> true_best;
    std::vector<double> alpha;
    std::optional<std::size_t> winner;
    std::vector<std::int64_t> counts;
    std::int64_t total_samples = 0;
};

DecisionRecord make_record(const RunTrajectory& trajectory, int experiment,
                           Hypothesis hypothesis, std::optional<std::size_t> true_best);

// Runs one experiment spec as a campaign and streams its decision records.
std::vector<DecisionRecord> run_campaign(const ExperimentConfig& config, std::int64_t runs,
                                         int workers, int experiment, Hypothesis hypothesis,
                                         std::optional<std::size_t> true_best);

// A proportion with its Wilson score interval.
struct Rate {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t successes = 0;
    std::int64_t trials = 0;
};

inline constexpr double kZ95 = 1.959963984540054;

Rate wilson_rate(std::int64_t successes, std::int64_t trials, double z = kZ95);

// Fraction of H0 records with max alpha > delta. Non-H0 records are ignored.
Rate compute_fpr(std::span<const DecisionRecord> records, double delta);
// Fraction of H1 records whose claimed winner is the true best arm.
Rate compute_power(std::span<const DecisionRecord> records, double delta);
// Correct H1 claims over all claims; nullopt when nothing was claimed.
std::optional<Rate> compute_precision(std::span<const DecisionRecord> records, double delta);

// Share of samples served to arms other than `best`.
double compute_regret(std::span<const std::int64_t> counts, std::size_t best);
double compute_regret(const DecisionRecord& record);

struct MeanEstimate {
    double mean = 0.0;
    double sd = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> values, double z = kZ95);
// Mean regret over H1 records.
MeanEstimate mean_regret(std::span<const DecisionRecord> records);

// Moments of Beta(1, K'-1), the alpha_1 marginal of a flat Dirichlet over K' arms.
double flat_dirichlet_marginal_mean(int k_prime);
double flat_dirichlet_marginal_variance(int k_prime);

struct CalibrationPoint {
    double eta = 0.0;
    double alpha1_mean = 0.0;
    double alpha1_variance = 0.0;
    double distance = 0.0;
    double fpr = 0.0;
};

struct CalibrationResult {
    int k_prime = 2;
    double best_eta = 1.0;
    double target_mean = 0.0;
    double target_variance = 0.0;
    double delta = 0.0;
    std::vector<CalibrationPoint> curve;
};

struct CalibrationOptions {
    std::int64_t runs = 10000;
    std::int64_t samples_per_arm = 10000;
    double rho = 0.10;
    std::int64_t alpha_draws = 10000;
    std::uint64_t seed = 0;
    int workers = 1;
};

std::vector<double> default_eta_grid();

// For each eta, runs uniform sampling over K = K' equal arms and measures the
// squared distance of (mean, variance) of the final alpha_1 to the flat
// Dirichlet marginal. Every eta uses the same run seeds.
CalibrationResult calibrate_neutral_eta(int k_prime, std::span<const double> eta_grid,
                                        const CalibrationOptions& options = {});

struct ZSummary {
    double mean = 0.0;
    double sd = 0.0;
    double ci99_lo = 0.0;
    double ci99_hi = 0.0;
    std::int64_t n = 0;
    // Equal-width bins over [hist_lo, hist_hi]; values outside are clamped
    // into the end bins.
    double hist_lo = -5.0;
    double hist_hi = 5.0;
    std::vector<std::int64_t> histogram;
};

ZSummary summarize_z(std::span<const double> z, double hist_lo = -5.0, double hist_hi = 5.0,
                     int bins = 50);

struct BiasDemoOptions {
    std::int64_t runs = 100000;
    std::int64_t batch_size = 1000;
    std::vector<double> true_means = {0.01, 0.0, 0.0};
    double noise_sd = 1.0;
    VarianceMode variance = VarianceMode::known;
    double eta = 1.0;
    double gamma = 0.01;
    std::int64_t alpha_draws = 10000;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct BiasDemoResult {
    SamplingRule rule = SamplingRule::nb_ts;
    ZSummary naive;
    ZSummary weighted;
    std::vector<double> naive_z;
    std::vector<double> weighted_z;
};

// Two batches: uniform, then allocated by `rule`. Reports the studentized
// error of arm 1 under both the naive and the weighted statistic.
BiasDemoResult bias_demo(SamplingRule rule, const BiasDemoOptions& options = {});

struct ConvergenceOptions {
    std::vector<double> means;
    int k_prime = 2;
    SamplingRule rule = SamplingRule::uniform;
    double eta = 1.0;
    std::int64_t runs = 10000;
    int batches = 20;
    std::int64_t batch_size = 500;
    double delta = 0.95;
    double gamma = 0.01;
    std::int64_t alpha_draws = 10000;
    std::int64_t allocation_draws = 0;
    VarianceMode variance = VarianceMode::known;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct ConvergenceResult {
    // Final alpha restricted to the K' tied arms, one row per run.
    std::vector<std::vector<double>> alphas;
    double marginal_mean = 0.0;
    double marginal_variance = 0.0;
    // Beta(a, b) matched to the marginal moments of alpha_1.
    double beta_a = 0.0;
    double beta_b = 0.0;
    Rate exceedance;
};

ConvergenceResult convergence_study(const ConvergenceOptions& options);

}  // namespace batchbandit
