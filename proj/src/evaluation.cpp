#include "batchbandit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "batchbandit/error.hpp"

namespace batchbandit {

namespace {

constexpr double kZ99 = 2.5758293035489004;

bool claims(const DecisionRecord& r, double delta) {
    return decide_winner(std::span<const double>(r.alpha), delta).has_value();
}

std::optional<std::size_t> claim(const DecisionRecord& r, double delta) {
    return decide_winner(std::span<const double>(r.alpha), delta);
}

std::vector<BatchSummary> arm_history(const RunTrajectory& t, std::size_t arm) {
    std::vector<BatchSummary> h;
    h.reserve(t.batches.size());
    for (const auto& b : t.batches) h.push_back(b.summaries.at(arm));
    return h;
}

}  // namespace

DecisionRecord make_record(const RunTrajectory& trajectory, int experiment,
                           Hypothesis hypothesis, std::optional<std::size_t> true_best) {
    DecisionRecord r;
    r.experiment = experiment;
    r.hypothesis = hypothesis;
    r.true_best = hypothesis == Hypothesis::h1 ? true_best : std::nullopt;
    r.alpha = trajectory.final_alpha.alpha;
    r.winner = trajectory.winner;
    r.counts = trajectory.cumulative_counts;
    r.total_samples = trajectory.total_samples;
    return r;
}

std::vector<DecisionRecord> run_campaign(const ExperimentConfig& config, std::int64_t runs,
                                         int workers, int experiment, Hypothesis hypothesis,
                                         std::optional<std::size_t> true_best) {
    if (runs < 1) fail(ErrorKind::invalid_config, "num_runs must be >= 1");
    return map_runs(config, runs, workers, [&](const RunTrajectory& t) {
        return make_record(t, experiment, hypothesis, true_best);
    });
}

Rate wilson_rate(std::int64_t successes, std::int64_t trials, double z) {
    if (trials <= 0) fail(ErrorKind::insufficient_data, "rate over zero trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return {p, lo, hi, successes, trials};
}

Rate compute_fpr(std::span<const DecisionRecord> records, double delta) {
    std::int64_t n = 0;
    std::int64_t hits = 0;
    for (const auto& r : records) {
        if (r.hypothesis != Hypothesis::h0) continue;
        ++n;
        if (claims(r, delta)) ++hits;
    }
    if (n == 0) fail(ErrorKind::insufficient_data, "FPR needs at least one H0 record");
    return wilson_rate(hits, n);
}

Rate compute_power(std::span<const DecisionRecord> records, double delta) {
    std::int64_t n = 0;
    std::int64_t hits = 0;
    for (const auto& r : records) {
        if (r.hypothesis != Hypothesis::h1) continue;
        ++n;
        const auto w = claim(r, delta);
        if (w && r.true_best && *w == *r.true_best) ++hits;
    }
    if (n == 0) fail(ErrorKind::insufficient_data, "power needs at least one H1 record");
    return wilson_rate(hits, n);
}

std::optional<Rate> compute_precision(std::span<const DecisionRecord> records, double delta) {
    std::int64_t all_claims = 0;
    std::int64_t correct = 0;
    for (const auto& r : records) {
        const auto w = claim(r, delta);
        if (!w) continue;
        ++all_claims;
        if (r.hypothesis == Hypothesis::h1 && r.true_best && *w == *r.true_best) ++correct;
    }
    if (all_claims == 0) return std::nullopt;
    return wilson_rate(correct, all_claims);
}

double compute_regret(std::span<const std::int64_t> counts, std::size_t best) {
    if (best >= counts.size()) fail(ErrorKind::invalid_input, "best arm out of range");
    const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    if (total == 0) fail(ErrorKind::insufficient_data, "regret of an empty run");
    return static_cast<double>(total - counts[best]) / static_cast<double>(total);
}

double compute_regret(const DecisionRecord& record) {
    if (!record.true_best) fail(ErrorKind::invalid_input, "regret needs a true best arm");
    return compute_regret(record.counts, *record.true_best);
}

MeanEstimate mean_estimate(std::span<const double> values, double z) {
    if (values.empty()) fail(ErrorKind::insufficient_data, "mean of no values");
    MeanEstimate m;
    m.n = static_cast<std::int64_t>(values.size());
    const double n = static_cast<double>(m.n);
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.sd = m.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double half = z * m.sd / std::sqrt(n);
    m.ci_lo = m.mean - half;
    m.ci_hi = m.mean + half;
    return m;
}

MeanEstimate mean_regret(std::span<const DecisionRecord> records) {
    std::vector<double> regrets;
    for (const auto& r : records) {
        if (r.hypothesis == Hypothesis::h1) regrets.push_back(compute_regret(r));
    }
    if (regrets.empty()) fail(ErrorKind::insufficient_data, "regret needs at least one H1 record");
    return mean_estimate(regrets);
}

double flat_dirichlet_marginal_mean(int k_prime) { return 1.0 / k_prime; }

double flat_dirichlet_marginal_variance(int k_prime) {
    const double k = k_prime;
    return (k - 1.0) / (k * k * (k + 1.0));
}

std::vector<double> default_eta_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 16; ++i) grid.push_back(0.40 + 0.05 * i);
    return grid;
}

CalibrationResult calibrate_neutral_eta(int k_prime, std::span<const double> eta_grid,
                                        const CalibrationOptions& options) {
    if (eta_grid.empty()) fail(ErrorKind::invalid_config, "eta grid is empty");
    if (k_prime < 2) fail(ErrorKind::invalid_config, "k_prime must be >= 2");
    for (double eta : eta_grid) {
        if (!(eta > 0.0 && eta <= 2.0)) fail(ErrorKind::invalid_config, "eta grid must lie in (0, 2]");
    }

    CalibrationResult result;
    result.k_prime = k_prime;
    result.target_mean = flat_dirichlet_marginal_mean(k_prime);
    result.target_variance = flat_dirichlet_marginal_variance(k_prime);
    result.delta = threshold_for_fpr(options.rho, k_prime);

    ExperimentConfig config;
    config.arms.assign(static_cast<std::size_t>(k_prime), ArmSpec{0.0, 1.0, Trend::stationary});
    config.schedule = {BatchKind::fixed_size, options.samples_per_arm * k_prime, 1};
    config.rule = SamplingRule::uniform;
    config.decision = DecisionRule::from_fpr(options.rho, k_prime);
    config.alpha_draws = options.alpha_draws;
    config.seed = options.seed;

    double best_distance = std::numeric_limits<double>::infinity();
    for (double eta : eta_grid) {
        config.eta = eta;
        const auto alpha1 = map_runs(config, options.runs, options.workers,
                                     [](const RunTrajectory& t) { return t.final_alpha.alpha; });
        std::vector<double> first;
        std::int64_t exceed = 0;
        for (const auto& a : alpha1) {
            first.push_back(a[0]);
            if (decide_winner(std::span<const double>(a), result.delta)) ++exceed;
        }
        const auto m = mean_estimate(first);
        CalibrationPoint p;
        p.eta = eta;
        p.alpha1_mean = m.mean;
        p.alpha1_variance = m.sd * m.sd;
        p.distance = (p.alpha1_mean - result.target_mean) * (p.alpha1_mean - result.target_mean) +
                     (p.alpha1_variance - result.target_variance) *
                         (p.alpha1_variance - result.target_variance);
        p.fpr = static_cast<double>(exceed) / static_cast<double>(options.runs);
        if (p.distance < best_distance) {
            best_distance = p.distance;
            result.best_eta = eta;
        }
        result.curve.push_back(p);
    }
    return result;
}

ZSummary summarize_z(std::span<const double> z, double hist_lo, double hist_hi, int bins) {
    const auto m = mean_estimate(z);
    ZSummary s;
    s.n = m.n;
    s.mean = m.mean;
    s.sd = m.sd;
    const double half = kZ99 * m.sd / std::sqrt(static_cast<double>(m.n));
    s.ci99_lo = m.mean - half;
    s.ci99_hi = m.mean + half;
    s.hist_lo = hist_lo;
    s.hist_hi = hist_hi;
    s.histogram.assign(static_cast<std::size_t>(bins), 0);
    const double width = (hist_hi - hist_lo) / bins;
    for (double v : z) {
        const auto i = static_cast<long>(std::floor((v - hist_lo) / width));
        ++s.histogram[static_cast<std::size_t>(std::clamp<long>(i, 0, bins - 1))];
    }
    return s;
}

BiasDemoResult bias_demo(SamplingRule rule, const BiasDemoOptions& options) {
    if (rule == SamplingRule::uniform) {
        fail(ErrorKind::invalid_config, "bias demo needs one of the four Bayesian rules");
    }
    if (options.true_means.size() < 2) fail(ErrorKind::invalid_config, "need at least two arms");

    ExperimentConfig config;
    for (double m : options.true_means) {
        config.arms.push_back({m, options.noise_sd, Trend::stationary});
    }
    config.schedule = {BatchKind::fixed_size, options.batch_size, 2};
    config.rule = rule;
    config.eta = options.eta;
    config.gamma = options.gamma;
    config.variance = options.variance;
    config.alpha_draws = options.alpha_draws;
    config.seed = options.seed;

    const double truth = options.true_means[0];
    const double known_sigma_sq = options.noise_sd * options.noise_sd;
    const bool known = options.variance == VarianceMode::known;

    const auto pairs = map_runs(config, options.runs, options.workers, [&](const RunTrajectory& t) {
        const auto h = arm_history(t, 0);
        const double nb = nb_point_estimate(h);
        const double nb_var = known ? known_sigma_sq
                                    : estimate_sample_variance(h, StatisticScheme::naive);
        std::int64_t n = 0;
        for (const auto& s : h) n += s.count;
        const double nb_tau = static_cast<double>(n) / nb_var;

        const double wb_var = known ? known_sigma_sq
                                    : estimate_sample_variance(h, StatisticScheme::weighted);
        const auto wb = wb_point_estimate(h, WeightScheme::phi_one, wb_var);
        return std::pair{studentized_z(nb, nb_tau, truth),
                         studentized_z(wb.estimate, wb.tau, truth)};
    });

    BiasDemoResult out;
    out.rule = rule;
    out.naive_z.reserve(pairs.size());
    out.weighted_z.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        out.naive_z.push_back(a);
        out.weighted_z.push_back(b);
    }
    out.naive = summarize_z(out.naive_z);
    out.weighted = summarize_z(out.weighted_z);
    return out;
}

ConvergenceResult convergence_study(const ConvergenceOptions& options) {
    const int k = static_cast<int>(options.means.size());
    if (options.k_prime < 2 || options.k_prime > k) {
        fail(ErrorKind::invalid_config, "k_prime must be in [2, K]");
    }
    ExperimentConfig config;
    for (double m : options.means) config.arms.push_back({m, 1.0, Trend::stationary});
    config.schedule = {BatchKind::fixed_size, options.batch_size, options.batches};
    config.rule = options.rule;
    config.eta = options.eta;
    config.gamma = options.gamma;
    config.decision = DecisionRule::from_threshold(options.delta, options.k_prime);
    config.variance = options.variance;
    config.alpha_draws = options.alpha_draws;
    config.allocation_draws = options.allocation_draws;
    config.seed = options.seed;

    const auto finals = map_runs(config, options.runs, options.workers,
                                 [](const RunTrajectory& t) { return t.final_alpha.alpha; });

    ConvergenceResult out;
    std::vector<double> first;
    std::int64_t exceed = 0;
    for (const auto& a : finals) {
        out.alphas.emplace_back(a.begin(), a.begin() + options.k_prime);
        first.push_back(a[0]);
        if (decide_winner(std::span<const double>(a), options.delta)) ++exceed;
    }
    const auto m = mean_estimate(first);
    out.marginal_mean = m.mean;
    out.marginal_variance = m.sd * m.sd;
    // Beta moment matching: a + b = mean (1 - mean) / var - 1
    if (out.marginal_variance > 0.0) {
        const double common = out.marginal_mean * (1.0 - out.marginal_mean) / out.marginal_variance - 1.0;
        out.beta_a = out.marginal_mean * common;
        out.beta_b = (1.0 - out.marginal_mean) * common;
    }
    out.exceedance = wilson_rate(exceed, options.runs);
    return out;
}

}  // namespace batchbandit
