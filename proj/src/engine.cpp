#include "batchbandit/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "batchbandit/error.hpp"

namespace batchbandit {

namespace {

std::string normalize(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '-' || c == '_' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

PosteriorOptions posterior_options(const ExperimentConfig& config) {
    PosteriorOptions opts;
    opts.statistic = statistic_for(config.rule);
    opts.weights = config.weights;
    opts.variance = config.variance;
    opts.default_sigma_sq = config.default_sigma_sq;
    opts.prior = config.prior;
    opts.known_sigma_sq.reserve(config.arms.size());
    for (const auto& arm : config.arms) opts.known_sigma_sq.push_back(arm.noise_sd * arm.noise_sd);
    return opts;
}

std::vector<double> target_for(const ExperimentConfig& config, const OptimalProbs& alpha) {
    switch (config.rule) {
        case SamplingRule::uniform: return uniform_target(config.num_arms());
        case SamplingRule::nb_ts:
        case SamplingRule::wb_ts: return ts_target(alpha);
        case SamplingRule::nb_ttts:
        case SamplingRule::wb_ttts: return ttts_target(alpha, config.beta);
    }
    return uniform_target(config.num_arms());
}

}  // namespace

const char* to_string(SamplingRule rule) noexcept {
    switch (rule) {
        case SamplingRule::uniform: return "Unif";
        case SamplingRule::nb_ts: return "NB-TS";
        case SamplingRule::wb_ts: return "WB-TS";
        case SamplingRule::nb_ttts: return "NB-TTTS";
        case SamplingRule::wb_ttts: return "WB-TTTS";
    }
    return "?";
}

SamplingRule parse_sampling_rule(const std::string& name) {
    const std::string n = normalize(name);
    if (n == "unif" || n == "uniform") return SamplingRule::uniform;
    if (n == "nbts") return SamplingRule::nb_ts;
    if (n == "wbts") return SamplingRule::wb_ts;
    if (n == "nbttts") return SamplingRule::nb_ttts;
    if (n == "wbttts") return SamplingRule::wb_ttts;
    fail(ErrorKind::invalid_config, "unknown sampling rule '" + name + "'");
}

StatisticScheme statistic_for(SamplingRule rule) noexcept {
    return rule == SamplingRule::wb_ts || rule == SamplingRule::wb_ttts
               ? StatisticScheme::weighted
               : StatisticScheme::naive;
}

bool is_top_two(SamplingRule rule) noexcept {
    return rule == SamplingRule::nb_ttts || rule == SamplingRule::wb_ttts;
}

void ExperimentConfig::validate() const {
    Environment{arms, schedule}.validate();
    const double k = static_cast<double>(arms.size());
    if (!(gamma >= 0.0) || !(gamma * k < 1.0)) {
        fail(ErrorKind::invalid_config, "gamma must satisfy 0 <= gamma * K < 1");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) fail(ErrorKind::invalid_config, "eta must be > 0");
    if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorKind::invalid_config, "beta must be in (0, 1]");
    if (!(decision.delta > 0.0 && decision.delta < 1.0)) {
        fail(ErrorKind::invalid_config, "delta must be in (0, 1)");
    }
    if (decision.k_prime < 2) fail(ErrorKind::invalid_config, "k_prime must be >= 2");
    if (alpha_draws < kMinOptimalProbDraws ||
        (allocation_draws != 0 && allocation_draws < kMinOptimalProbDraws)) {
        fail(ErrorKind::invalid_config, "alpha draw counts must be at least " +
                                            std::to_string(kMinOptimalProbDraws));
    }
    if (!(default_sigma_sq > 0.0)) fail(ErrorKind::invalid_config, "default sigma^2 must be > 0");
    if (replay) {
        if (replay->num_arms() != static_cast<int>(arms.size())) {
            fail(ErrorKind::invalid_config,
                 "replay log has " + std::to_string(replay->num_arms()) + " arms, config has " +
                     std::to_string(arms.size()));
        }
        if (replay->num_batches() < schedule.num_batches) {
            fail(ErrorKind::replay_coverage,
                 "replay log covers " + std::to_string(replay->num_batches()) +
                     " batches, schedule needs " + std::to_string(schedule.num_batches));
        }
    }
}

RunTrajectory run_experiment(const ExperimentConfig& config, std::uint64_t run_seed_value) {
    config.validate();
    const std::size_t k = config.num_arms();
    const int num_batches = config.schedule.num_batches;
    const Environment env{config.arms, config.schedule};

    Rng reward_rng = make_rng(run_seed_value, 0);
    PosteriorSet posteriors(k, posterior_options(config));

    RunTrajectory traj;
    traj.seed = run_seed_value;
    traj.batches.reserve(static_cast<std::size_t>(num_batches));
    traj.cumulative_counts.assign(k, 0);

    std::vector<double> target = uniform_target(k);
    for (int b = 1; b <= num_batches; ++b) {
        BatchRecord rec;
        rec.batch = b;
        // Batch 1 is exactly uniform: nothing is known yet.
        rec.allocation = b == 1 ? Allocation{uniform_target(k), config.gamma}
                                : apply_floor(target, config.gamma);
        rec.summaries = config.replay
                            ? replay_batch(*config.replay, rec.allocation, b, config.schedule,
                                           reward_rng)
                            : draw_batch(env, rec.allocation, b, reward_rng);
        posteriors.add_batch(rec.summaries);
        for (std::size_t i = 0; i < k; ++i) {
            traj.cumulative_counts[i] += rec.summaries[i].count;
            traj.total_samples += rec.summaries[i].count;
        }

        const bool last = b == num_batches;
        const bool need_alpha = last || config.rule != SamplingRule::uniform;
        if (need_alpha && posteriors.all_informed()) {
            const auto draws = last ? config.alpha_draws : config.effective_allocation_draws();
            rec.alpha = estimate_optimal_probs(posteriors, config.eta, draws,
                                               substream_seed(run_seed_value,
                                                              static_cast<std::uint64_t>(b)));
            target = target_for(config, *rec.alpha);
        } else {
            target = uniform_target(k);
        }
        traj.batches.push_back(std::move(rec));
    }

    const auto& last = traj.batches.back();
    if (last.alpha) {
        traj.final_alpha = *last.alpha;
        traj.winner = decide_winner(traj.final_alpha, config.decision);
    } else {
        traj.final_alpha.alpha = uniform_target(k);
        traj.final_alpha.wins.assign(k, 0);
        traj.winner = std::nullopt;
    }
    return traj;
}

int default_worker_count() {
    if (const char* env = std::getenv("BATCHBANDIT_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const int threads = static_cast<int>(std::clamp<std::int64_t>(workers, 1, n));
    if (threads == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (!stop.load(std::memory_order_relaxed)) {
                const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    stop = true;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::vector<RunTrajectory> run_monte_carlo(const ExperimentConfig& config, std::int64_t runs,
                                           int workers) {
    if (runs < 1) fail(ErrorKind::invalid_config, "num_runs must be >= 1");
    return map_runs(config, runs, workers, [](const RunTrajectory& t) { return t; });
}

}  // namespace batchbandit
