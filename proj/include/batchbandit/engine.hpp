#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "batchbandit/allocation.hpp"
#include "batchbandit/environment.hpp"
#include "batchbandit/posterior.hpp"

namespace batchbandit {

enum class SamplingRule { uniform, nb_ts, wb_ts, nb_ttts, wb_ttts };

const char* to_string(SamplingRule rule) noexcept;
// Accepts the display names ("NB-TS", "WB-TTTS", "uniform"/"Unif", ...),
// case-insensitively.
SamplingRule parse_sampling_rule(const std::string& name);

// Statistic scheme used for posterior updating under a rule. The uniform
// baseline uses the naive (pooled) statistic.
StatisticScheme statistic_for(SamplingRule rule) noexcept;
bool is_top_two(SamplingRule rule) noexcept;

struct ExperimentConfig {
    std::vector<ArmSpec> arms;
    BatchSchedule schedule;
    SamplingRule rule = SamplingRule::wb_ttts;
    double gamma = 0.01;
    double eta = 1.0;
    double beta = 0.5;
    DecisionRule decision = DecisionRule::from_fpr(0.10, 2);
    VarianceMode variance = VarianceMode::known;
    WeightScheme weights = WeightScheme::phi_one;
    double default_sigma_sq = 1.0;
    GaussianPosterior prior{};
    // Draws for the final decision (and for allocation unless overridden).
    std::int64_t alpha_draws = 10000;
    // Draws for per-batch allocation; 0 means alpha_draws.
    std::int64_t allocation_draws = 0;
    std::uint64_t seed = 0;
    // When set, rewards are resampled from this log instead of `arms`; arm
    // specs then only fix K (and the known variances, if used).
    std::shared_ptr<const ReplayLog> replay;

    std::size_t num_arms() const noexcept { return arms.size(); }
    std::int64_t effective_allocation_draws() const noexcept {
        return allocation_draws > 0 ? allocation_draws : alpha_draws;
    }
    void validate() const;
};

struct BatchRecord {
    int batch = 0;
    Allocation allocation;
    std::vector<BatchSummary> summaries;
    // Optimal probabilities after this batch's update; absent when they were
    // not needed (uniform rule before the last batch) or an arm was uninformed.
    std::optional<OptimalProbs> alpha;
};

struct RunTrajectory {
    std::uint64_t seed = 0;
    std::vector<BatchRecord> batches;
    OptimalProbs final_alpha;
    std::optional<std::size_t> winner;
    std::vector<std::int64_t> cumulative_counts;
    std::int64_t total_samples = 0;
};

// One experiment under Algorithm-1 style batching: uniform first batch, then
// for each later batch update the posteriors, estimate alpha with reshaping
// eta, form the TS / top-two / uniform target, apply the gamma floor and draw.
// After the last batch the winner is decided from the reshaped alpha.
// Streams: rewards use substream(run_seed, 0); alpha after batch b uses
// substream(run_seed, b).
RunTrajectory run_experiment(const ExperimentConfig& config, std::uint64_t run_seed);

// Seed of run r (1-based) in a campaign.
inline std::uint64_t run_seed(std::uint64_t master_seed, std::int64_t run_index) {
    return substream_seed(master_seed, static_cast<std::uint64_t>(run_index));
}

int default_worker_count();

// Runs fn(i) for i in [0, n) on `workers` threads. Each index is processed
// exactly once; the first exception is rethrown after all workers stop.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

// Runs `runs` seeded experiments and maps each trajectory through `reduce`
// in place, so full trajectories are never retained. Output order is the run
// order regardless of `workers`.
template <class F>
auto map_runs(const ExperimentConfig& config, std::int64_t runs, int workers, F&& reduce)
    -> std::vector<decltype(reduce(std::declval<const RunTrajectory&>()))> {
    using T = decltype(reduce(std::declval<const RunTrajectory&>()));
    config.validate();
    std::vector<std::optional<T>> slots(static_cast<std::size_t>(runs));
    parallel_for(runs, workers, [&](std::int64_t i) {
        const auto traj = run_experiment(config, run_seed(config.seed, i + 1));
        slots[static_cast<std::size_t>(i)].emplace(reduce(traj));
    });
    std::vector<T> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::vector<RunTrajectory> run_monte_carlo(const ExperimentConfig& config, std::int64_t runs,
                                           int workers = 1);

}  // namespace batchbandit
