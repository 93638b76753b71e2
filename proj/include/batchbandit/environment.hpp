#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "batchbandit/allocation.hpp"
#include "batchbandit/posterior.hpp"
#include "batchbandit/random.hpp"

namespace batchbandit {

enum class Trend { stationary, cosine_decay };

struct ArmSpec {
    double base_mean = 0.0;
    double noise_sd = 1.0;
    Trend trend = Trend::stationary;
};

enum class BatchKind { fixed_size, poisson_duration };

struct BatchSchedule {
    BatchKind kind = BatchKind::fixed_size;
    std::int64_t lambda = 500;
    int num_batches = 20;
};

// True mean of an arm at batch b (1-based). The cosine trend is
//   base + 0.5 (cos(pi (b - 1) / 20) - 1)
// and is shared by all arms, so gaps between arms never change.
double mean_at_batch(const ArmSpec& spec, int batch);

struct Environment {
    std::vector<ArmSpec> arms;
    BatchSchedule schedule;

    void validate() const;
};

// Batch size for batch b: lambda, or a fresh Pois(lambda) draw (redrawn while 0).
std::int64_t draw_batch_total(const BatchSchedule& schedule, Rng& rng);

// Serves T_b samples by Cat(K, e) and draws N(mean_at_batch, sd^2) rewards.
// Only sufficient statistics are generated: counts come from a multinomial,
// the batch mean from N(theta, sd^2 / n) and the within-batch sum of squared
// deviations from sd^2 chi^2_{n-1}, which is the exact joint law of
// (n, mean, SS) for i.i.d. Gaussian rewards.
std::vector<BatchSummary> draw_batch(const Environment& env, const Allocation& allocation,
                                     int batch, Rng& rng);

// Multinomial split of `total` over `probs` by sequential binomials.
std::vector<std::int64_t> draw_assignment(std::int64_t total, std::span<const double> probs,
                                          Rng& rng);

// One (batch, arm) cell of a replay log: either a pool of raw rewards or a
// (count, mean, sd) summary resampled as Gaussian.
struct ReplayCell {
    std::vector<double> values;
    bool is_summary = false;
    std::int64_t count = 0;
    double mean = 0.0;
    double sd = 0.0;

    bool empty() const noexcept { return is_summary ? count == 0 : values.empty(); }
    double cell_mean() const;
    double cell_sd() const;
};

enum class ReplayFormat { raw, summary };

// Replay logs in CSV: header `batch,arm,value` (raw) or
// `batch,arm,count,mean,sd` (summary); batches and arms are 1-based.
class ReplayLog {
public:
    ReplayLog() = default;

    static ReplayLog read_csv(std::istream& in, const std::string& source = "<stream>");
    static ReplayLog read_csv_file(const std::string& path);
    void write_csv(std::ostream& out) const;

    ReplayFormat format() const noexcept { return format_; }
    void set_format(ReplayFormat format) noexcept { format_ = format; }

    void add_value(int batch, int arm, double value);
    void set_summary(int batch, int arm, std::int64_t count, double mean, double sd);

    // Arm is 0-based here. nullptr when absent.
    const ReplayCell* find(int batch, int arm) const;

    int num_batches() const noexcept { return num_batches_; }
    int num_arms() const noexcept { return num_arms_; }

    // Throws ErrorKind::replay_coverage naming the first missing (batch, arm).
    void check_coverage(int batch, int arms) const;

private:
    ReplayCell& cell(int batch, int arm);

    ReplayFormat format_ = ReplayFormat::raw;
    std::map<std::pair<int, int>, ReplayCell> cells_;
    int num_batches_ = 0;
    int num_arms_ = 0;
};

// Same assignment as draw_batch, but rewards are resampled with replacement
// from the log's (batch, arm) pool, or drawn N(mean, sd^2) for summary cells.
std::vector<BatchSummary> replay_batch(const ReplayLog& log, const Allocation& allocation,
                                       int batch, const BatchSchedule& schedule, Rng& rng);

// Realized sum_b sum_{i <= T_b} phi_b^2 / T_b over num_batches batches drawn from
// the schedule, divided by its expectation (B for phi = 1, B lambda for
// phi = sqrt(T)).
double check_variance_convergence(const BatchSchedule& schedule, WeightScheme scheme,
                                  int num_batches, Rng& rng);

}  // namespace batchbandit
