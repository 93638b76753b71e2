#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace batchbandit {

// Sufficient statistics of one arm within one batch. Arms are 0-based inside
// the library; files and the CLI use 1-based arm numbers.
struct BatchSummary {
    int batch = 1;
    int arm = 0;
    std::int64_t count = 0;
    double mean = 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t batch_total = 0;
    double served_prob = 0.0;

    // Builds a summary from (count, sum, sum of squares); mean is sum/count,
    // or 0 for an empty cell.
    static BatchSummary from_sums(int batch, int arm, std::int64_t count, double sum,
                                  double sum_sq, std::int64_t batch_total,
                                  double served_prob);
};

// N(mu, 1/tau). tau == 0 is the improper flat prior: mu carries no meaning.
struct GaussianPosterior {
    double mu = 0.0;
    double tau = 0.0;

    bool informed() const noexcept { return tau > 0.0; }
};

enum class WeightScheme { phi_one, phi_sqrt_total };
enum class StatisticScheme { naive, weighted };
enum class VarianceMode { known, estimated };

struct WeightedEstimate {
    double estimate = 0.0;
    double tau = 0.0;
};

// Cumulative conjugate update with every batch treated as independent:
//   tau = tau0 + sum(n) / sigma^2
//   mu  = (mu0 tau0 + sum(n * mean) / sigma^2) / tau
// With no data and an improper prior the result is uninformed (tau == 0).
GaussianPosterior nb_update(const GaussianPosterior& prior,
                            std::span<const BatchSummary> history, double sigma_sq);

// Weighted-batch update. Batch i gets weight w_i = phi_i sqrt(n_i) / sum(phi sqrt(n));
// the data precision is (sum phi sqrt(n))^2 / (sigma^2 sum phi^2). Batches where
// the arm was not served are left out of both sums.
GaussianPosterior wb_update(const GaussianPosterior& prior,
                            std::span<const BatchSummary> history, double sigma_sq,
                            WeightScheme scheme);

double nb_point_estimate(std::span<const BatchSummary> history);

WeightedEstimate wb_point_estimate(std::span<const BatchSummary> history,
                                   WeightScheme scheme, double sigma_sq = 1.0);

inline constexpr double kDefaultVarianceFloor = 1e-12;

// sum(SS) / sum(n) - theta_hat^2, where theta_hat is the point estimate of
// the given statistic scheme. Floored at `floor`.
double estimate_sample_variance(std::span<const BatchSummary> history,
                                StatisticScheme statistic,
                                WeightScheme scheme = WeightScheme::phi_one,
                                double floor = kDefaultVarianceFloor);

// Scales the precision by eta; mu is untouched.
GaussianPosterior reshape_posterior(const GaussianPosterior& p, double eta);

// sqrt(tau) * (estimate - true_mean)
double studentized_z(double estimate, double tau, double true_mean);

struct PosteriorOptions {
    StatisticScheme statistic = StatisticScheme::weighted;
    WeightScheme weights = WeightScheme::phi_one;
    VarianceMode variance = VarianceMode::known;
    // Per-arm sigma^2 for known-variance mode. Empty means every arm uses
    // default_sigma_sq.
    std::vector<double> known_sigma_sq;
    // Used in estimated mode until an arm has at least two samples.
    double default_sigma_sq = 1.0;
    double variance_floor = kDefaultVarianceFloor;
    GaussianPosterior prior{};
};

// Posterior state of all K arms together with the batch history the weighted
// scheme needs. Each call to add_batch appends one batch (one summary per
// arm) and recomputes every posterior from its full history.
class PosteriorSet {
public:
    PosteriorSet(std::size_t arms, PosteriorOptions options);

    void add_batch(std::span<const BatchSummary> batch);

    std::size_t arms() const noexcept { return posteriors_.size(); }
    std::size_t batches() const noexcept { return batches_; }
    const PosteriorOptions& options() const noexcept { return options_; }

    std::span<const GaussianPosterior> posteriors() const noexcept { return posteriors_; }
    const GaussianPosterior& posterior(std::size_t arm) const { return posteriors_.at(arm); }
    std::span<const BatchSummary> history(std::size_t arm) const { return history_.at(arm); }
    double sigma_sq(std::size_t arm) const { return sigma_sq_.at(arm); }
    std::int64_t total_count(std::size_t arm) const;

    bool all_informed() const noexcept;

private:
    void recompute(std::size_t arm);

    PosteriorOptions options_;
    std::size_t batches_ = 0;
    std::vector<GaussianPosterior> posteriors_;
    std::vector<std::vector<BatchSummary>> history_;
    std::vector<double> sigma_sq_;
};

}  // namespace batchbandit
