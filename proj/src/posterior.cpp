#include "batchbandit/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "batchbandit/error.hpp"

namespace batchbandit {

namespace {

void check_history(std::span<const BatchSummary> history) {
    for (const auto& s : history) {
        if (s.count < 0) {
            fail(ErrorKind::invalid_input,
                 "negative count in batch " + std::to_string(s.batch));
        }
        if (!std::isfinite(s.mean) || !std::isfinite(s.sum_sq) || !std::isfinite(s.sum)) {
            fail(ErrorKind::invalid_input,
                 "non-finite statistic in batch " + std::to_string(s.batch));
        }
    }
}

void check_sigma_sq(double sigma_sq) {
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
        fail(ErrorKind::invalid_input, "sigma^2 must be positive and finite");
    }
}

void check_prior(const GaussianPosterior& prior) {
    if (!std::isfinite(prior.mu) || !std::isfinite(prior.tau) || prior.tau < 0.0) {
        fail(ErrorKind::invalid_input, "prior must have finite mu and tau >= 0");
    }
}

double phi(const BatchSummary& s, WeightScheme scheme) {
    if (scheme == WeightScheme::phi_one) return 1.0;
    return std::sqrt(static_cast<double>(s.batch_total));
}

struct WeightedSums {
    double phi_sqrt_n = 0.0;
    double phi_sq = 0.0;
    double weighted_mean_numerator = 0.0;
};

WeightedSums weighted_sums(std::span<const BatchSummary> history, WeightScheme scheme) {
    WeightedSums sums;
    for (const auto& s : history) {
        if (s.count == 0) continue;
        const double f = phi(s, scheme);
        const double g = f * std::sqrt(static_cast<double>(s.count));
        sums.phi_sqrt_n += g;
        sums.phi_sq += f * f;
        sums.weighted_mean_numerator += g * s.mean;
    }
    return sums;
}

GaussianPosterior combine(const GaussianPosterior& prior, double estimate, double data_tau) {
    const double tau = prior.tau + data_tau;
    if (!(tau > 0.0)) return prior;
    return {(prior.mu * prior.tau + data_tau * estimate) / tau, tau};
}

}  // namespace

BatchSummary BatchSummary::from_sums(int batch, int arm, std::int64_t count, double sum,
                                     double sum_sq, std::int64_t batch_total,
                                     double served_prob) {
    BatchSummary s;
    s.batch = batch;
    s.arm = arm;
    s.count = count;
    s.sum = sum;
    s.sum_sq = sum_sq;
    s.mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    s.batch_total = batch_total;
    s.served_prob = served_prob;
    return s;
}

GaussianPosterior nb_update(const GaussianPosterior& prior,
                            std::span<const BatchSummary> history, double sigma_sq) {
    check_prior(prior);
    check_sigma_sq(sigma_sq);
    check_history(history);

    double n_total = 0.0;
    double weighted = 0.0;
    for (const auto& s : history) {
        n_total += static_cast<double>(s.count);
        weighted += static_cast<double>(s.count) * s.mean;
    }
    const double tau = prior.tau + n_total / sigma_sq;
    if (!(tau > 0.0)) return prior;
    return {(prior.mu * prior.tau + weighted / sigma_sq) / tau, tau};
}

GaussianPosterior wb_update(const GaussianPosterior& prior,
                            std::span<const BatchSummary> history, double sigma_sq,
                            WeightScheme scheme) {
    check_prior(prior);
    check_sigma_sq(sigma_sq);
    check_history(history);

    const WeightedSums sums = weighted_sums(history, scheme);
    if (sums.phi_sqrt_n == 0.0) return prior;
    const double estimate = sums.weighted_mean_numerator / sums.phi_sqrt_n;
    const double data_tau = sums.phi_sqrt_n * sums.phi_sqrt_n / (sigma_sq * sums.phi_sq);
    return combine(prior, estimate, data_tau);
}

double nb_point_estimate(std::span<const BatchSummary> history) {
    check_history(history);
    std::int64_t n = 0;
    double weighted = 0.0;
    for (const auto& s : history) {
        n += s.count;
        weighted += static_cast<double>(s.count) * s.mean;
    }
    if (n == 0) fail(ErrorKind::uninformed, "no samples for this arm");
    return weighted / static_cast<double>(n);
}

WeightedEstimate wb_point_estimate(std::span<const BatchSummary> history,
                                   WeightScheme scheme, double sigma_sq) {
    check_history(history);
    check_sigma_sq(sigma_sq);
    const WeightedSums sums = weighted_sums(history, scheme);
    if (sums.phi_sqrt_n == 0.0) fail(ErrorKind::uninformed, "no samples for this arm");
    return {sums.weighted_mean_numerator / sums.phi_sqrt_n,
            sums.phi_sqrt_n * sums.phi_sqrt_n / (sigma_sq * sums.phi_sq)};
}

double estimate_sample_variance(std::span<const BatchSummary> history,
                                StatisticScheme statistic, WeightScheme scheme,
                                double floor) {
    check_history(history);
    std::int64_t n = 0;
    double ss = 0.0;
    for (const auto& s : history) {
        n += s.count;
        ss += s.sum_sq;
    }
    if (n < 2) {
        fail(ErrorKind::insufficient_data,
             "variance estimate needs at least 2 samples, got " + std::to_string(n));
    }
    const double theta = statistic == StatisticScheme::naive
                             ? nb_point_estimate(history)
                             : wb_point_estimate(history, scheme).estimate;
    const double v = ss / static_cast<double>(n) - theta * theta;
    return std::max(v, floor);
}

GaussianPosterior reshape_posterior(const GaussianPosterior& p, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        fail(ErrorKind::invalid_input, "reshaping eta must be positive");
    }
    return {p.mu, p.tau * eta};
}

double studentized_z(double estimate, double tau, double true_mean) {
    if (!std::isfinite(estimate) || !std::isfinite(tau) || !std::isfinite(true_mean)) {
        fail(ErrorKind::invalid_input, "non-finite input to studentized_z");
    }
    if (!(tau > 0.0)) fail(ErrorKind::invalid_input, "studentized_z needs tau > 0");
    return std::sqrt(tau) * (estimate - true_mean);
}

PosteriorSet::PosteriorSet(std::size_t arms, PosteriorOptions options)
    : options_(std::move(options)),
      posteriors_(arms, options_.prior),
      history_(arms),
      sigma_sq_(arms, options_.default_sigma_sq) {
    if (arms == 0) fail(ErrorKind::invalid_config, "posterior set needs at least one arm");
    if (!options_.known_sigma_sq.empty()) {
        if (options_.known_sigma_sq.size() != arms) {
            fail(ErrorKind::invalid_config, "known_sigma_sq must have one entry per arm");
        }
        for (double v : options_.known_sigma_sq) check_sigma_sq(v);
        if (options_.variance == VarianceMode::known) sigma_sq_ = options_.known_sigma_sq;
    }
    check_sigma_sq(options_.default_sigma_sq);
    check_prior(options_.prior);
}

void PosteriorSet::add_batch(std::span<const BatchSummary> batch) {
    if (batch.size() != arms()) {
        fail(ErrorKind::invalid_input, "batch must hold one summary per arm");
    }
    check_history(batch);
    for (std::size_t k = 0; k < arms(); ++k) {
        history_[k].push_back(batch[k]);
        recompute(k);
    }
    ++batches_;
}

std::int64_t PosteriorSet::total_count(std::size_t arm) const {
    std::int64_t n = 0;
    for (const auto& s : history_.at(arm)) n += s.count;
    return n;
}

bool PosteriorSet::all_informed() const noexcept {
    return std::all_of(posteriors_.begin(), posteriors_.end(),
                       [](const GaussianPosterior& p) { return p.informed(); });
}

void PosteriorSet::recompute(std::size_t arm) {
    const auto& h = history_[arm];
    if (options_.variance == VarianceMode::estimated) {
        sigma_sq_[arm] = total_count(arm) >= 2
                             ? estimate_sample_variance(h, options_.statistic,
                                                        options_.weights,
                                                        options_.variance_floor)
                             : options_.default_sigma_sq;
    }
    posteriors_[arm] = options_.statistic == StatisticScheme::naive
                           ? nb_update(options_.prior, h, sigma_sq_[arm])
                           : wb_update(options_.prior, h, sigma_sq_[arm], options_.weights);
}

}  // namespace batchbandit
