#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "batchbandit/posterior.hpp"

namespace batchbandit {

// Posterior probability of each arm being the best, estimated from `draws`
// joint posterior draws. alpha[i] = argmax-count[i] / draws.
struct OptimalProbs {
    std::vector<double> alpha;
    std::vector<std::int64_t> wins;
    std::int64_t draws = 0;
    std::uint64_t seed = 0;

    std::size_t arms() const noexcept { return alpha.size(); }
};

struct Allocation {
    std::vector<double> e;
    double gamma = 0.0;
};

struct DecisionRule {
    double delta = 0.95;
    double rho = 0.10;
    int k_prime = 2;

    // delta derived from (rho, k_prime) so that the type-I error under a flat
    // Dirichlet is rho.
    static DecisionRule from_fpr(double rho, int k_prime);
    // Explicit delta; rho is back-computed for reporting.
    static DecisionRule from_threshold(double delta, int k_prime);
};

inline constexpr std::int64_t kMinOptimalProbDraws = 1000;

// Arms whose posterior sits more than this many standard deviations away from
// the current leader's lower tail are never drawn; their alpha is 0. The
// chance of such an arm winning a single draw is below 1e-15.
inline constexpr double kPruneSigmas = 8.0;

// Monte Carlo estimate of the optimal-arm probabilities under the posteriors
// reshaped by eta. Throws ErrorKind::uninformed if any arm has tau == 0; the
// caller should fall back to uniform traffic. The draw stream is seeded from
// `seed` alone, so the result is a pure function of its arguments.
OptimalProbs estimate_optimal_probs(std::span<const GaussianPosterior> posteriors,
                                    double eta, std::int64_t draws, std::uint64_t seed);

OptimalProbs estimate_optimal_probs(const PosteriorSet& posteriors, double eta,
                                    std::int64_t draws, std::uint64_t seed);

std::vector<double> ts_target(const OptimalProbs& alpha);

// Top-two allocation:
//   e_k = alpha_k (beta + (1 - beta) sum_{i != k} alpha_i / (1 - alpha_i))
// If some alpha_i == 1 the unit vector on arm i is returned.
std::vector<double> ttts_target(std::span<const double> alpha, double beta);
std::vector<double> ttts_target(const OptimalProbs& alpha, double beta);

std::vector<double> uniform_target(std::size_t arms);

// e = gamma + (1 - gamma K) target
Allocation apply_floor(std::span<const double> target, double gamma);

// Largest alpha wins iff it strictly exceeds delta; ties go to the lowest index.
std::optional<std::size_t> decide_winner(std::span<const double> alpha, double delta);
std::optional<std::size_t> decide_winner(const OptimalProbs& alpha, const DecisionRule& rule);

// delta = 1 - (rho / K')^(1 / (K' - 1))
double threshold_for_fpr(double rho, int k_prime);
// rho = K' (1 - delta)^(K' - 1)
double fpr_for_threshold(double delta, int k_prime);

}  // namespace batchbandit
