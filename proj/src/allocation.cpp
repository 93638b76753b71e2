#include "batchbandit/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "batchbandit/error.hpp"
#include "batchbandit/random.hpp"

namespace batchbandit {

namespace {

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) fail(ErrorKind::invalid_input, std::string("non-finite ") + what);
    }
}

void check_k_prime(int k_prime) {
    if (k_prime < 2) {
        fail(ErrorKind::invalid_config,
             "k_prime must be at least 2, got " + std::to_string(k_prime));
    }
}

}  // namespace

DecisionRule DecisionRule::from_fpr(double rho, int k_prime) {
    return {threshold_for_fpr(rho, k_prime), rho, k_prime};
}

DecisionRule DecisionRule::from_threshold(double delta, int k_prime) {
    return {delta, fpr_for_threshold(delta, k_prime), k_prime};
}

OptimalProbs estimate_optimal_probs(std::span<const GaussianPosterior> posteriors,
                                    double eta, std::int64_t draws, std::uint64_t seed) {
    const std::size_t k = posteriors.size();
    if (k == 0) fail(ErrorKind::invalid_input, "no arms");
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        fail(ErrorKind::invalid_input, "reshaping eta must be positive");
    }
    if (draws < kMinOptimalProbDraws) {
        fail(ErrorKind::invalid_config,
             "optimal-probability estimation needs at least " +
                 std::to_string(kMinOptimalProbDraws) + " draws");
    }

    std::vector<double> mu(k);
    std::vector<double> sd(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& p = posteriors[i];
        if (!std::isfinite(p.mu) || !std::isfinite(p.tau)) {
            fail(ErrorKind::invalid_input, "non-finite posterior for arm " + std::to_string(i + 1));
        }
        if (!p.informed()) {
            fail(ErrorKind::uninformed,
                 "arm " + std::to_string(i + 1) + " has no data; use uniform allocation");
        }
        const auto r = reshape_posterior(p, eta);
        mu[i] = r.mu;
        sd[i] = 1.0 / std::sqrt(r.tau);
    }

    double leader_floor = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        leader_floor = std::max(leader_floor, mu[i] - kPruneSigmas * sd[i]);
    }
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < k; ++i) {
        if (mu[i] + kPruneSigmas * sd[i] >= leader_floor) active.push_back(i);
    }

    OptimalProbs out;
    out.draws = draws;
    out.seed = seed;
    out.wins.assign(k, 0);
    out.alpha.assign(k, 0.0);

    if (active.size() == 1) {
        out.wins[active.front()] = draws;
    } else {
        Rng rng = make_rng(seed);
        boost::random::normal_distribution<double> normal;
        for (std::int64_t d = 0; d < draws; ++d) {
            std::size_t best = active.front();
            double best_value = -std::numeric_limits<double>::infinity();
            std::int64_t ties = 0;
            for (std::size_t i : active) {
                const double v = mu[i] + sd[i] * normal(rng);
                if (v > best_value) {
                    best_value = v;
                    best = i;
                    ties = 1;
                } else if (v == best_value) {
                    ++ties;
                    boost::random::uniform_int_distribution<std::int64_t> pick(0, ties - 1);
                    if (pick(rng) == 0) best = i;
                }
            }
            ++out.wins[best];
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        out.alpha[i] = static_cast<double>(out.wins[i]) / static_cast<double>(draws);
    }
    return out;
}

OptimalProbs estimate_optimal_probs(const PosteriorSet& posteriors, double eta,
                                    std::int64_t draws, std::uint64_t seed) {
    return estimate_optimal_probs(posteriors.posteriors(), eta, draws, seed);
}

std::vector<double> ts_target(const OptimalProbs& alpha) { return alpha.alpha; }

std::vector<double> ttts_target(std::span<const double> alpha, double beta) {
    check_finite(alpha, "alpha");
    if (!(beta > 0.0 && beta <= 1.0)) {
        fail(ErrorKind::invalid_config, "top-two beta must be in (0, 1]");
    }
    const std::size_t k = alpha.size();
    std::vector<double> out(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (alpha[i] >= 1.0) {
            out[i] = 1.0;
            return out;
        }
    }
    double odds_total = 0.0;
    for (double a : alpha) odds_total += a / (1.0 - a);
    for (std::size_t i = 0; i < k; ++i) {
        const double others = odds_total - alpha[i] / (1.0 - alpha[i]);
        out[i] = alpha[i] * (beta + (1.0 - beta) * others);
    }
    return out;
}

std::vector<double> ttts_target(const OptimalProbs& alpha, double beta) {
    return ttts_target(std::span<const double>(alpha.alpha), beta);
}

std::vector<double> uniform_target(std::size_t arms) {
    return std::vector<double>(arms, 1.0 / static_cast<double>(arms));
}

Allocation apply_floor(std::span<const double> target, double gamma) {
    check_finite(target, "traffic target");
    const double k = static_cast<double>(target.size());
    if (!(gamma >= 0.0) || !(gamma * k < 1.0)) {
        fail(ErrorKind::invalid_config, "traffic floor needs 0 <= gamma * K < 1");
    }
    Allocation out;
    out.gamma = gamma;
    out.e.reserve(target.size());
    for (double t : target) out.e.push_back(gamma + (1.0 - gamma * k) * t);
    return out;
}

std::optional<std::size_t> decide_winner(std::span<const double> alpha, double delta) {
    if (alpha.empty()) return std::nullopt;
    const auto it = std::max_element(alpha.begin(), alpha.end());
    if (*it > delta) return static_cast<std::size_t>(it - alpha.begin());
    return std::nullopt;
}

std::optional<std::size_t> decide_winner(const OptimalProbs& alpha, const DecisionRule& rule) {
    return decide_winner(std::span<const double>(alpha.alpha), rule.delta);
}

double threshold_for_fpr(double rho, int k_prime) {
    check_k_prime(k_prime);
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorKind::invalid_config, "rho must be in (0, 1)");
    return 1.0 - std::pow(rho / k_prime, 1.0 / (k_prime - 1));
}

double fpr_for_threshold(double delta, int k_prime) {
    check_k_prime(k_prime);
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::invalid_config, "delta must be in (0, 1)");
    return k_prime * std::pow(1.0 - delta, k_prime - 1);
}

}  // namespace batchbandit
