#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "batchbandit/environment.hpp"
#include "batchbandit/random.hpp"

namespace batchbandit {

enum class Hypothesis { h0, h1 };

const char* to_string(Hypothesis h) noexcept;

struct ExperimentSpec {
    // Sorted descending; under H1 arm 0 is the unique best, under H0 arms
    // 0..k_prime-1 share the maximal mean.
    std::vector<double> means;
    int k_prime = 2;
    Hypothesis hypothesis = Hypothesis::h1;
    Trend trend = Trend::stationary;

    std::size_t best_arm() const noexcept { return 0; }
    std::vector<ArmSpec> arm_specs(double noise_sd = 1.0) const;
    void validate() const;
};

struct DatasetSpec {
    std::string name;
    std::vector<ExperimentSpec> experiments;
};

// Built-in synthetic datasets "A", "A'", "B", "B'" (the primed variants may
// also be spelled "A′" or "Aprime"). The primed variants share the unprimed
// means as initial values and follow the cosine trend.
DatasetSpec builtin_dataset(const std::string& name);
std::vector<std::string> builtin_dataset_names();

enum class SpreadKind { sd, variance };

struct GeneratorOptions {
    double spread = 0.5;
    SpreadKind spread_kind = SpreadKind::sd;
};

// K means drawn from N(0, spread) and sorted descending. For H0 the means of
// arms 2..k_prime are overwritten by the best mean; for H1 draws with a tied
// maximum are rejected.
ExperimentSpec generate_experiment(int k, int k_prime, Hypothesis hypothesis, Rng& rng,
                                   const GeneratorOptions& options = {});

nlohmann::json to_json(const DatasetSpec& dataset);
DatasetSpec dataset_from_json(const nlohmann::json& j);

}  // namespace batchbandit
