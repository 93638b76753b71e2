#include "batchbandit/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <boost/random/normal_distribution.hpp>
#include <nlohmann/json.hpp>

#include "batchbandit/error.hpp"

namespace batchbandit {

namespace {

using Means = std::vector<double>;

// Synthetic arm means, K = 10, five H1 experiments followed by five H0.
const std::vector<Means>& table_a() {
    static const std::vector<Means> rows = {
        {0.872, 0.812, 0.433, 0.16, -0.125, -0.264, -0.306, -0.381, -0.536, -1.151},
        {0.572, 0.451, 0.45, 0.291, 0.251, -0.061, -0.134, -0.342, -0.468, -0.55},
        {1.05, 0.846, 0.83, 0.371, 0.095, 0.025, -0.096, -0.318, -0.374, -0.444},
        {0.626, 0.566, 0.466, 0.443, 0.256, 0.244, 0.143, -0.038, -0.149, -0.377},
        {0.414, 0.381, 0.205, 0.115, 0.099, 0.093, 0.06, -0.1, -0.111, -0.153},
        {0.731, 0.731, 0.567, 0.021, -0.086, -0.161, -0.192, -0.439, -0.55, -1.03},
        {0.265, 0.265, 0.117, -0.006, -0.198, -0.336, -0.344, -0.346, -0.423, -0.559},
        {0.419, 0.419, 0.309, 0.293, 0.15, 0.06, -0.104, -0.175, -0.176, -0.571},
        {1.093, 1.093, 0.76, 0.438, 0.158, 0.08, -0.252, -0.698, -0.722, -1.011},
        {0.599, 0.599, 0.565, 0.212, 0.189, 0.093, 0.061, -0.188, -0.319, -0.335},
    };
    return rows;
}

const std::vector<Means>& table_b() {
    static const std::vector<Means> rows = {
        {0.82, 0.251, -0.028, -0.208, -0.421, -0.455, -0.529, -0.623, -0.897, -1.068},
        {0.128, 0.005, -0.078, -0.118, -0.169, -0.319, -0.374, -0.439, -0.494, -0.594},
        {0.866, 0.734, 0.386, 0.271, 0.251, 0.0, -0.157, -0.168, -0.422, -0.934},
        {0.639, 0.254, 0.217, 0.163, 0.108, -0.02, -0.066, -0.21, -0.317, -0.929},
        {0.792, 0.348, 0.033, -0.039, -0.046, -0.095, -0.191, -0.549, -1.017, -1.33},
        {1.146, 1.146, 1.146, 0.588, 0.276, 0.27, 0.021, -0.01, -0.298, -0.559},
        {1.116, 1.116, 1.116, 0.68, 0.185, 0.056, -0.077, -0.135, -0.711, -1.217},
        {0.5, 0.5, 0.5, 0.306, 0.044, 0.024, -0.037, -0.188, -0.191, -0.415},
        {0.421, 0.421, 0.421, 0.368, 0.262, 0.023, -0.327, -0.339, -0.72, -1.02},
        {0.684, 0.684, 0.684, 0.624, 0.609, 0.412, 0.175, -0.202, -0.231, -0.692},
    };
    return rows;
}

DatasetSpec make_dataset(std::string name, const std::vector<Means>& rows, int k_prime,
                         Trend trend) {
    DatasetSpec d;
    d.name = std::move(name);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ExperimentSpec e;
        e.means = rows[i];
        e.k_prime = k_prime;
        e.hypothesis = i < 5 ? Hypothesis::h1 : Hypothesis::h0;
        e.trend = trend;
        d.experiments.push_back(std::move(e));
    }
    return d;
}

std::string canonical_name(const std::string& name) {
    if (name == "A" || name == "a") return "A";
    if (name == "B" || name == "b") return "B";
    for (const char* base : {"A", "B"}) {
        for (const char* suffix : {"'", "\xE2\x80\xB2", "prime", "_prime", "p"}) {
            const std::string b = base;
            std::string lower = b;
            lower[0] = static_cast<char>(lower[0] - 'A' + 'a');
            if (name == b + suffix || name == lower + suffix) return b + "'";
        }
    }
    return {};
}

const char* trend_name(Trend t) { return t == Trend::stationary ? "stationary" : "cosine_decay"; }

}  // namespace

const char* to_string(Hypothesis h) noexcept { return h == Hypothesis::h0 ? "H0" : "H1"; }

std::vector<ArmSpec> ExperimentSpec::arm_specs(double noise_sd) const {
    std::vector<ArmSpec> arms;
    arms.reserve(means.size());
    for (double m : means) arms.push_back({m, noise_sd, trend});
    return arms;
}

void ExperimentSpec::validate() const {
    const int k = static_cast<int>(means.size());
    if (k < 2) fail(ErrorKind::invalid_config, "experiment needs at least two arms");
    if (!std::is_sorted(means.begin(), means.end(), std::greater<>())) {
        fail(ErrorKind::invalid_config, "experiment means must be sorted descending");
    }
    if (hypothesis == Hypothesis::h1) {
        if (!(means[0] > means[1])) fail(ErrorKind::invalid_config, "H1 needs a unique best arm");
    } else {
        if (k_prime < 2 || k_prime > k) fail(ErrorKind::invalid_config, "k_prime out of range");
        for (int i = 1; i < k_prime; ++i) {
            if (means[static_cast<std::size_t>(i)] != means[0]) {
                fail(ErrorKind::invalid_config, "H0 needs k_prime tied best arms");
            }
        }
        if (k_prime < k && !(means[static_cast<std::size_t>(k_prime)] < means[0])) {
            fail(ErrorKind::invalid_config, "H0 needs exactly k_prime tied best arms");
        }
    }
}

DatasetSpec builtin_dataset(const std::string& name) {
    const std::string c = canonical_name(name);
    if (c == "A") return make_dataset("A", table_a(), 2, Trend::stationary);
    if (c == "A'") return make_dataset("A'", table_a(), 2, Trend::cosine_decay);
    if (c == "B") return make_dataset("B", table_b(), 3, Trend::stationary);
    if (c == "B'") return make_dataset("B'", table_b(), 3, Trend::cosine_decay);
    fail(ErrorKind::invalid_config, "unknown dataset '" + name + "' (expected A, A', B or B')");
}

std::vector<std::string> builtin_dataset_names() { return {"A", "A'", "B", "B'"}; }

ExperimentSpec generate_experiment(int k, int k_prime, Hypothesis hypothesis, Rng& rng,
                                   const GeneratorOptions& options) {
    if (k < 2) fail(ErrorKind::invalid_config, "need at least two arms");
    if (k_prime < 2 || k_prime > k) {
        fail(ErrorKind::invalid_config, "k_prime must be in [2, K]");
    }
    if (!(options.spread > 0.0)) fail(ErrorKind::invalid_config, "spread must be positive");
    const double sd = options.spread_kind == SpreadKind::sd ? options.spread
                                                            : std::sqrt(options.spread);
    boost::random::normal_distribution<double> normal(0.0, sd);

    ExperimentSpec e;
    e.k_prime = k_prime;
    e.hypothesis = hypothesis;
    e.means.resize(static_cast<std::size_t>(k));
    for (;;) {
        for (auto& m : e.means) m = normal(rng);
        std::sort(e.means.begin(), e.means.end(), std::greater<>());
        // H0 also needs a strict gap below the tied group.
        const std::size_t below = hypothesis == Hypothesis::h1 ? 1 : static_cast<std::size_t>(k_prime);
        if (below >= e.means.size() || e.means[0] > e.means[below]) break;
    }
    if (hypothesis == Hypothesis::h0) {
        for (int i = 1; i < k_prime; ++i) e.means[static_cast<std::size_t>(i)] = e.means[0];
    }
    return e;
}

nlohmann::json to_json(const DatasetSpec& dataset) {
    nlohmann::json experiments = nlohmann::json::array();
    for (const auto& e : dataset.experiments) {
        experiments.push_back({{"means", e.means},
                               {"k_prime", e.k_prime},
                               {"hypothesis", to_string(e.hypothesis)},
                               {"trend", trend_name(e.trend)}});
    }
    return {{"name", dataset.name}, {"experiments", experiments}};
}

DatasetSpec dataset_from_json(const nlohmann::json& j) {
    try {
        DatasetSpec d;
        d.name = j.at("name").get<std::string>();
        for (const auto& je : j.at("experiments")) {
            ExperimentSpec e;
            e.means = je.at("means").get<std::vector<double>>();
            e.k_prime = je.value("k_prime", 2);
            const auto h = je.value("hypothesis", std::string("H1"));
            if (h == "H0" || h == "h0") {
                e.hypothesis = Hypothesis::h0;
            } else if (h == "H1" || h == "h1") {
                e.hypothesis = Hypothesis::h1;
            } else {
                fail(ErrorKind::invalid_config, "unknown hypothesis '" + h + "'");
            }
            const auto t = je.value("trend", std::string("stationary"));
            if (t == "stationary") {
                e.trend = Trend::stationary;
            } else if (t == "cosine_decay") {
                e.trend = Trend::cosine_decay;
            } else {
                fail(ErrorKind::invalid_config, "unknown trend '" + t + "'");
            }
            e.validate();
            d.experiments.push_back(std::move(e));
        }
        return d;
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::invalid_config, std::string("dataset JSON: ") + ex.what());
    }
}

}  // namespace batchbandit
