// Acceptance checks. Each criterion prints detail lines followed by one
// "PASS name" or "FAIL name" line. With no arguments every criterion runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <nlohmann/json.hpp>

#include "batchbandit/datasets.hpp"
#include "batchbandit/engine.hpp"
#include "batchbandit/error.hpp"
#include "batchbandit/evaluation.hpp"
#include "cli.hpp"

using namespace batchbandit;

namespace {

constexpr std::uint64_t kMasterSeed = 20240601;
constexpr std::int64_t kAllocationDraws = 2000;
constexpr std::int64_t kDecisionDraws = 10000;

int workers() { return default_worker_count(); }

__attribute__((format(printf, 1, 2))) void detail(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    std::printf("    ");
    std::vprintf(fmt, args);
    std::printf("\n");
    std::fflush(stdout);
    va_end(args);
}

double pp(double x) { return 100.0 * x; }

ExperimentConfig protocol_config(const ExperimentSpec& exp, SamplingRule rule, double eta,
                                 const DecisionRule& decision, std::uint64_t seed) {
    ExperimentConfig c;
    c.arms = exp.arm_specs();
    c.schedule = {BatchKind::fixed_size, 500, 20};
    c.rule = rule;
    c.eta = eta;
    c.decision = decision;
    c.alpha_draws = kDecisionDraws;
    c.allocation_draws = kAllocationDraws;
    c.seed = seed;
    return c;
}

// Records for every experiment of `dataset` with the given hypothesis, cached
// so criteria sharing a campaign run it once.
const std::vector<DecisionRecord>& campaign(const std::string& dataset, SamplingRule rule,
                                            double eta, Hypothesis hypothesis,
                                            std::int64_t runs_per_experiment) {
    static std::map<std::string, std::vector<DecisionRecord>> cache;
    std::ostringstream key;
    key << dataset << '|' << to_string(rule) << '|' << eta << '|' << to_string(hypothesis) << '|'
        << runs_per_experiment;
    if (auto it = cache.find(key.str()); it != cache.end()) return it->second;

    const auto d = builtin_dataset(dataset);
    const int k_prime = dataset.front() == 'B' ? 3 : 2;
    const auto decision = DecisionRule::from_fpr(0.10, k_prime);
    std::vector<DecisionRecord> all;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < d.experiments.size(); ++i) {
        const auto& exp = d.experiments[i];
        if (exp.hypothesis != hypothesis) continue;
        const int index = static_cast<int>(i) + 1;
        const auto c = protocol_config(exp, rule, eta, decision,
                                       substream_seed(kMasterSeed, static_cast<std::uint64_t>(index)));
        auto rs = run_campaign(c, runs_per_experiment, workers(), index, exp.hypothesis, exp.best_arm());
        all.insert(all.end(), rs.begin(), rs.end());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail("[campaign %s %s eta=%.2f %s: %zu runs, %.0fs]", dataset.c_str(), to_string(rule), eta,
           to_string(hypothesis), all.size(), secs);
    return cache.emplace(key.str(), std::move(all)).first->second;
}

const std::vector<SamplingRule> kRules = {SamplingRule::uniform, SamplingRule::nb_ts,
                                          SamplingRule::wb_ts, SamplingRule::nb_ttts,
                                          SamplingRule::wb_ttts};

// ---------------------------------------------------------------------------

bool formula_suite() {
    int checks = 0;
    int failures = 0;
    auto near = [&](const char* what, double got, double want, double tol) {
        ++checks;
        if (!(std::abs(got - want) <= tol)) {
            ++failures;
            detail("mismatch %s: got %.12g want %.12g", what, got, want);
        }
    };
    auto batch = [](int b, std::int64_t n, double mean) {
        return BatchSummary::from_sums(b, 0, n, mean * static_cast<double>(n), 0.0, n, 1.0);
    };
    constexpr double tol = 1e-9;

    {
        std::vector<BatchSummary> h = {batch(1, 100, 0.5)};
        auto p = nb_update({}, h, 1.0);
        near("nb single mu", p.mu, 0.5, tol);
        near("nb single tau", p.tau, 100, tol);
        p = wb_update({}, h, 1.0, WeightScheme::phi_one);
        near("wb single mu", p.mu, 0.5, tol);
        near("wb single tau", p.tau, 100, tol);
        h = {batch(1, 100, 0.2), batch(2, 400, 0.6)};
        p = nb_update({}, h, 1.0);
        near("nb two mu", p.mu, 0.52, tol);
        near("nb two tau", p.tau, 500, tol);
        p = wb_update({}, h, 1.0, WeightScheme::phi_one);
        near("wb two mu", p.mu, 0.46666666666666667, tol);
        near("wb two tau", p.tau, 450, tol);
        near("nb estimate", nb_point_estimate(h), 0.52, tol);
        near("wb estimate", wb_point_estimate(h, WeightScheme::phi_one).estimate, 0.46666666666666667, tol);
        h = {batch(1, 100, 0.4), batch(2, 100, 0.6)};
        p = nb_update({}, h, 2.0);
        near("nb sigma2 mu", p.mu, 0.5, tol);
        near("nb sigma2 tau", p.tau, 100, tol);
        near("symmetric nb", nb_point_estimate(h), 0.5, tol);
        near("symmetric wb", wb_point_estimate(h, WeightScheme::phi_one).estimate, 0.5, tol);
        std::vector<BatchSummary> eq = {batch(1, 50, 0.3), batch(2, 50, 0.9)};
        for (auto& s : eq) s.batch_total = 300;
        const auto a = wb_update({}, eq, 1.0, WeightScheme::phi_one);
        const auto b = wb_update({}, eq, 1.0, WeightScheme::phi_sqrt_total);
        near("phi cancels mu", a.mu, b.mu, tol);
        near("phi cancels tau", a.tau, b.tau, tol);
    }
    {
        const std::vector<BatchSummary> h = {BatchSummary::from_sums(1, 0, 4, 2.0, 2.0, 4, 1.0)};
        near("bernoulli variance", estimate_sample_variance(h, StatisticScheme::naive), 0.25, tol);
        const std::vector<BatchSummary> c = {BatchSummary::from_sums(1, 0, 5, 10.0, 20.0, 5, 1.0)};
        near("constant variance floor", estimate_sample_variance(c, StatisticScheme::naive),
             kDefaultVarianceFloor, 0.0);
    }
    {
        near("reshape identity", reshape_posterior({0.2, 100}, 1.0).tau, 100, tol);
        near("reshape 0.7", reshape_posterior({0.2, 100}, 0.7).tau, 70, tol);
        near("reshape mu", reshape_posterior({0.2, 100}, 0.7).mu, 0.2, 0.0);
        near("reshape 4", 1.0 / reshape_posterior({0.0, 25}, 4.0).tau, 0.01, tol);
        near("z zero", studentized_z(0.3, 50, 0.3), 0.0, 0.0);
        near("z plus", studentized_z(0.6, 100, 0.5), 1.0, tol);
        near("z minus", studentized_z(0.45, 400, 0.5), -1.0, tol);
    }
    {
        const std::vector<GaussianPosterior> same = {{0, 1}, {0, 1}};
        const auto a = estimate_optimal_probs(same, 1.0, 40000, 1);
        near("alpha symmetric", a.alpha[0], 0.5, 3.0 * std::sqrt(0.25 / 40000));
        const std::vector<GaussianPosterior> gap = {{0, 1}, {0.5, 1}};
        const auto g = estimate_optimal_probs(gap, 1.0, 200000, 2);
        const double want = 0.5 * std::erfc(-(0.5 / std::sqrt(2.0)) / std::sqrt(2.0));
        near("alpha gaussian comparison", g.alpha[1], want, 4.0 * std::sqrt(want * (1 - want) / 200000));
        const std::vector<GaussianPosterior> dom = {{10, 1}, {0, 1}, {0, 1}};
        near("alpha dominant", estimate_optimal_probs(dom, 1.0, 10000, 3).alpha[0], 1.0, 0.0);
    }
    {
        auto e = ttts_target(std::vector<double>{0.8, 0.2}, 0.5);
        near("ttts 0.8", e[0], 0.5, tol);
        near("ttts 0.2", e[1], 0.5, tol);
        e = ttts_target(std::vector<double>{0.6, 0.3, 0.1}, 0.5);
        near("ttts 3a", e[0], 0.4619047619047619, tol);
        near("ttts 3b", e[1], 0.3916666666666667, tol);
        near("ttts 3c", e[2], 0.1464285714285714, tol);
        e = ttts_target(std::vector<double>{0.7, 0.2, 0.1}, 1.0);
        near("ttts beta one", e[1], 0.2, tol);
        e = ttts_target(std::vector<double>{0.5, 0.5}, 0.5);
        near("ttts symmetric", e[0], 0.5, tol);

        Rng rng = make_rng(4242);
        boost::random::gamma_distribution<double> gamma(0.5);
        double worst = 0.0;
        for (int t = 0; t < 10000; ++t) {
            std::vector<double> alpha(2 + static_cast<std::size_t>(t % 9));
            for (auto& a : alpha) a = gamma(rng) + 1e-12;
            const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
            for (auto& a : alpha) a /= s;
            const auto x = ttts_target(alpha, 0.5);
            worst = std::max(worst, std::abs(std::accumulate(x.begin(), x.end(), 0.0) - 1.0));
        }
        near("ttts simplex fuzz", worst, 0.0, tol);
    }
    {
        auto a = apply_floor(std::vector<double>{0.5, 0.3, 0.2}, 0.01);
        near("floor a", a.e[0], 0.495, tol);
        near("floor b", a.e[1], 0.301, tol);
        near("floor c", a.e[2], 0.204, tol);
        a = apply_floor(std::vector<double>{1.0, 0.0}, 0.01);
        near("floor extreme", a.e[1], 0.01, tol);
        a = apply_floor(std::vector<double>(10, 0.1), 0.01);
        near("floor fixed point", a.e[7], 0.1, tol);
    }
    {
        ++checks;
        if (decide_winner(std::vector<double>{0.96, 0.03, 0.01}, 0.95) != std::optional<std::size_t>(0)) ++failures;
        ++checks;
        if (decide_winner(std::vector<double>{0.90, 0.07, 0.03}, 0.95)) ++failures;
        ++checks;
        if (decide_winner(std::vector<double>{0.95, 0.05}, 0.95)) ++failures;
    }
    {
        near("delta K'=2", threshold_for_fpr(0.1, 2), 0.95, tol);
        near("delta K'=3", threshold_for_fpr(0.1, 3), 1.0 - std::sqrt(1.0 / 30.0), tol);
        near("rho 0.9", fpr_for_threshold(0.9, 3), 0.03, tol);
        near("rho 0.95", fpr_for_threshold(0.95, 2), 0.1, tol);
        for (int k = 2; k <= 8; ++k) {
            for (double rho : {0.01, 0.05, 0.1, 0.25}) {
                near("roundtrip", fpr_for_threshold(threshold_for_fpr(rho, k), k), rho, tol);
            }
        }
    }
    {
        const ArmSpec a{0.0, 1.0, Trend::cosine_decay};
        near("trend b=1", mean_at_batch(a, 1), 0.0, tol);
        near("trend b=11", mean_at_batch(a, 11), -0.5, tol);
        near("trend b=20", mean_at_batch(a, 20), -0.9938441702975689, tol);
    }
    {
        for (const auto& name : builtin_dataset_names()) {
            const auto d = builtin_dataset(name);
            const auto back = dataset_from_json(nlohmann::json::parse(to_json(d).dump()));
            ++checks;
            bool ok = back.experiments.size() == d.experiments.size();
            for (std::size_t i = 0; ok && i < d.experiments.size(); ++i) {
                ok = back.experiments[i].means == d.experiments[i].means &&
                     back.experiments[i].hypothesis == d.experiments[i].hypothesis;
            }
            if (!ok) {
                ++failures;
                detail("dataset %s does not round-trip", name.c_str());
            }
        }
        const auto a = builtin_dataset("A");
        near("table A row 1", a.experiments[0].means[0], 0.872, 0.0);
        near("table B H0 lead", builtin_dataset("B").experiments[5].means[2], 1.146, 0.0);
    }
    detail("%d checks, %d failures", checks, failures);
    return failures == 0;
}

bool fpr_table_b() {
    struct Row {
        double eta;
        std::vector<double> expected;
    };
    const std::vector<Row> rows = {{1.0, {0.169, 0.179, 0.097, 0.181, 0.142}},
                                   {0.7, {0.088, 0.075, 0.035, 0.089, 0.066}}};
    const double delta = threshold_for_fpr(0.10, 3);
    bool ok = true;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < kRules.size(); ++i) {
            const auto& rs = campaign("B", kRules[i], row.eta, Hypothesis::h0, 10000);
            const auto f = compute_fpr(rs, delta);
            const bool cell = std::abs(f.value - row.expected[i]) <= 0.03;
            ok = ok && cell;
            detail("eta=%.1f %-8s FPR %5.2f%% (paper %4.1f%%, CI %.2f-%.2f) %s", row.eta,
                   to_string(kRules[i]), pp(f.value), pp(row.expected[i]), pp(f.ci_lo), pp(f.ci_hi),
                   cell ? "ok" : "OUT OF TOLERANCE");
        }
    }
    return ok;
}

bool nb_ts_corner_a() {
    const auto nb = compute_fpr(campaign("A", SamplingRule::nb_ts, 1.0, Hypothesis::h0, 10000), 0.95);
    const auto wb = compute_fpr(campaign("A", SamplingRule::wb_ts, 1.0, Hypothesis::h0, 10000), 0.95);
    detail("NB-TS FPR %.2f%% (paper 14.3%%), WB-TS FPR %.2f%% (paper 7.4%%), gap %.2f pp",
           pp(nb.value), pp(wb.value), pp(nb.value - wb.value));
    return nb.value - wb.value >= 0.04;
}

bool neutral_eta_fpr() {
    const std::vector<std::pair<int, double>> cells = {{2, 1.0}, {3, 0.7}, {4, 0.57}, {5, 0.5}};
    bool ok = true;
    for (const auto& [k, eta] : cells) {
        CalibrationOptions opts;
        opts.runs = 10000;
        opts.samples_per_arm = 10000;
        opts.alpha_draws = kDecisionDraws;
        opts.seed = kMasterSeed;
        opts.workers = workers();
        const std::vector<double> grid = {eta};
        const auto r = calibrate_neutral_eta(k, grid, opts);
        const double fpr = r.curve.front().fpr;
        const bool cell = std::abs(fpr - 0.10) <= 0.025;
        ok = ok && cell;
        detail("K=K'=%d eta=%.2f FPR %.2f%% %s", k, eta, pp(fpr), cell ? "ok" : "OUT OF TOLERANCE");
    }
    return ok;
}

bool flat_dirichlet_moments() {
    CalibrationOptions opts;
    opts.runs = 10000;
    opts.samples_per_arm = 10000;
    opts.alpha_draws = kDecisionDraws;
    opts.seed = kMasterSeed;
    opts.workers = workers();
    const std::vector<double> grid = {0.7};
    const auto r = calibrate_neutral_eta(3, grid, opts);
    const auto& p = r.curve.front();
    detail("alpha_1 mean %.4f (target %.4f), variance %.4f (target %.4f)", p.alpha1_mean,
           r.target_mean, p.alpha1_variance, r.target_variance);
    return p.alpha1_mean >= 0.313 && p.alpha1_mean <= 0.353 && p.alpha1_variance >= 0.045 &&
           p.alpha1_variance <= 0.066;
}

bool bias_demo_criterion() {
    bool ok = true;
    for (auto rule : {SamplingRule::nb_ts, SamplingRule::wb_ts, SamplingRule::nb_ttts,
                      SamplingRule::wb_ttts}) {
        BiasDemoOptions opts;
        opts.runs = 100000;
        opts.alpha_draws = kAllocationDraws;
        opts.seed = kMasterSeed;
        opts.workers = workers();
        const auto r = bias_demo(rule, opts);
        const bool wb_ok = std::abs(r.weighted.mean) <= 0.02;
        ok = ok && wb_ok;
        detail("%-8s WB z mean %+.4f [%+.4f, %+.4f]  NB z mean %+.4f [%+.4f, %+.4f] %s",
               to_string(rule), r.weighted.mean, r.weighted.ci99_lo, r.weighted.ci99_hi,
               r.naive.mean, r.naive.ci99_lo, r.naive.ci99_hi, wb_ok ? "" : "WB OUT OF TOLERANCE");
        if (rule == SamplingRule::nb_ts) {
            const bool nb_ok = r.naive.mean < -0.01 && r.naive.ci99_hi < 0.0;
            ok = ok && nb_ok;
            if (!nb_ok) detail("NB-TS naive statistic not biased downward as required");
        }
    }
    return ok;
}

bool regret_table_a() {
    struct Cell {
        SamplingRule rule;
        double a, a_band, ap, ap_band;
    };
    const std::vector<Cell> cells = {{SamplingRule::nb_ts, 0.259, 0.08, 0.367, 0.17},
                                     {SamplingRule::wb_ts, 0.281, 0.08, 0.344, 0.17},
                                     {SamplingRule::nb_ttts, 0.475, 0.08, 0.539, 0.04},
                                     {SamplingRule::wb_ttts, 0.499, 0.05, 0.542, 0.04}};
    bool ok = true;
    std::map<SamplingRule, double> on_a;
    for (const auto& c : cells) {
        const auto ra = mean_regret(campaign("A", c.rule, 1.0, Hypothesis::h1, 2000));
        const auto rp = mean_regret(campaign("A'", c.rule, 1.0, Hypothesis::h1, 2000));
        on_a[c.rule] = ra.mean;
        const bool in_a = std::abs(ra.mean - c.a) <= c.a_band;
        const bool in_ap = std::abs(rp.mean - c.ap) <= c.ap_band;
        ok = ok && in_a && in_ap;
        detail("%-8s A %5.2f%% (paper %4.1f +- %2.0f) %s   A' %5.2f%% (paper %4.1f +- %2.0f) %s",
               to_string(c.rule), pp(ra.mean), pp(c.a), pp(c.a_band), in_a ? "ok" : "OUT",
               pp(rp.mean), pp(c.ap), pp(c.ap_band), in_ap ? "ok" : "OUT");
    }
    const auto u = mean_regret(campaign("A", SamplingRule::uniform, 1.0, Hypothesis::h1, 2000));
    const double se = u.sd / std::sqrt(static_cast<double>(u.n));
    const bool uniform_ok = std::abs(u.mean - 0.9) <= std::max(3.0 * se, 1e-9);
    const double ts_max = std::max(on_a[SamplingRule::nb_ts], on_a[SamplingRule::wb_ts]);
    const double ttts_min = std::min(on_a[SamplingRule::nb_ttts], on_a[SamplingRule::wb_ttts]);
    const double ttts_max = std::max(on_a[SamplingRule::nb_ttts], on_a[SamplingRule::wb_ttts]);
    const bool order = ts_max < ttts_min && ttts_max < u.mean;
    detail("uniform A %.3f%% (expected 90%%) %s; ordering TS < TTTS < uniform %s", pp(u.mean),
           uniform_ok ? "ok" : "OUT", order ? "holds" : "VIOLATED");
    return ok && uniform_ok && order;
}

bool recall_ordering() {
    std::map<SamplingRule, double> power;
    for (auto rule : kRules) {
        const auto p = compute_power(campaign("A", rule, 1.0, Hypothesis::h1, 2000), 0.95);
        power[rule] = p.value;
        detail("%-8s power %.2f%% [%.2f, %.2f]", to_string(rule), pp(p.value), pp(p.ci_lo), pp(p.ci_hi));
    }
    const double a = power[SamplingRule::wb_ttts];
    const double b = power[SamplingRule::nb_ttts];
    const double others = std::max({power[SamplingRule::nb_ts], power[SamplingRule::wb_ts],
                                    power[SamplingRule::uniform]});
    detail("TTTS gap %.2f pp, best non-TTTS %.2f%%", pp(std::abs(a - b)), pp(others));
    return std::abs(a - b) <= 0.03 && a > others && b > others;
}

bool replay_round_trip() {
    const auto dataset = builtin_dataset("A");
    const int batches = 20;
    const int pool = 1000;
    const std::int64_t runs = 1000;
    const auto rule = SamplingRule::wb_ttts;
    const auto decision = DecisionRule::from_fpr(0.10, 2);
    std::vector<DecisionRecord> direct;
    std::vector<DecisionRecord> replayed;
    for (std::size_t i = 0; i < dataset.experiments.size(); ++i) {
        const auto& exp = dataset.experiments[i];
        const int index = static_cast<int>(i) + 1;
        const auto arms = exp.arm_specs();

        // Raw pools standardized to the arm's exact mean and unit sd.
        ReplayLog log;
        Rng rng = make_rng(substream_seed(kMasterSeed + 7, static_cast<std::uint64_t>(index)));
        boost::random::normal_distribution<double> normal;
        for (int b = 1; b <= batches; ++b) {
            for (std::size_t k = 0; k < arms.size(); ++k) {
                std::vector<double> v(pool);
                for (auto& x : v) x = normal(rng);
                const double m = std::accumulate(v.begin(), v.end(), 0.0) / pool;
                double ss = 0.0;
                for (double x : v) ss += (x - m) * (x - m);
                const double sd = std::sqrt(ss / pool);
                for (double x : v) {
                    log.add_value(b, static_cast<int>(k), mean_at_batch(arms[k], b) + (x - m) / sd);
                }
            }
        }
        std::stringstream csv;
        log.write_csv(csv);
        auto parsed = std::make_shared<ReplayLog>(ReplayLog::read_csv(csv, "generated"));

        auto c = protocol_config(exp, rule, 1.0, decision,
                                 substream_seed(kMasterSeed, static_cast<std::uint64_t>(index)));
        auto rs = run_campaign(c, runs, workers(), index, exp.hypothesis, exp.best_arm());
        direct.insert(direct.end(), rs.begin(), rs.end());
        c.replay = parsed;
        c.seed = substream_seed(kMasterSeed + 1, static_cast<std::uint64_t>(index));
        rs = run_campaign(c, runs, workers(), index, exp.hypothesis, exp.best_arm());
        replayed.insert(replayed.end(), rs.begin(), rs.end());
    }

    bool ok = true;
    auto compare_rate = [&](const char* name, const Rate& x, const Rate& y) {
        const double p = static_cast<double>(x.successes + y.successes) /
                         static_cast<double>(x.trials + y.trials);
        const double se = std::sqrt(p * (1 - p) * (1.0 / x.trials + 1.0 / y.trials));
        const bool good = std::abs(x.value - y.value) <= 3.0 * se + 1e-12;
        ok = ok && good;
        detail("%-6s direct %.2f%% replay %.2f%% (3 SE = %.2f pp) %s", name, pp(x.value), pp(y.value),
               pp(3 * se), good ? "ok" : "DIFFERENT");
    };
    compare_rate("fpr", compute_fpr(direct, decision.delta), compute_fpr(replayed, decision.delta));
    compare_rate("power", compute_power(direct, decision.delta), compute_power(replayed, decision.delta));
    const auto rd = mean_regret(direct);
    const auto rr = mean_regret(replayed);
    const double se = std::sqrt(rd.sd * rd.sd / rd.n + rr.sd * rr.sd / rr.n);
    const bool regret_ok = std::abs(rd.mean - rr.mean) <= 3.0 * se;
    ok = ok && regret_ok;
    detail("regret direct %.2f%% replay %.2f%% (3 SE = %.2f pp) %s", pp(rd.mean), pp(rr.mean),
           pp(3 * se), regret_ok ? "ok" : "DIFFERENT");
    return ok;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "batchbandit_determinism";
    fs::remove_all(root);
    std::ostringstream sink;
    auto run = [&](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"batchbandit"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli::run(static_cast<int>(argv.size()), argv.data(), sink, sink);
    };
    const std::vector<std::string> base = {"simulate", "--dataset", "B", "--policy", "NB-TS,WB-TTTS",
                                           "--eta", "0.7", "--runs", "40", "--seed", "42",
                                           "--allocation-draws", "2000"};
    std::vector<std::string> outputs;
    bool ok = true;
    for (int w : {1, 4, 8}) {
        auto args = base;
        const auto dir = root / ("w" + std::to_string(w));
        args.insert(args.end(), {"--workers", std::to_string(w), "--out-dir", dir.string()});
        if (run(args) != 0) {
            detail("simulate with %d workers failed: %s", w, sink.str().c_str());
            return false;
        }
        outputs.push_back(slurp(dir / "metrics.csv"));
    }
    for (std::size_t i = 1; i < outputs.size(); ++i) ok = ok && outputs[i] == outputs[0];
    detail("metrics.csv identical across 1/4/8 workers: %s", ok ? "yes" : "NO");

    const auto again = root / "from_manifest";
    if (run({"simulate", "--config", (root / "w4" / "manifest.json").string(), "--workers", "2",
             "--out-dir", again.string()}) != 0) {
        detail("re-run from manifest failed: %s", sink.str().c_str());
        return false;
    }
    const bool same = slurp(again / "metrics.csv") == outputs[0];
    detail("re-run from manifest identical: %s", same ? "yes" : "NO");
    fs::remove_all(root);
    return ok && same;
}

struct Criterion {
    std::string name;
    std::function<bool()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {"formula_suite", formula_suite},
        {"fpr_table_b", fpr_table_b},
        {"nb_ts_corner_a", nb_ts_corner_a},
        {"neutral_eta_fpr", neutral_eta_fpr},
        {"flat_dirichlet_moments", flat_dirichlet_moments},
        {"bias_demo", bias_demo_criterion},
        {"regret_table_a", regret_table_a},
        {"recall_ordering", recall_ordering},
        {"replay_round_trip", replay_round_trip},
        {"determinism", determinism},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.empty()) {
        for (const auto& c : criteria()) wanted.push_back(c.name);
    }
    int failed = 0;
    for (const auto& name : wanted) {
        const auto it = std::find_if(criteria().begin(), criteria().end(),
                                     [&](const Criterion& c) { return c.name == name; });
        if (it == criteria().end()) {
            std::printf("FAIL %s: unknown criterion\n", name.c_str());
            ++failed;
            continue;
        }
        std::printf("== %s\n", name.c_str());
        std::fflush(stdout);
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = it->run();
        } catch (const std::exception& e) {
            detail("exception: %s", e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %s (%.0fs)\n", ok ? "PASS" : "FAIL", name.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
