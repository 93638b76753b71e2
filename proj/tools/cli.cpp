#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "batchbandit/datasets.hpp"
#include "batchbandit/engine.hpp"
#include "batchbandit/error.hpp"
#include "batchbandit/evaluation.hpp"

namespace batchbandit::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum class Kind { integer, number, text, text_list, number_list };

struct Key {
    std::string name;
    Kind kind;
    json def;
    std::string help;
};

std::string flag_name(const std::string& key) {
    std::string f = key;
    std::replace(f.begin(), f.end(), '_', '-');
    return "--" + f;
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::integer: return "an integer";
        case Kind::number: return "a number";
        case Kind::text: return "a string";
        case Kind::text_list: return "a list of strings";
        case Kind::number_list: return "a list of numbers";
    }
    return "?";
}

bool matches(Kind k, const json& v) {
    switch (k) {
        case Kind::integer: return v.is_number_integer();
        case Kind::number: return v.is_number();
        case Kind::text: return v.is_string();
        case Kind::text_list:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); });
        case Kind::number_list:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
    }
    return false;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    std::int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    return q + "\"";
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Resolved settings of one command: defaults, then the config file, then flags.
class Settings {
public:
    Settings(const std::vector<Key>& keys, std::string command) : keys_(keys), command_(std::move(command)) {
        for (const auto& k : keys_) values_[k.name] = k.def;
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::io, "cannot open config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        path_ = path;
        text_ = ss.str();
        json j;
        try {
            j = json::parse(text_);
        } catch (const json::parse_error& e) {
            const auto [line, col] = line_col(e.byte == 0 ? 0 : e.byte - 1);
            std::string msg = e.what();
            if (const auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
            fail(ErrorKind::invalid_config,
                 path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
        }
        // A manifest written by an earlier run can be used as a config file.
        if (j.is_object() && j.contains("config") && j.contains("command")) {
            if (j["command"] != command_) {
                fail(ErrorKind::invalid_config, path + ": manifest is for command '" +
                                                    j["command"].get<std::string>() + "'");
            }
            j = j["config"];
        }
        if (!j.is_object()) fail(ErrorKind::invalid_config, path + ":1: config must be a JSON object");
        for (const auto& [name, value] : j.items()) {
            const Key* key = find(name);
            if (!key) fail(ErrorKind::invalid_config, where(name) + "unknown key '" + name + "'");
            if (!(value.is_null() && key->def.is_null()) && !matches(key->kind, value)) {
                fail(ErrorKind::invalid_config,
                     where(name) + name + ": expected " + kind_name(key->kind));
            }
            values_[name] = value;
        }
    }

    void apply_flag(const std::string& name, const std::string& raw) {
        const Key* key = find(name);
        from_flag_.insert(name);
        json v;
        switch (key->kind) {
            case Kind::integer: {
                const auto x = parse_int(raw);
                if (!x) bad(name, "expected an integer, got '" + raw + "'");
                v = *x;
                break;
            }
            case Kind::number: {
                const auto x = parse_double(raw);
                if (!x) bad(name, "expected a number, got '" + raw + "'");
                v = *x;
                break;
            }
            case Kind::text: v = raw; break;
            case Kind::text_list: v = split(raw, ','); break;
            case Kind::number_list: {
                v = json::array();
                for (const auto& part : split(raw, ',')) {
                    const auto x = parse_double(part);
                    if (!x) bad(name, "expected numbers, got '" + part + "'");
                    v.push_back(*x);
                }
                break;
            }
        }
        values_[name] = v;
    }

    [[noreturn]] void bad(const std::string& name, const std::string& msg) const {
        fail(ErrorKind::invalid_config, where(name) + name + ": " + msg);
    }

    bool has(const std::string& name) const { return !values_.at(name).is_null(); }
    double number(const std::string& name) const { return values_.at(name).get<double>(); }
    std::int64_t integer(const std::string& name) const { return values_.at(name).get<std::int64_t>(); }
    std::string text(const std::string& name) const { return values_.at(name).get<std::string>(); }
    std::vector<std::string> texts(const std::string& name) const {
        return values_.at(name).get<std::vector<std::string>>();
    }
    std::vector<double> numbers(const std::string& name) const {
        return values_.at(name).get<std::vector<double>>();
    }

    std::int64_t positive(const std::string& name) const {
        const auto v = integer(name);
        if (v < 1) bad(name, "must be >= 1");
        return v;
    }

    // Range checks that do not depend on the dataset, reported against the
    // line or flag that set the value.
    void check_ranges() const {
        auto num = [&](const char* name, auto ok, const char* msg) {
            if (!values_.count(name) || values_.at(name).is_null()) return;
            const auto& v = values_.at(name);
            if (v.is_array()) {
                for (const auto& x : v) {
                    if (!ok(x.get<double>())) bad(name, msg);
                }
            } else if (!ok(v.get<double>())) {
                bad(name, msg);
            }
        };
        auto positive = [](double x) { return x > 0.0; };
        auto unit_open = [](double x) { return x > 0.0 && x < 1.0; };
        num("eta", positive, "must be > 0");
        num("grid", positive, "values must be > 0");
        num("noise_sd", positive, "must be > 0");
        num("gamma", [](double x) { return x >= 0.0 && x < 1.0; }, "must be in [0, 1)");
        num("beta", [](double x) { return x >= 0.0 && x <= 1.0; }, "must be in [0, 1]");
        num("rho", unit_open, "must be in (0, 1)");
        num("delta", unit_open, "must be in (0, 1)");
        num("k_prime", [](double x) { return x >= 2.0; }, "must be >= 2");
        for (const char* name : {"runs", "batches", "batch_size", "samples_per_arm", "alpha_draws"}) {
            num(name, [](double x) { return x >= 1.0; }, "must be >= 1");
        }
        num("allocation_draws", [](double x) { return x >= 0.0; }, "must be >= 0");
    }

    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

    const std::string& path() const { return path_; }
    const std::string& command() const { return command_; }

private:
    const Key* find(const std::string& name) const {
        for (const auto& k : keys_) {
            if (k.name == name) return &k;
        }
        return nullptr;
    }

    std::pair<std::size_t, std::size_t> line_col(std::size_t offset) const {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        return {line, col};
    }

    std::string where(const std::string& name) const {
        if (from_flag_.count(name)) return flag_name(name) + ": ";
        if (path_.empty()) return "";
        const auto pos = text_.find("\"" + name + "\"");
        if (pos == std::string::npos) return path_ + ": ";
        return path_ + ":" + std::to_string(line_col(pos).first) + ": ";
    }

    std::vector<Key> keys_;
    std::string command_;
    std::map<std::string, json> values_;
    std::set<std::string> from_flag_;
    std::string path_;
    std::string text_;
};

struct Context {
    Settings& settings;
    std::ostream& out;
    std::ostream& err;
    fs::path out_dir;
    int workers = 1;
    bool keep_trajectories = false;
    std::vector<std::string> outputs;

    void write_file(const std::string& name, const std::string& content) {
        const fs::path p = out_dir / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) fail(ErrorKind::io, "cannot write " + p.string());
        f << content;
        f.close();
        if (!f) fail(ErrorKind::io, "error writing " + p.string());
        outputs.push_back(p.string());
    }
};

const std::vector<std::string> kAllPolicies = {"Unif", "NB-TS", "WB-TS", "NB-TTTS", "WB-TTTS"};

std::vector<Key> campaign_keys() {
    return {
        {"policies", Kind::text_list, kAllPolicies, "sampling rules, comma separated"},
        {"eta", Kind::number, 1.0, "posterior reshaping factor"},
        {"rho", Kind::number, 0.10, "nominal false positive rate"},
        {"k_prime", Kind::integer, nullptr, "assumed number of tied best arms"},
        {"delta", Kind::number, nullptr, "explicit decision threshold (overrides rho)"},
        {"runs", Kind::integer, 10000, "runs per experiment"},
        {"seed", Kind::integer, 0, "master seed"},
        {"batches", Kind::integer, 20, "batches per run"},
        {"batch_size", Kind::integer, 500, "samples per batch (Poisson mean for poisson schedules)"},
        {"schedule", Kind::text, "fixed", "fixed or poisson"},
        {"gamma", Kind::number, 0.01, "per-arm traffic floor"},
        {"beta", Kind::number, 0.5, "top-two leader probability"},
        {"variance", Kind::text, "known", "known or estimated"},
        {"weights", Kind::text, "one", "batch weights: one or sqrt-total"},
        {"alpha_draws", Kind::integer, 10000, "posterior draws for the final decision"},
        {"allocation_draws", Kind::integer, 0, "posterior draws per allocation (0: alpha_draws)"},
    };
}

VarianceMode parse_variance(const Settings& s) {
    const auto v = s.text("variance");
    if (v == "known") return VarianceMode::known;
    if (v == "estimated") return VarianceMode::estimated;
    s.bad("variance", "expected 'known' or 'estimated', got '" + v + "'");
}

ExperimentConfig base_config(const Settings& s, int k_prime) {
    ExperimentConfig c;
    c.schedule.num_batches = static_cast<int>(s.positive("batches"));
    c.schedule.lambda = s.positive("batch_size");
    const auto sched = s.text("schedule");
    if (sched == "fixed") {
        c.schedule.kind = BatchKind::fixed_size;
    } else if (sched == "poisson") {
        c.schedule.kind = BatchKind::poisson_duration;
    } else {
        s.bad("schedule", "expected 'fixed' or 'poisson', got '" + sched + "'");
    }
    c.gamma = s.number("gamma");
    c.eta = s.number("eta");
    c.beta = s.number("beta");
    c.variance = parse_variance(s);
    const auto w = s.text("weights");
    if (w == "one") {
        c.weights = WeightScheme::phi_one;
    } else if (w == "sqrt-total" || w == "sqrt_total") {
        c.weights = WeightScheme::phi_sqrt_total;
    } else {
        s.bad("weights", "expected 'one' or 'sqrt-total', got '" + w + "'");
    }
    c.alpha_draws = s.integer("alpha_draws");
    c.allocation_draws = s.integer("allocation_draws");
    if (k_prime < 2) s.bad("k_prime", "must be >= 2");
    if (s.has("delta")) {
        const double d = s.number("delta");
        if (!(d > 0.0 && d < 1.0)) s.bad("delta", "must be in (0, 1)");
        c.decision = DecisionRule::from_threshold(d, k_prime);
    } else {
        const double rho = s.number("rho");
        if (!(rho > 0.0 && rho < 1.0)) s.bad("rho", "must be in (0, 1)");
        c.decision = DecisionRule::from_fpr(rho, k_prime);
    }
    return c;
}

std::vector<SamplingRule> parse_policies(const Settings& s) {
    std::vector<SamplingRule> rules;
    for (const auto& p : s.texts("policies")) {
        try {
            rules.push_back(parse_sampling_rule(p));
        } catch (const Error&) {
            s.bad("policies", "unknown sampling rule '" + p + "'");
        }
    }
    if (rules.empty()) s.bad("policies", "at least one policy is required");
    return rules;
}

json trajectory_json(const RunTrajectory& t, SamplingRule rule, int experiment, std::int64_t run) {
    json batches = json::array();
    for (const auto& b : t.batches) {
        std::vector<std::int64_t> counts;
        std::vector<double> means;
        for (const auto& s : b.summaries) {
            counts.push_back(s.count);
            means.push_back(s.mean);
        }
        batches.push_back({{"batch", b.batch},
                           {"allocation", b.allocation.e},
                           {"counts", counts},
                           {"means", means},
                           {"alpha", b.alpha ? json(b.alpha->alpha) : json(nullptr)}});
    }
    return {{"policy", to_string(rule)},
            {"experiment", experiment},
            {"run", run},
            {"seed", t.seed},
            {"batches", batches},
            {"final_alpha", t.final_alpha.alpha},
            {"winner", t.winner ? json(*t.winner + 1) : json(nullptr)},
            {"counts", t.cumulative_counts}};
}

class MetricsTable {
public:
    MetricsTable() { buf_ << "metric,policy,dataset,eta,value,ci_lo,ci_hi,runs,seed\n"; }

    void add(const std::string& metric, const std::string& policy, const std::string& dataset,
             double eta, double value, double lo, double hi, std::int64_t runs, std::uint64_t seed) {
        buf_ << metric << ',' << csv_field(policy) << ',' << csv_field(dataset) << ','
             << format_number(eta) << ',' << format_number(value) << ',' << format_number(lo) << ','
             << format_number(hi) << ',' << runs << ',' << seed << '\n';
    }

    void add_rate(const std::string& metric, const std::string& policy, const std::string& dataset,
                  double eta, const Rate& r, std::uint64_t seed) {
        add(metric, policy, dataset, eta, r.value, r.ci_lo, r.ci_hi, r.trials, seed);
    }

    void add_all(const std::vector<DecisionRecord>& records, double delta, const std::string& policy,
                 const std::string& dataset, double eta, std::uint64_t seed) {
        const bool any_h0 = std::any_of(records.begin(), records.end(),
                                        [](const auto& r) { return r.hypothesis == Hypothesis::h0; });
        const bool any_h1 = std::any_of(records.begin(), records.end(),
                                        [](const auto& r) { return r.hypothesis == Hypothesis::h1; });
        if (any_h0) add_rate("fpr", policy, dataset, eta, compute_fpr(records, delta), seed);
        if (any_h1) {
            add_rate("power", policy, dataset, eta, compute_power(records, delta), seed);
            if (const auto p = compute_precision(records, delta)) {
                add_rate("precision", policy, dataset, eta, *p, seed);
            } else {
                add("precision", policy, dataset, eta, NAN, NAN, NAN, 0, seed);
            }
            const auto m = mean_regret(records);
            add("regret", policy, dataset, eta, m.mean, m.ci_lo, m.ci_hi, m.n, seed);
        }
    }

    std::string str() const { return buf_.str(); }

private:
    std::ostringstream buf_;
};

DatasetSpec load_dataset(const Settings& s) {
    const auto name = s.text("dataset");
    if (fs::exists(name) && fs::is_regular_file(name)) {
        std::ifstream in(name);
        if (!in) fail(ErrorKind::io, "cannot open dataset file " + name);
        try {
            return dataset_from_json(json::parse(in));
        } catch (const json::parse_error& e) {
            fail(ErrorKind::invalid_config, name + ": " + e.what());
        }
    }
    try {
        return builtin_dataset(name);
    } catch (const Error& e) {
        s.bad("dataset", e.what());
    }
}

int cmd_simulate(Context& ctx) {
    const auto& s = ctx.settings;
    const auto dataset = load_dataset(s);
    if (dataset.experiments.empty()) s.bad("dataset", "has no experiments");
    int k_prime = 2;
    if (s.has("k_prime")) {
        k_prime = static_cast<int>(s.integer("k_prime"));
    } else {
        for (const auto& e : dataset.experiments) {
            if (e.hypothesis == Hypothesis::h0) {
                k_prime = e.k_prime;
                break;
            }
        }
    }
    ExperimentConfig base = base_config(s, k_prime);
    const auto rules = parse_policies(s);
    const auto runs = s.positive("runs");
    const auto master = static_cast<std::uint64_t>(s.integer("seed"));
    const double noise_sd = s.number("noise_sd");
    if (!(noise_sd > 0.0)) s.bad("noise_sd", "must be > 0");

    MetricsTable table;
    json trajectories = json::array();
    for (const auto rule : rules) {
        std::vector<DecisionRecord> records;
        for (std::size_t i = 0; i < dataset.experiments.size(); ++i) {
            const auto& exp = dataset.experiments[i];
            const int index = static_cast<int>(i) + 1;
            ExperimentConfig c = base;
            c.rule = rule;
            c.arms = exp.arm_specs(noise_sd);
            // Every policy sees the same run seeds for a given experiment.
            c.seed = substream_seed(master, static_cast<std::uint64_t>(index));
            ctx.err << "simulate: " << to_string(rule) << " experiment " << index << "/"
                    << dataset.experiments.size() << "\n";
            if (ctx.keep_trajectories) {
                const auto ts = run_monte_carlo(c, runs, ctx.workers);
                for (std::size_t r = 0; r < ts.size(); ++r) {
                    records.push_back(make_record(ts[r], index, exp.hypothesis, exp.best_arm()));
                    trajectories.push_back(trajectory_json(ts[r], rule, index, static_cast<std::int64_t>(r) + 1));
                }
            } else {
                auto rs = run_campaign(c, runs, ctx.workers, index, exp.hypothesis, exp.best_arm());
                records.insert(records.end(), std::make_move_iterator(rs.begin()),
                               std::make_move_iterator(rs.end()));
            }
        }
        table.add_all(records, base.decision.delta, to_string(rule), dataset.name, base.eta, master);
    }
    const auto csv = table.str();
    ctx.write_file("metrics.csv", csv);
    if (ctx.keep_trajectories) ctx.write_file("trajectories.json", trajectories.dump(1) + "\n");
    ctx.out << csv;
    return exit_ok;
}

int cmd_replay(Context& ctx) {
    const auto& s = ctx.settings;
    if (!s.has("log")) s.bad("log", "a replay log is required");
    auto log = std::make_shared<ReplayLog>(ReplayLog::read_csv_file(s.text("log")));
    const int k = log->num_arms();
    if (k < 2) fail(ErrorKind::invalid_config, s.text("log") + ": replay log needs at least two arms");

    const int k_prime = s.has("k_prime") ? static_cast<int>(s.integer("k_prime")) : 2;
    Settings patched = s;
    if (!s.has("batches")) patched.apply_flag("batches", std::to_string(log->num_batches()));
    ExperimentConfig base = base_config(patched, k_prime);

    // Per-arm pooled moments over the whole log.
    std::vector<ArmSpec> arms;
    for (int a = 0; a < k; ++a) {
        double n = 0.0;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int b = 1; b <= log->num_batches(); ++b) {
            const ReplayCell* c = log->find(b, a);
            if (!c || c->empty()) continue;
            const double cn = c->is_summary ? static_cast<double>(c->count)
                                            : static_cast<double>(c->values.size());
            const double m = c->cell_mean();
            const double sd = c->cell_sd();
            n += cn;
            sum += cn * m;
            sum_sq += cn * (sd * sd + m * m);
        }
        const double mean = n > 0 ? sum / n : 0.0;
        const double var = n > 0 ? sum_sq / n - mean * mean : 0.0;
        arms.push_back({mean, std::sqrt(std::max(var, 1e-12)), Trend::stationary});
    }
    base.arms = arms;
    base.replay = log;

    const auto hyp_text = s.text("hypothesis");
    Hypothesis hyp = Hypothesis::h1;
    if (hyp_text == "H0" || hyp_text == "h0") {
        hyp = Hypothesis::h0;
    } else if (hyp_text != "H1" && hyp_text != "h1") {
        s.bad("hypothesis", "expected H0 or H1, got '" + hyp_text + "'");
    }
    std::size_t best = 0;
    if (s.has("best")) {
        const auto b = s.integer("best");
        if (b < 1 || b > k) s.bad("best", "must name an arm in 1.." + std::to_string(k));
        best = static_cast<std::size_t>(b - 1);
    } else {
        for (std::size_t a = 1; a < arms.size(); ++a) {
            if (arms[a].base_mean > arms[best].base_mean) best = a;
        }
    }

    const auto rules = parse_policies(s);
    const auto runs = s.positive("runs");
    const auto master = static_cast<std::uint64_t>(s.integer("seed"));
    const std::string name = fs::path(s.text("log")).stem().string();

    MetricsTable table;
    json trajectories = json::array();
    for (const auto rule : rules) {
        ExperimentConfig c = base;
        c.rule = rule;
        c.seed = substream_seed(master, 1);
        ctx.err << "replay: " << to_string(rule) << "\n";
        std::vector<DecisionRecord> records;
        if (ctx.keep_trajectories) {
            const auto ts = run_monte_carlo(c, runs, ctx.workers);
            for (std::size_t r = 0; r < ts.size(); ++r) {
                records.push_back(make_record(ts[r], 1, hyp, best));
                trajectories.push_back(trajectory_json(ts[r], rule, 1, static_cast<std::int64_t>(r) + 1));
            }
        } else {
            records = run_campaign(c, runs, ctx.workers, 1, hyp, best);
        }
        table.add_all(records, c.decision.delta, to_string(rule), name, c.eta, master);
    }
    const auto csv = table.str();
    ctx.write_file("metrics.csv", csv);
    if (ctx.keep_trajectories) ctx.write_file("trajectories.json", trajectories.dump(1) + "\n");
    ctx.out << csv;
    return exit_ok;
}

int cmd_calibrate(Context& ctx) {
    const auto& s = ctx.settings;
    const auto k_prime = static_cast<int>(s.integer("k_prime"));
    if (k_prime < 2) s.bad("k_prime", "must be >= 2");
    CalibrationOptions opts;
    opts.runs = s.positive("runs");
    opts.samples_per_arm = s.positive("samples_per_arm");
    opts.rho = s.number("rho");
    if (!(opts.rho > 0.0 && opts.rho < 1.0)) s.bad("rho", "must be in (0, 1)");
    opts.alpha_draws = s.integer("alpha_draws");
    opts.seed = static_cast<std::uint64_t>(s.integer("seed"));
    opts.workers = ctx.workers;
    const auto grid = s.has("grid") ? s.numbers("grid") : default_eta_grid();
    for (double g : grid) {
        if (!(g > 0.0 && g <= 2.0)) s.bad("grid", "values must lie in (0, 2]");
    }
    if (grid.empty()) s.bad("grid", "must not be empty");

    ctx.err << "calibrate-eta: K'=" << k_prime << ", " << grid.size() << " grid points\n";
    const auto r = calibrate_neutral_eta(k_prime, grid, opts);
    std::ostringstream csv;
    csv << "k_prime,eta,alpha1_mean,alpha1_variance,target_mean,target_variance,distance,fpr,runs,best\n";
    for (const auto& p : r.curve) {
        csv << k_prime << ',' << format_number(p.eta) << ',' << format_number(p.alpha1_mean) << ','
            << format_number(p.alpha1_variance) << ',' << format_number(r.target_mean) << ','
            << format_number(r.target_variance) << ',' << format_number(p.distance) << ','
            << format_number(p.fpr) << ',' << opts.runs << ',' << (p.eta == r.best_eta ? 1 : 0)
            << '\n';
    }
    ctx.write_file("calibration.csv", csv.str());
    ctx.out << csv.str();
    ctx.err << "calibrate-eta: best eta " << format_number(r.best_eta) << "\n";
    return exit_ok;
}

int cmd_bias_demo(Context& ctx) {
    const auto& s = ctx.settings;
    SamplingRule rule;
    try {
        rule = parse_sampling_rule(s.text("rule"));
    } catch (const Error&) {
        s.bad("rule", "unknown sampling rule '" + s.text("rule") + "'");
    }
    if (rule == SamplingRule::uniform) s.bad("rule", "needs one of NB-TS, WB-TS, NB-TTTS, WB-TTTS");
    BiasDemoOptions opts;
    opts.runs = s.positive("runs");
    opts.batch_size = s.positive("batch_size");
    opts.true_means = s.numbers("means");
    opts.noise_sd = s.number("noise_sd");
    opts.variance = parse_variance(s);
    opts.eta = s.number("eta");
    opts.gamma = s.number("gamma");
    opts.alpha_draws = s.integer("alpha_draws");
    opts.seed = static_cast<std::uint64_t>(s.integer("seed"));
    opts.workers = ctx.workers;

    ctx.err << "bias-demo: " << to_string(rule) << ", " << opts.runs << " runs\n";
    const auto r = bias_demo(rule, opts);

    std::ostringstream summary;
    summary << "rule,statistic,mean,sd,ci99_lo,ci99_hi,n\n";
    std::ostringstream hist;
    hist << "rule,statistic,bin_lo,bin_hi,count\n";
    for (const auto& [name, z] : {std::pair{"naive", &r.naive}, std::pair{"weighted", &r.weighted}}) {
        summary << to_string(rule) << ',' << name << ',' << format_number(z->mean) << ','
                << format_number(z->sd) << ',' << format_number(z->ci99_lo) << ','
                << format_number(z->ci99_hi) << ',' << z->n << '\n';
        const double width = (z->hist_hi - z->hist_lo) / static_cast<double>(z->histogram.size());
        for (std::size_t i = 0; i < z->histogram.size(); ++i) {
            hist << to_string(rule) << ',' << name << ','
                 << format_number(z->hist_lo + width * static_cast<double>(i)) << ','
                 << format_number(z->hist_lo + width * static_cast<double>(i + 1)) << ','
                 << z->histogram[i] << '\n';
        }
    }
    std::ostringstream zs;
    zs << "run,naive_z,weighted_z\n";
    for (std::size_t i = 0; i < r.naive_z.size(); ++i) {
        zs << i + 1 << ',' << format_number(r.naive_z[i]) << ',' << format_number(r.weighted_z[i]) << '\n';
    }
    ctx.write_file("bias_summary.csv", summary.str());
    ctx.write_file("bias_histogram.csv", hist.str());
    ctx.write_file("bias_z.csv", zs.str());
    ctx.out << summary.str();
    return exit_ok;
}

int cmd_convergence(Context& ctx) {
    const auto& s = ctx.settings;
    ConvergenceOptions opts;
    opts.means = s.numbers("means");
    if (opts.means.size() < 2) s.bad("means", "need at least two arms");
    const double top = *std::max_element(opts.means.begin(), opts.means.end());
    if (s.has("k_prime")) {
        opts.k_prime = static_cast<int>(s.integer("k_prime"));
    } else {
        opts.k_prime = static_cast<int>(std::count(opts.means.begin(), opts.means.end(), top));
        if (opts.k_prime < 2) opts.k_prime = 2;
    }
    if (opts.k_prime > static_cast<int>(opts.means.size())) s.bad("k_prime", "exceeds the number of arms");
    try {
        opts.rule = parse_sampling_rule(s.text("rule"));
    } catch (const Error&) {
        s.bad("rule", "unknown sampling rule '" + s.text("rule") + "'");
    }
    opts.eta = s.number("eta");
    opts.runs = s.positive("runs");
    opts.batches = static_cast<int>(s.positive("batches"));
    opts.batch_size = s.positive("batch_size");
    const double rho = s.number("rho");
    if (!(rho > 0.0 && rho < 1.0)) s.bad("rho", "must be in (0, 1)");
    opts.delta = s.has("delta") ? s.number("delta") : threshold_for_fpr(rho, opts.k_prime);
    opts.gamma = s.number("gamma");
    opts.alpha_draws = s.integer("alpha_draws");
    opts.allocation_draws = s.integer("allocation_draws");
    opts.variance = parse_variance(s);
    opts.seed = static_cast<std::uint64_t>(s.integer("seed"));
    opts.workers = ctx.workers;

    ctx.err << "convergence: " << to_string(opts.rule) << ", K'=" << opts.k_prime << "\n";
    const auto r = convergence_study(opts);
    std::ostringstream alphas;
    alphas << "run";
    for (int i = 1; i <= opts.k_prime; ++i) alphas << ",alpha_" << i;
    alphas << '\n';
    for (std::size_t run = 0; run < r.alphas.size(); ++run) {
        alphas << run + 1;
        for (double a : r.alphas[run]) alphas << ',' << format_number(a);
        alphas << '\n';
    }
    std::ostringstream summary;
    summary << "rule,k_prime,eta,runs,marginal_mean,marginal_variance,target_mean,target_variance,"
               "beta_a,beta_b,delta,exceedance,ci_lo,ci_hi\n";
    summary << to_string(opts.rule) << ',' << opts.k_prime << ',' << format_number(opts.eta) << ','
            << opts.runs << ',' << format_number(r.marginal_mean) << ','
            << format_number(r.marginal_variance) << ','
            << format_number(flat_dirichlet_marginal_mean(opts.k_prime)) << ','
            << format_number(flat_dirichlet_marginal_variance(opts.k_prime)) << ','
            << format_number(r.beta_a) << ',' << format_number(r.beta_b) << ','
            << format_number(opts.delta) << ',' << format_number(r.exceedance.value) << ','
            << format_number(r.exceedance.ci_lo) << ',' << format_number(r.exceedance.ci_hi) << '\n';
    ctx.write_file("convergence_alpha.csv", alphas.str());
    ctx.write_file("convergence_summary.csv", summary.str());
    ctx.out << summary.str();
    return exit_ok;
}

struct Command {
    std::string name;
    std::string description;
    std::vector<Key> keys;
    std::function<int(Context&)> handler;
    bool trajectories = false;
};

std::vector<Command> commands() {
    std::vector<Command> cmds;

    auto sim = campaign_keys();
    sim.insert(sim.begin(), {"dataset", Kind::text, "A", "built-in dataset (A, A', B, B') or dataset JSON file"});
    sim.push_back({"noise_sd", Kind::number, 1.0, "reward noise standard deviation"});
    cmds.push_back({"simulate", "Run Monte Carlo campaigns over a dataset", sim, cmd_simulate, true});

    auto rep = campaign_keys();
    rep.insert(rep.begin(), {"log", Kind::text, nullptr, "replay log CSV"});
    for (auto& k : rep) {
        if (k.name == "variance") k.def = "estimated";
        if (k.name == "batches") k.def = nullptr;
    }
    rep.push_back({"hypothesis", Kind::text, "H1", "H0 or H1 for the logged experiment"});
    rep.push_back({"best", Kind::integer, nullptr, "true best arm (1-based); default: highest logged mean"});
    cmds.push_back({"replay", "Run campaigns that resample rewards from a log", rep, cmd_replay, true});

    cmds.push_back({"calibrate-eta",
                    "Grid-search the neutral eta for K' tied arms",
                    {{"k_prime", Kind::integer, 2, "number of tied arms"},
                     {"grid", Kind::number_list, nullptr, "eta values (default 0.40..1.20 by 0.05)"},
                     {"runs", Kind::integer, 10000, "runs per grid point"},
                     {"samples_per_arm", Kind::integer, 10000, "samples per arm"},
                     {"rho", Kind::number, 0.10, "nominal false positive rate"},
                     {"alpha_draws", Kind::integer, 10000, "posterior draws"},
                     {"seed", Kind::integer, 0, "master seed"}},
                    cmd_calibrate});

    cmds.push_back({"bias-demo",
                    "Two-batch demo of the studentized error under a sampling rule",
                    {{"rule", Kind::text, "NB-TS", "sampling rule"},
                     {"runs", Kind::integer, 100000, "runs"},
                     {"batch_size", Kind::integer, 1000, "samples per batch"},
                     {"means", Kind::number_list, json::array({0.01, 0.0, 0.0}), "true arm means"},
                     {"noise_sd", Kind::number, 1.0, "reward noise standard deviation"},
                     {"variance", Kind::text, "known", "known or estimated"},
                     {"eta", Kind::number, 1.0, "posterior reshaping factor"},
                     {"gamma", Kind::number, 0.01, "per-arm traffic floor"},
                     {"alpha_draws", Kind::integer, 10000, "posterior draws"},
                     {"seed", Kind::integer, 0, "master seed"}},
                    cmd_bias_demo});

    cmds.push_back({"convergence",
                    "Distribution of the final alpha over tied best arms",
                    {{"means", Kind::number_list, json::array({0.0, 0.0, 0.0}), "true arm means"},
                     {"k_prime", Kind::integer, nullptr, "tied arms (default: count of maximal means)"},
                     {"rule", Kind::text, "Unif", "sampling rule"},
                     {"eta", Kind::number, 1.0, "posterior reshaping factor"},
                     {"runs", Kind::integer, 10000, "runs"},
                     {"batches", Kind::integer, 20, "batches per run"},
                     {"batch_size", Kind::integer, 500, "samples per batch"},
                     {"rho", Kind::number, 0.10, "nominal false positive rate"},
                     {"delta", Kind::number, nullptr, "explicit decision threshold"},
                     {"gamma", Kind::number, 0.01, "per-arm traffic floor"},
                     {"variance", Kind::text, "known", "known or estimated"},
                     {"alpha_draws", Kind::integer, 10000, "posterior draws for the final alpha"},
                     {"allocation_draws", Kind::integer, 0, "posterior draws per allocation"},
                     {"seed", Kind::integer, 0, "master seed"}},
                    cmd_convergence});
    return cmds;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_config:
        case ErrorKind::invalid_input:
        case ErrorKind::replay_coverage: return exit_config;
        case ErrorKind::io: return exit_io;
        case ErrorKind::uninformed:
        case ErrorKind::insufficient_data: return exit_runtime;
    }
    return exit_runtime;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian batch bandit simulator", "batchbandit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    auto cmds = commands();
    struct Parsed {
        CLI::App* sub = nullptr;
        std::map<std::string, std::string> flags;
        std::string config;
        std::string out_dir = ".";
        int workers = 0;
        bool keep = false;
    };
    std::vector<Parsed> parsed(cmds.size());
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        auto& p = parsed[i];
        p.sub = app.add_subcommand(cmds[i].name, cmds[i].description);
        p.sub->add_option("--config", p.config, "JSON config file (a manifest also works)");
        p.sub->add_option("--out-dir", p.out_dir, "output directory")->capture_default_str();
        p.sub->add_option("--workers", p.workers, "worker threads (default: BATCHBANDIT_WORKERS or all cores)");
        if (cmds[i].trajectories) {
            p.sub->add_flag("--keep-trajectories", p.keep, "also write trajectories.json");
        }
        for (const auto& k : cmds[i].keys) {
            std::string names = flag_name(k.name);
            if (k.name == "policies") names += ",--policy";
            p.sub->add_option(names, p.flags[k.name], k.help);
        }
    }

    std::string export_name;
    std::string export_out;
    auto* exp = app.add_subcommand("export-dataset", "Print a built-in dataset as JSON");
    exp->add_option("name", export_name, "A, A', B or B'")->required();
    exp->add_option("--out", export_out, "write to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (exp->parsed()) {
            const auto text = to_json(builtin_dataset(export_name)).dump(2) + "\n";
            if (export_out.empty()) {
                out << text;
            } else {
                std::ofstream f(export_out, std::ios::binary);
                if (!f) fail(ErrorKind::io, "cannot write " + export_out);
                f << text;
                if (!f) fail(ErrorKind::io, "error writing " + export_out);
            }
            return exit_ok;
        }
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            auto& p = parsed[i];
            if (!p.sub->parsed()) continue;
            Settings settings(cmds[i].keys, cmds[i].name);
            if (!p.config.empty()) settings.load_file(p.config);
            for (const auto& k : cmds[i].keys) {
                if (p.sub->count(flag_name(k.name)) > 0) settings.apply_flag(k.name, p.flags[k.name]);
            }
            settings.check_ranges();
            Context ctx{settings, out, err, p.out_dir, 1, false, {}};
            ctx.workers = p.workers > 0 ? p.workers : default_worker_count();
            ctx.keep_trajectories = p.keep;
            std::error_code ec;
            fs::create_directories(ctx.out_dir, ec);
            if (ec) fail(ErrorKind::io, "cannot create " + ctx.out_dir.string() + ": " + ec.message());

            const int code = cmds[i].handler(ctx);
            const json config = settings.to_json();
            json manifest = {
                {"tool", "batchbandit"},
                {"version", kToolVersion},
                {"command", cmds[i].name},
                {"timestamp", utc_timestamp()},
                {"config_file", settings.path().empty() ? json(nullptr) : json(settings.path())},
                {"config_hash", "fnv1a64:" + hex64(fnv1a64(config.dump()))},
                {"config", config},
                {"workers", ctx.workers},
                {"outputs", ctx.outputs},
            };
            const fs::path mp = ctx.out_dir / "manifest.json";
            std::ofstream mf(mp, std::ios::binary);
            if (!mf) fail(ErrorKind::io, "cannot write " + mp.string());
            mf << manifest.dump(2) << "\n";
            if (!mf) fail(ErrorKind::io, "error writing " + mp.string());
            return code;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_config;
}

}  // namespace batchbandit::cli
