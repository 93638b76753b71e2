#include "batchbandit/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "batchbandit/error.hpp"

namespace batchbandit {

namespace {

std::string cell_name(int batch, int arm) {
    return "(batch " + std::to_string(batch) + ", arm " + std::to_string(arm + 1) + ")";
}

void check_allocation(const Allocation& allocation, std::size_t arms) {
    if (allocation.e.size() != arms) {
        fail(ErrorKind::invalid_input, "allocation has " + std::to_string(allocation.e.size()) +
                                           " entries for " + std::to_string(arms) + " arms");
    }
    double total = 0.0;
    for (double p : allocation.e) {
        if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::invalid_input, "bad allocation entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::invalid_input, "allocation must sum to 1");
}

// Gaussian sufficient statistics (sum, sum of squares) of n draws.
std::pair<double, double> gaussian_sums(std::int64_t n, double mean, double sd, Rng& rng) {
    if (n == 0) return {0.0, 0.0};
    boost::random::normal_distribution<double> normal;
    const double dn = static_cast<double>(n);
    const double batch_mean = mean + sd / std::sqrt(dn) * normal(rng);
    double within = 0.0;
    if (n > 1) {
        boost::random::chi_squared_distribution<double> chi2(dn - 1.0);
        within = sd * sd * chi2(rng);
    }
    return {dn * batch_mean, within + dn * batch_mean * batch_mean};
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

template <class T>
T parse_number(const std::string& text, const std::string& source, int line_no) {
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        fail(ErrorKind::invalid_config,
             source + ":" + std::to_string(line_no) + ": cannot parse '" + text + "'");
    }
    return value;
}

}  // namespace

double mean_at_batch(const ArmSpec& spec, int batch) {
    if (spec.trend == Trend::stationary) return spec.base_mean;
    return spec.base_mean + 0.5 * (std::cos(std::numbers::pi / 20.0 * (batch - 1)) - 1.0);
}

void Environment::validate() const {
    if (arms.size() < 2) fail(ErrorKind::invalid_config, "need at least two arms");
    for (std::size_t k = 0; k < arms.size(); ++k) {
        if (!(arms[k].noise_sd > 0.0) || !std::isfinite(arms[k].noise_sd)) {
            fail(ErrorKind::invalid_config, "arm " + std::to_string(k + 1) + ": noise_sd must be > 0");
        }
        if (!std::isfinite(arms[k].base_mean)) {
            fail(ErrorKind::invalid_config, "arm " + std::to_string(k + 1) + ": non-finite mean");
        }
    }
    if (schedule.num_batches < 1) fail(ErrorKind::invalid_config, "num_batches must be >= 1");
    if (schedule.lambda < static_cast<std::int64_t>(arms.size())) {
        fail(ErrorKind::invalid_config, "batch size lambda must be at least the number of arms");
    }
}

std::int64_t draw_batch_total(const BatchSchedule& schedule, Rng& rng) {
    if (schedule.kind == BatchKind::fixed_size) return schedule.lambda;
    boost::random::poisson_distribution<std::int64_t, double> pois(
        static_cast<double>(schedule.lambda));
    std::int64_t t = 0;
    while (t == 0) t = pois(rng);
    return t;
}

std::vector<std::int64_t> draw_assignment(std::int64_t total, std::span<const double> probs,
                                          Rng& rng) {
    std::vector<std::int64_t> counts(probs.size(), 0);
    std::int64_t remaining = total;
    double mass_left = 1.0;
    for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
        const double p = mass_left > 0.0 ? std::clamp(probs[k] / mass_left, 0.0, 1.0) : 1.0;
        if (p >= 1.0) {
            counts[k] = remaining;
        } else if (p > 0.0) {
            boost::random::binomial_distribution<std::int64_t, double> binom(remaining, p);
            counts[k] = binom(rng);
        }
        remaining -= counts[k];
        mass_left -= probs[k];
    }
    if (!probs.empty()) counts.back() += remaining;
    return counts;
}

std::vector<BatchSummary> draw_batch(const Environment& env, const Allocation& allocation,
                                     int batch, Rng& rng) {
    check_allocation(allocation, env.arms.size());
    const std::int64_t total = draw_batch_total(env.schedule, rng);
    const auto counts = draw_assignment(total, allocation.e, rng);

    std::vector<BatchSummary> out;
    out.reserve(env.arms.size());
    for (std::size_t k = 0; k < env.arms.size(); ++k) {
        const auto& arm = env.arms[k];
        const auto [sum, sum_sq] =
            gaussian_sums(counts[k], mean_at_batch(arm, batch), arm.noise_sd, rng);
        out.push_back(BatchSummary::from_sums(batch, static_cast<int>(k), counts[k], sum, sum_sq,
                                              total, allocation.e[k]));
    }
    return out;
}

double ReplayCell::cell_mean() const {
    if (is_summary) return mean;
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double ReplayCell::cell_sd() const {
    if (is_summary) return sd;
    if (values.size() < 2) return 0.0;
    const double m = cell_mean();
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

ReplayCell& ReplayLog::cell(int batch, int arm) {
    if (batch < 1 || arm < 0) {
        fail(ErrorKind::invalid_input, "replay cell out of range " + cell_name(batch, arm));
    }
    num_batches_ = std::max(num_batches_, batch);
    num_arms_ = std::max(num_arms_, arm + 1);
    return cells_[{batch, arm}];
}

void ReplayLog::add_value(int batch, int arm, double value) {
    if (!std::isfinite(value)) fail(ErrorKind::invalid_input, "non-finite replay value");
    cell(batch, arm).values.push_back(value);
}

void ReplayLog::set_summary(int batch, int arm, std::int64_t count, double mean, double sd) {
    if (count < 0 || !(sd >= 0.0) || !std::isfinite(mean) || !std::isfinite(sd)) {
        fail(ErrorKind::invalid_input, "bad replay summary " + cell_name(batch, arm));
    }
    auto& c = cell(batch, arm);
    c.is_summary = true;
    c.count = count;
    c.mean = mean;
    c.sd = sd;
    format_ = ReplayFormat::summary;
}

const ReplayCell* ReplayLog::find(int batch, int arm) const {
    const auto it = cells_.find({batch, arm});
    return it == cells_.end() ? nullptr : &it->second;
}

void ReplayLog::check_coverage(int batch, int arms) const {
    for (int k = 0; k < arms; ++k) {
        const auto* c = find(batch, k);
        if (c == nullptr || c->empty()) {
            fail(ErrorKind::replay_coverage, "replay log has no data for " + cell_name(batch, k));
        }
    }
}

ReplayLog ReplayLog::read_csv(std::istream& in, const std::string& source) {
    ReplayLog log;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv_line(line);
        if (!have_header) {
            if (fields == std::vector<std::string>{"batch", "arm", "value"}) {
                log.format_ = ReplayFormat::raw;
            } else if (fields ==
                       std::vector<std::string>{"batch", "arm", "count", "mean", "sd"}) {
                log.format_ = ReplayFormat::summary;
            } else {
                fail(ErrorKind::invalid_config,
                     source + ":" + std::to_string(line_no) +
                         ": expected header 'batch,arm,value' or 'batch,arm,count,mean,sd'");
            }
            have_header = true;
            continue;
        }
        const std::size_t expected = log.format_ == ReplayFormat::raw ? 3 : 5;
        if (fields.size() != expected) {
            fail(ErrorKind::invalid_config, source + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(expected) + " fields");
        }
        const int batch = parse_number<int>(fields[0], source, line_no);
        const int arm = parse_number<int>(fields[1], source, line_no);
        if (batch < 1 || arm < 1) {
            fail(ErrorKind::invalid_config,
                 source + ":" + std::to_string(line_no) + ": batch and arm are 1-based");
        }
        if (log.format_ == ReplayFormat::raw) {
            log.add_value(batch, arm - 1, parse_number<double>(fields[2], source, line_no));
        } else {
            log.set_summary(batch, arm - 1, parse_number<std::int64_t>(fields[2], source, line_no),
                            parse_number<double>(fields[3], source, line_no),
                            parse_number<double>(fields[4], source, line_no));
        }
    }
    if (!have_header) fail(ErrorKind::invalid_config, source + ": empty replay log");
    return log;
}

ReplayLog ReplayLog::read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open replay log " + path);
    return read_csv(in, path);
}

void ReplayLog::write_csv(std::ostream& out) const {
    std::ostringstream buf;
    buf.precision(17);
    if (format_ == ReplayFormat::raw) {
        buf << "batch,arm,value\n";
        for (const auto& [key, c] : cells_) {
            for (double v : c.values) buf << key.first << ',' << key.second + 1 << ',' << v << '\n';
        }
    } else {
        buf << "batch,arm,count,mean,sd\n";
        for (const auto& [key, c] : cells_) {
            buf << key.first << ',' << key.second + 1 << ',' << c.count << ',' << c.cell_mean()
                << ',' << c.cell_sd() << '\n';
        }
    }
    out << buf.str();
}

std::vector<BatchSummary> replay_batch(const ReplayLog& log, const Allocation& allocation,
                                       int batch, const BatchSchedule& schedule, Rng& rng) {
    const std::size_t arms = allocation.e.size();
    check_allocation(allocation, arms);
    log.check_coverage(batch, static_cast<int>(arms));

    const std::int64_t total = draw_batch_total(schedule, rng);
    const auto counts = draw_assignment(total, allocation.e, rng);

    std::vector<BatchSummary> out;
    out.reserve(arms);
    for (std::size_t k = 0; k < arms; ++k) {
        const ReplayCell& c = *log.find(batch, static_cast<int>(k));
        double sum = 0.0;
        double sum_sq = 0.0;
        if (c.is_summary) {
            std::tie(sum, sum_sq) = gaussian_sums(counts[k], c.mean, c.sd, rng);
        } else {
            boost::random::uniform_int_distribution<std::size_t> pick(0, c.values.size() - 1);
            for (std::int64_t i = 0; i < counts[k]; ++i) {
                const double v = c.values[pick(rng)];
                sum += v;
                sum_sq += v * v;
            }
        }
        out.push_back(BatchSummary::from_sums(batch, static_cast<int>(k), counts[k], sum, sum_sq,
                                              total, allocation.e[k]));
    }
    return out;
}

double check_variance_convergence(const BatchSchedule& schedule, WeightScheme scheme,
                                  int num_batches, Rng& rng) {
    if (num_batches < 1) fail(ErrorKind::invalid_config, "num_batches must be >= 1");
    double numerator = 0.0;
    for (int b = 0; b < num_batches; ++b) {
        const double t = static_cast<double>(draw_batch_total(schedule, rng));
        const double phi_sq = scheme == WeightScheme::phi_one ? 1.0 : t;
        // T_b identical terms phi^2 / T_b
        numerator += (t * phi_sq) / t;
    }
    const double expected = scheme == WeightScheme::phi_one
                                ? static_cast<double>(num_batches)
                                : static_cast<double>(num_batches) *
                                      static_cast<double>(schedule.lambda);
    return numerator / expected;
}

}  // namespace batchbandit
