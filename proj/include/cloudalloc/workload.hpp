#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "money.hpp"

namespace cloudalloc {

/* Samplers are written out by hand on top of mt19937_64 because the
 * standard distributions are implementation-defined; this keeps traces
 * byte-identical across standard libraries for the same seed. */
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline double exponential_sample(std::mt19937_64& rng, double mean) {
    double u;
    do {
        u = uniform01(rng);
    } while (u >= 1.0);
    return -mean * std::log1p(-u);
}

inline int poisson_sample(std::mt19937_64& rng, double mean) {
    // Knuth's product method; arrival rates here are around one per slot.
    double limit = std::exp(-mean);
    int count = 0;
    double prod = uniform01(rng);
    while (prod > limit) {
        ++count;
        prod *= uniform01(rng);
    }
    return count;
}

/* Bounded Pareto size multiplier. shape/scale/location parametrize the
 * generalized Pareto CDF F(x) = 1 - (1 + shape*(x-location)/scale)^(-1/shape);
 * sampling inverts the CDF restricted to [min_value, max_value], so the
 * truncation is exact. */
struct ParetoSpec {
    double shape = 1.0 / 1.01;
    double scale = 1.0 / 6.06;
    double location = 1.0 / 6.0;
    double min_value = 0.5;
    double max_value = 10.0;
};

inline double pareto_cdf(const ParetoSpec& p, double x) {
    return 1.0 - std::pow(1.0 + p.shape * (x - p.location) / p.scale, -1.0 / p.shape);
}

inline double pareto_sample(std::mt19937_64& rng, const ParetoSpec& p) {
    if (!(p.min_value < p.max_value) || !(p.shape > 0) || !(p.scale > 0))
        throw std::invalid_argument("bad bounded Pareto parameters");
    double lo = pareto_cdf(p, p.min_value);
    double hi = pareto_cdf(p, p.max_value);
    double u = uniform_in(rng, lo, hi);
    double x = p.location + p.scale / p.shape * (std::pow(1.0 - u, -p.shape) - 1.0);
    return std::min(std::max(x, p.min_value), p.max_value);
}

struct WorkloadConfig {
    std::uint64_t seed = 1;
    std::int64_t job_count = 3000;   // stop after this many jobs
    double arrival_rate = 1.0;       // Poisson mean per slot
    double size_base = 240.0;        // work units per unit of the Pareto draw
    ParetoSpec size_dist;
    double slack_max = 3.0;          // deadlines stretch by U[1, slack_max]
    int parallel_limit = 20;
};

inline void validate_workload_config(const WorkloadConfig& cfg) {
    if (cfg.job_count < 1) throw std::invalid_argument("job_count must be >= 1");
    if (!(cfg.arrival_rate > 0)) throw std::invalid_argument("arrival_rate must be > 0");
    if (cfg.slack_max < 1.0) throw std::invalid_argument("slack_max must be >= 1");
    if (cfg.parallel_limit < 1) throw std::invalid_argument("parallel_limit must be >= 1");
    if (std::llround(cfg.size_base * cfg.size_dist.min_value) < 1)
        throw std::invalid_argument("size_base * min_value must round to >= 1 work unit");
}

/* Draws jobs slot by slot until job_count jobs exist. Deadlines are sized
 * so the expected slackness is (1 + slack_max) / 2 and never fall below the
 * minimum window that keeps the job feasible. */
inline std::vector<Job> generate_jobs(const WorkloadConfig& cfg) {
    validate_workload_config(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::vector<Job> jobs;
    jobs.reserve(static_cast<std::size_t>(cfg.job_count));
    Slot t = 0;
    while (static_cast<std::int64_t>(jobs.size()) < cfg.job_count) {
        ++t;
        int arrivals = poisson_sample(rng, cfg.arrival_rate);
        for (int k = 0; k < arrivals && static_cast<std::int64_t>(jobs.size()) < cfg.job_count; ++k) {
            Job j;
            j.id = static_cast<std::int64_t>(jobs.size()) + 1;
            j.arrival = t;
            double x = pareto_sample(rng, cfg.size_dist);
            j.size = std::max<std::int64_t>(1, std::llround(cfg.size_base * x));
            j.parallel_limit = cfg.parallel_limit;
            double stretch = uniform_in(rng, 1.0, cfg.slack_max);
            std::int64_t min_window =
                (j.size + cfg.parallel_limit - 1) / cfg.parallel_limit;
            std::int64_t window = static_cast<std::int64_t>(
                std::ceil(stretch * static_cast<double>(j.size) / cfg.parallel_limit));
            j.deadline_slots = std::max(window, min_window);
            validate_job(j);
            jobs.push_back(j);
        }
    }
    return jobs;
}

enum class PriceKind { Exponential, Constant };

struct PriceConfig {
    std::uint64_t seed = 2;
    PriceKind kind = PriceKind::Exponential;
    double mean = 0.18;       // exponential mean, price units per instance-hour
    Money constant = 0;       // used when kind == Constant
};

inline SpotPriceTrace generate_prices(const PriceConfig& cfg, Slot horizon) {
    if (horizon < 0) throw std::invalid_argument("price horizon must be >= 0");
    SpotPriceTrace trace;
    trace.prices.reserve(static_cast<std::size_t>(horizon));
    std::mt19937_64 rng(cfg.seed);
    for (Slot t = 0; t < horizon; ++t) {
        if (cfg.kind == PriceKind::Constant) {
            trace.prices.push_back(cfg.constant);
        } else {
            if (!(cfg.mean > 0)) throw std::invalid_argument("price mean must be > 0");
            trace.prices.push_back(money_from_double(exponential_sample(rng, cfg.mean)));
        }
    }
    return trace;
}

/* Job files are line oriented: "id arrival deadline size parallel", with
 * '#' comments and blank lines ignored. */
inline void save_jobs(const std::vector<Job>& jobs, std::ostream& out) {
    out << "# id arrival deadline size parallel\n";
    for (const Job& j : jobs)
        out << j.id << ' ' << j.arrival << ' ' << j.deadline_slots << ' ' << j.size << ' '
            << j.parallel_limit << '\n';
}

inline void save_jobs(const std::vector<Job>& jobs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open job file for writing: " + path);
    save_jobs(jobs, out);
}

inline std::vector<Job> load_jobs(std::istream& in) {
    std::vector<Job> jobs;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        Job j;
        if (!(fields >> j.id)) continue;  // blank or comment-only line
        if (!(fields >> j.arrival >> j.deadline_slots >> j.size >> j.parallel_limit))
            throw std::runtime_error("job file line " + std::to_string(line_no) +
                                     ": expected 'id arrival deadline size parallel'");
        std::string extra;
        if (fields >> extra)
            throw std::runtime_error("job file line " + std::to_string(line_no) + ": trailing field '" +
                                     extra + "'");
        try {
            validate_job(j);
        } catch (const std::exception& e) {
            throw std::runtime_error("job file line " + std::to_string(line_no) + ": " + e.what());
        }
        jobs.push_back(j);
    }
    return jobs;
}

inline std::vector<Job> load_jobs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open job file: " + path);
    return load_jobs(in);
}

/* Price files carry one decimal price per line, same comment rules. */
inline void save_prices(const SpotPriceTrace& trace, std::ostream& out) {
    for (Money m : trace.prices) out << money_format(m) << '\n';
}

inline void save_prices(const SpotPriceTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open price file for writing: " + path);
    save_prices(trace, out);
}

inline SpotPriceTrace load_prices(std::istream& in) {
    SpotPriceTrace trace;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = line.find_last_not_of(" \t\r");
        std::string token = line.substr(begin, end - begin + 1);
        Money m;
        try {
            m = money_parse(token);
        } catch (const std::exception& e) {
            throw std::runtime_error("price file line " + std::to_string(line_no) + ": " + e.what());
        }
        if (m < 0) throw std::runtime_error("price file line " + std::to_string(line_no) + ": negative price");
        trace.prices.push_back(m);
    }
    return trace;
}

inline SpotPriceTrace load_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open price file: " + path);
    return load_prices(in);
}

}  // namespace cloudalloc
