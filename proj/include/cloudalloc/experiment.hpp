#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "engine.hpp"
#include "learning.hpp"
#include "model.hpp"
#include "money.hpp"
#include "workload.hpp"

namespace cloudalloc {

inline constexpr const char* kVersion = "cloudalloc 1.0";

/* One experiment run: a workload family, a price process, an engine setup
 * and the mode-specific knobs. Policy grids are fixed (see *_grid below);
 * seeds pair one workload and one price trace per entry so every policy in
 * a sweep faces identical inputs. */
struct ExperimentConfig {
    std::string mode = "sweep-spot";  // sweep-spot | sweep-selfowned | learn
    std::string out_dir = "out";
    int threads = 0;  // 0 = hardware concurrency

    WorkloadConfig workload;
    PriceConfig prices;
    EngineConfig engine;

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<int> selfowned_counts = {200, 400};

    std::int64_t learn_jobs = 30000;
    std::uint64_t learn_seed = 101;
    double learn_confidence = 0.05;
};

/* beta and beta0 take twelfths plus a near-one point; going to 1 exactly
 * would make the spot budget unbounded. */
inline std::vector<Ratio> beta_grid() {
    std::vector<Ratio> g;
    for (int i = 0; i <= 11; ++i) g.push_back(Ratio(i, 12));
    g.push_back(Ratio(9999, 10000));
    return g;
}

inline std::vector<Money> bid_grid() {
    std::vector<Money> g;
    for (int i = 0; i < 7; ++i) g.push_back(100000 + 30000 * static_cast<Money>(i));
    return g;
}

inline std::vector<Ratio> theta_grid() {
    std::vector<Ratio> g;
    for (int i = 0; i <= 10; ++i) g.push_back(Ratio(i, 10));
    return g;
}

// ---------------------------------------------------------------------------
// configuration text format: `key = value` lines, '#' comments, dotted keys

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !parts.empty()) parts.push_back(trim(cur));
    return parts;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        std::int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        std::uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline Money parse_money(const std::string& key, const std::string& v) {
    try {
        return money_parse(v);
    } catch (const std::exception& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

inline void apply_preset(ExperimentConfig& cfg, const std::string& name) {
    if (name != "paper-v-a") throw std::invalid_argument("unknown preset '" + name + "'");
    cfg.workload = WorkloadConfig{};
    cfg.workload.job_count = 3000;
    cfg.workload.arrival_rate = 1.0;
    cfg.workload.size_base = 240.0;
    cfg.workload.slack_max = 3.0;
    cfg.workload.parallel_limit = 20;
    cfg.prices = PriceConfig{};
    cfg.prices.kind = PriceKind::Exponential;
    /* A price mean of 1.1 against bids of 0.10..0.28 and an on-demand price
     * of 0.25 leaves spot capacity almost never held, so the adaptive and
     * fixed-fraction families collapse onto on-demand and their cost gap
     * shrinks to noise. 0.18 keeps spot contested at the upper bids and
     * gives the widest measured gap at tight slack. Exposed as prices.mean
     * for anyone who wants a different regime. */
    cfg.prices.mean = 0.18;
    cfg.engine = EngineConfig{};
    cfg.engine.slot_minutes = 5;
    cfg.engine.ondemand_price = 250000;
    cfg.engine.selfowned_price = 0;
    cfg.engine.selfowned_count = 0;
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.selfowned_counts = {200, 400};
    cfg.learn_jobs = 30000;
    cfg.learn_seed = 101;
    cfg.learn_confidence = 0.05;
}

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "mode") {
        if (value != "sweep-spot" && value != "sweep-selfowned" && value != "learn")
            throw std::invalid_argument("config key 'mode': unknown mode '" + value + "'");
        cfg.mode = value;
    } else if (key == "out") {
        cfg.out_dir = value;
    } else if (key == "preset") {
        apply_preset(cfg, value);
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(parse_int(key, value));
    } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const std::string& p : split_list(value)) cfg.seeds.push_back(parse_u64(key, p));
        if (cfg.seeds.empty()) throw std::invalid_argument("config key 'seeds': list is empty");
    } else if (key == "workload.jobs") {
        cfg.workload.job_count = parse_int(key, value);
    } else if (key == "workload.seed") {
        cfg.workload.seed = parse_u64(key, value);
    } else if (key == "workload.arrival_rate") {
        cfg.workload.arrival_rate = parse_double(key, value);
    } else if (key == "workload.size_base") {
        cfg.workload.size_base = parse_double(key, value);
    } else if (key == "workload.slack_max") {
        cfg.workload.slack_max = parse_double(key, value);
    } else if (key == "workload.parallel_limit") {
        cfg.workload.parallel_limit = static_cast<int>(parse_int(key, value));
    } else if (key == "workload.pareto_shape") {
        cfg.workload.size_dist.shape = parse_double(key, value);
    } else if (key == "workload.pareto_scale") {
        cfg.workload.size_dist.scale = parse_double(key, value);
    } else if (key == "workload.pareto_location") {
        cfg.workload.size_dist.location = parse_double(key, value);
    } else if (key == "workload.pareto_min") {
        cfg.workload.size_dist.min_value = parse_double(key, value);
    } else if (key == "workload.pareto_max") {
        cfg.workload.size_dist.max_value = parse_double(key, value);
    } else if (key == "prices.kind") {
        if (value == "exponential")
            cfg.prices.kind = PriceKind::Exponential;
        else if (value == "constant")
            cfg.prices.kind = PriceKind::Constant;
        else
            throw std::invalid_argument("config key 'prices.kind': unknown kind '" + value + "'");
    } else if (key == "prices.mean") {
        cfg.prices.mean = parse_double(key, value);
    } else if (key == "prices.constant") {
        cfg.prices.constant = parse_money(key, value);
    } else if (key == "prices.seed") {
        cfg.prices.seed = parse_u64(key, value);
    } else if (key == "engine.slot_minutes") {
        cfg.engine.slot_minutes = static_cast<int>(parse_int(key, value));
    } else if (key == "engine.ondemand_price") {
        cfg.engine.ondemand_price = parse_money(key, value);
    } else if (key == "engine.selfowned_price") {
        cfg.engine.selfowned_price = parse_money(key, value);
    } else if (key == "engine.selfowned_count") {
        cfg.engine.selfowned_count = static_cast<int>(parse_int(key, value));
    } else if (key == "engine.release_on_completion") {
        cfg.engine.release_on_completion = parse_bool(key, value);
    } else if (key == "selfowned.counts") {
        cfg.selfowned_counts.clear();
        for (const std::string& p : split_list(value))
            cfg.selfowned_counts.push_back(static_cast<int>(parse_int(key, p)));
        if (cfg.selfowned_counts.empty())
            throw std::invalid_argument("config key 'selfowned.counts': list is empty");
    } else if (key == "learn.jobs") {
        cfg.learn_jobs = parse_int(key, value);
    } else if (key == "learn.seed") {
        cfg.learn_seed = parse_u64(key, value);
    } else if (key == "learn.confidence") {
        cfg.learn_confidence = parse_double(key, value);
        if (!(cfg.learn_confidence > 0.0 && cfg.learn_confidence < 1.0))
            throw std::invalid_argument("config key 'learn.confidence': must lie in (0, 1)");
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

inline void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + " line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(origin + " line " + std::to_string(lineno) + ": empty key");
        try {
            apply_config_key(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument(origin + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_config_text(cfg, buf.str(), path);
}

/* Serializes the resolved configuration; the output parses back through
 * apply_config_text, so a manifest alone reproduces its run. */
inline std::string config_echo(const ExperimentConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    out << "mode = " << cfg.mode << "\n";
    out << "out = " << cfg.out_dir << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "workload.jobs = " << cfg.workload.job_count << "\n";
    out << "workload.seed = " << cfg.workload.seed << "\n";
    out << "workload.arrival_rate = " << format_double(cfg.workload.arrival_rate) << "\n";
    out << "workload.size_base = " << format_double(cfg.workload.size_base) << "\n";
    out << "workload.slack_max = " << format_double(cfg.workload.slack_max) << "\n";
    out << "workload.parallel_limit = " << cfg.workload.parallel_limit << "\n";
    out << "workload.pareto_shape = " << format_double(cfg.workload.size_dist.shape) << "\n";
    out << "workload.pareto_scale = " << format_double(cfg.workload.size_dist.scale) << "\n";
    out << "workload.pareto_location = " << format_double(cfg.workload.size_dist.location) << "\n";
    out << "workload.pareto_min = " << format_double(cfg.workload.size_dist.min_value) << "\n";
    out << "workload.pareto_max = " << format_double(cfg.workload.size_dist.max_value) << "\n";
    out << "prices.kind = " << (cfg.prices.kind == PriceKind::Exponential ? "exponential" : "constant")
        << "\n";
    out << "prices.mean = " << format_double(cfg.prices.mean) << "\n";
    out << "prices.constant = " << money_format(cfg.prices.constant) << "\n";
    out << "prices.seed = " << cfg.prices.seed << "\n";
    out << "engine.slot_minutes = " << cfg.engine.slot_minutes << "\n";
    out << "engine.ondemand_price = " << money_format(cfg.engine.ondemand_price) << "\n";
    out << "engine.selfowned_price = " << money_format(cfg.engine.selfowned_price) << "\n";
    out << "engine.selfowned_count = " << cfg.engine.selfowned_count << "\n";
    out << "engine.release_on_completion = " << (cfg.engine.release_on_completion ? "true" : "false")
        << "\n";
    out << "selfowned.counts = ";
    for (std::size_t i = 0; i < cfg.selfowned_counts.size(); ++i)
        out << (i ? "," : "") << cfg.selfowned_counts[i];
    out << "\n";
    out << "learn.jobs = " << cfg.learn_jobs << "\n";
    out << "learn.seed = " << cfg.learn_seed << "\n";
    out << "learn.confidence = " << format_double(cfg.learn_confidence) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// runners

namespace detail {

template <typename F>
inline void parallel_for(std::size_t n, int threads, F&& body) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : (hw ? hw : 1);
    workers = std::min<std::size_t>(std::max<std::size_t>(workers, 1), n ? n : 1);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/* One workload/price pairing shared by every policy in a sweep. */
struct SeedScenario {
    std::uint64_t seed = 0;
    std::vector<Job> jobs;
    SpotPriceTrace trace;
};

inline Slot required_trace_length(const std::vector<Job>& jobs, int slots_per_hour) {
    Slot need = 0;
    for (const Job& j : jobs) {
        Slot hours = (j.deadline_slots + slots_per_hour - 1) / slots_per_hour;
        need = std::max(need, j.arrival + hours * slots_per_hour - 1);
    }
    return need;
}

inline SeedScenario make_scenario(const ExperimentConfig& cfg, std::uint64_t seed, std::int64_t job_count) {
    SeedScenario sc;
    sc.seed = seed;
    WorkloadConfig wl = cfg.workload;
    wl.seed = seed;
    wl.job_count = job_count;
    sc.jobs = generate_jobs(wl);
    PriceConfig pc = cfg.prices;
    pc.seed = cfg.prices.seed + seed;
    sc.trace = generate_prices(pc, required_trace_length(sc.jobs, cfg.engine.slots_per_hour()));
    return sc;
}

/* Family names the allocation scheme a row was produced by:
 *   adaptive      spot/on-demand splits from the slackness budget
 *   theta         fixed spot fraction, no endgame rescue
 *   planned-self  adaptive plus coarse-grained self-owned sizing
 *   greedy-self   adaptive plus take-all self-owned sizing */
struct PolicyRow {
    std::string family;
    int selfowned_count = 0;
    Money bid = 0;
    std::optional<Ratio> beta;
    std::optional<Ratio> beta0;
    std::optional<Ratio> theta;
    double alpha = 0.0;
    double cost = 0.0;
    std::int64_t processed_work = 0;
    std::int64_t completed_work = 0;
    std::int64_t completed_jobs = 0;
    std::int64_t incomplete_jobs = 0;
    double gamma = 0.0;
    double spot_hourly = 0.0;
};

namespace detail {

inline PolicySpec adaptive_spec(Ratio beta, Money bid) {
    PolicySpec s;
    s.spot_mode = PolicySpec::Spot::Adaptive;
    s.selfowned_mode = PolicySpec::SelfOwned::None;
    s.beta = beta;
    s.bid = bid;
    s.rescue = true;
    return s;
}

inline PolicySpec theta_spec(Ratio theta, Money bid) {
    PolicySpec s;
    s.spot_mode = PolicySpec::Spot::FixedFraction;
    s.selfowned_mode = PolicySpec::SelfOwned::None;
    s.theta = theta;
    s.bid = bid;
    s.rescue = false;
    return s;
}

inline PolicySpec planned_spec(Ratio beta, Ratio beta0, Money bid) {
    PolicySpec s;
    s.spot_mode = PolicySpec::Spot::Adaptive;
    s.selfowned_mode = PolicySpec::SelfOwned::Planned;
    s.beta = beta;
    s.beta0 = beta0;
    s.bid = bid;
    s.rescue = true;
    return s;
}

inline PolicySpec greedy_spec(Ratio beta, Money bid) {
    PolicySpec s;
    s.spot_mode = PolicySpec::Spot::Adaptive;
    s.selfowned_mode = PolicySpec::SelfOwned::Greedy;
    s.beta = beta;
    s.bid = bid;
    s.rescue = true;
    return s;
}

/* Evaluates one fixed policy over every scenario; totals are pooled so the
 * resulting alpha weighs each seed by its processed work. */
inline RunTotals evaluate_policy(const PolicySpec& spec, const std::vector<SeedScenario>& scenarios,
                                 const EngineConfig& engine_cfg) {
    RunTotals pooled;
    pooled.slots_per_hour = engine_cfg.slots_per_hour();
    pooled.selfowned_count = engine_cfg.selfowned_count;
    PolicyChooser fixed = [&](const Job&, int) { return PolicyChoice{0, spec}; };
    for (const SeedScenario& sc : scenarios) {
        RunResult r = run_simulation(sc.jobs, sc.trace, fixed, engine_cfg);
        pooled.cost_scaled += r.totals.cost_scaled;
        pooled.completed_work += r.totals.completed_work;
        pooled.completed_jobs += r.totals.completed_jobs;
        pooled.incomplete_jobs += r.totals.incomplete_jobs;
        pooled.spot_cost_scaled += r.totals.spot_cost_scaled;
        pooled.spot_work += r.totals.spot_work;
        pooled.ondemand_work += r.totals.ondemand_work;
        pooled.ondemand_hours += r.totals.ondemand_hours;
        pooled.selfowned_work += r.totals.selfowned_work;
        pooled.horizon_end += r.totals.horizon_end;  // summed: gamma stays a true utilization
    }
    return pooled;
}

inline PolicyRow make_row(std::string family, const PolicySpec& spec, int selfowned_count,
                          const RunTotals& t) {
    PolicyRow row;
    row.family = std::move(family);
    row.selfowned_count = selfowned_count;
    row.bid = spec.bid;
    if (spec.spot_mode == PolicySpec::Spot::Adaptive)
        row.beta = spec.beta;
    else
        row.theta = spec.theta;
    if (spec.selfowned_mode == PolicySpec::SelfOwned::Planned) row.beta0 = spec.beta0;
    row.alpha = t.alpha().value_or(0.0);
    row.cost = t.total_cost();
    row.processed_work = t.processed_work();
    row.completed_work = t.completed_work;
    row.completed_jobs = t.completed_jobs;
    row.incomplete_jobs = t.incomplete_jobs;
    row.gamma = t.gamma().value_or(0.0);
    row.spot_hourly = t.spot_hourly_cost();
    return row;
}

}  // namespace detail

/* Per-bid argmin of alpha over the beta grid; ties take the smaller beta. */
struct BetaCalibration {
    std::vector<Money> bids;
    std::vector<Ratio> beta_star;

    Ratio at(Money bid) const {
        for (std::size_t i = 0; i < bids.size(); ++i)
            if (bids[i] == bid) return beta_star[i];
        throw std::invalid_argument("bid not in calibration grid");
    }
};

struct SpotSweepResult {
    std::vector<PolicyRow> adaptive_rows;  // |betas| x |bids|
    std::vector<PolicyRow> theta_rows;     // |thetas| x |bids|
    BetaCalibration calibration;
    double best_adaptive_alpha = 0.0;
    double best_theta_alpha = 0.0;
    double rho = 0.0;  // 1 - best adaptive / best theta
};

inline SpotSweepResult sweep_spot(const ExperimentConfig& cfg, const std::vector<SeedScenario>& scenarios) {
    const std::vector<Ratio> betas = beta_grid();
    const std::vector<Money> bids = bid_grid();
    const std::vector<Ratio> thetas = theta_grid();
    EngineConfig ecfg = cfg.engine;
    ecfg.selfowned_count = 0;

    std::vector<PolicySpec> specs;
    for (Money b : bids)
        for (const Ratio& beta : betas) specs.push_back(detail::adaptive_spec(beta, b));
    std::size_t adaptive_count = specs.size();
    for (Money b : bids)
        for (const Ratio& th : thetas) specs.push_back(detail::theta_spec(th, b));

    std::vector<RunTotals> totals(specs.size());
    detail::parallel_for(specs.size(), cfg.threads,
                         [&](std::size_t i) { totals[i] = detail::evaluate_policy(specs[i], scenarios, ecfg); });

    SpotSweepResult res;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        bool adaptive = i < adaptive_count;
        PolicyRow row = detail::make_row(adaptive ? "adaptive" : "theta", specs[i], 0, totals[i]);
        (adaptive ? res.adaptive_rows : res.theta_rows).push_back(std::move(row));
    }

    res.calibration.bids = bids;
    for (std::size_t bi = 0; bi < bids.size(); ++bi) {
        std::size_t best = bi * betas.size();
        for (std::size_t k = 1; k < betas.size(); ++k) {
            std::size_t i = bi * betas.size() + k;
            if (totals[i].alpha().value_or(1e300) < totals[best].alpha().value_or(1e300)) best = i;
        }
        res.calibration.beta_star.push_back(specs[best].beta);
    }

    auto best_alpha = [](const std::vector<PolicyRow>& rows) {
        double best = 1e300;
        for (const PolicyRow& r : rows)
            if (r.completed_work > 0 && r.alpha < best) best = r.alpha;
        return best;
    };
    res.best_adaptive_alpha = best_alpha(res.adaptive_rows);
    res.best_theta_alpha = best_alpha(res.theta_rows);
    res.rho = 1.0 - res.best_adaptive_alpha / res.best_theta_alpha;
    return res;
}

inline SpotSweepResult sweep_spot(const ExperimentConfig& cfg) {
    std::vector<SeedScenario> scenarios;
    for (std::uint64_t s : cfg.seeds) scenarios.push_back(make_scenario(cfg, s, cfg.workload.job_count));
    return sweep_spot(cfg, scenarios);
}

struct SelfownedLevel {
    int selfowned_count = 0;
    std::vector<PolicyRow> planned_rows;  // |bids| x |beta0s|
    std::vector<PolicyRow> greedy_rows;   // |bids|
    double best_planned_alpha = 0.0;
    double best_greedy_alpha = 0.0;
    double rho = 0.0;
};

struct SelfownedSweepResult {
    BetaCalibration calibration;
    std::vector<SelfownedLevel> levels;
};

/* Experiment over self-owned sizing: beta per bid is pinned by a pool-less
 * calibration sweep, then for each pool size the planned-sizing policies
 * (13 beta0 per bid) face the greedy take-all baseline (one per bid). */
inline SelfownedSweepResult sweep_selfowned(const ExperimentConfig& cfg,
                                            const std::vector<SeedScenario>& scenarios) {
    SelfownedSweepResult res;
    res.calibration = sweep_spot(cfg, scenarios).calibration;

    const std::vector<Money> bids = bid_grid();
    const std::vector<Ratio> beta0s = beta_grid();
    for (int count : cfg.selfowned_counts) {
        EngineConfig ecfg = cfg.engine;
        ecfg.selfowned_count = count;

        std::vector<PolicySpec> specs;
        for (Money b : bids)
            for (const Ratio& b0 : beta0s) specs.push_back(detail::planned_spec(res.calibration.at(b), b0, b));
        std::size_t planned_count = specs.size();
        for (Money b : bids) specs.push_back(detail::greedy_spec(res.calibration.at(b), b));

        std::vector<RunTotals> totals(specs.size());
        detail::parallel_for(specs.size(), cfg.threads, [&](std::size_t i) {
            totals[i] = detail::evaluate_policy(specs[i], scenarios, ecfg);
        });

        SelfownedLevel level;
        level.selfowned_count = count;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            bool planned = i < planned_count;
            PolicyRow row = detail::make_row(planned ? "planned-self" : "greedy-self", specs[i], count, totals[i]);
            (planned ? level.planned_rows : level.greedy_rows).push_back(std::move(row));
        }
        auto best_alpha = [](const std::vector<PolicyRow>& rows) {
            double best = 1e300;
            for (const PolicyRow& r : rows)
                if (r.completed_work > 0 && r.alpha < best) best = r.alpha;
            return best;
        };
        level.best_planned_alpha = best_alpha(level.planned_rows);
        level.best_greedy_alpha = best_alpha(level.greedy_rows);
        level.rho = 1.0 - level.best_planned_alpha / level.best_greedy_alpha;
        res.levels.push_back(std::move(level));
    }
    return res;
}

inline SelfownedSweepResult sweep_selfowned(const ExperimentConfig& cfg) {
    std::vector<SeedScenario> scenarios;
    for (std::uint64_t s : cfg.seeds) scenarios.push_back(make_scenario(cfg, s, cfg.workload.job_count));
    return sweep_selfowned(cfg, scenarios);
}

struct LearnResult {
    BetaCalibration calibration;
    std::vector<PolicySpec> grid;  // the calibrated per-bid policies the learner mixes
    RunTotals learner_totals;
    double learner_alpha = 0.0;
    std::vector<PolicyRow> fixed_rows;  // each grid policy alone on the same workload
    double best_fixed_alpha = 0.0;
    std::vector<PolicyRow> theta_rows;  // fixed-fraction baselines on the same workload
    double best_theta_alpha = 0.0;
    double rho_bar = 0.0;         // 1 - learner alpha / best theta alpha
    double fixed_ratio = 0.0;     // learner alpha / best fixed grid alpha
    RegretReport regret;
    std::vector<Resolution> history;
    std::vector<double> final_weights;
};

/* Online learning over the calibrated per-bid policy set, compared against
 * every fixed grid policy and the fixed-fraction baselines on one long
 * workload. Calibration runs on the sweep seeds; the learning workload uses
 * its own seed so the learner is never tuned on its own jobs. */
inline LearnResult run_learn(const ExperimentConfig& cfg) {
    std::vector<SeedScenario> calib_scenarios;
    for (std::uint64_t s : cfg.seeds) calib_scenarios.push_back(make_scenario(cfg, s, cfg.workload.job_count));

    LearnResult res;
    res.calibration = sweep_spot(cfg, calib_scenarios).calibration;

    EngineConfig ecfg = cfg.engine;
    for (std::size_t i = 0; i < res.calibration.bids.size(); ++i) {
        if (ecfg.selfowned_count > 0) {
            Ratio beta = res.calibration.beta_star[i];
            for (const Ratio& b0 : beta_grid())
                res.grid.push_back(detail::planned_spec(beta, b0, res.calibration.bids[i]));
        } else {
            res.grid.push_back(detail::adaptive_spec(res.calibration.beta_star[i], res.calibration.bids[i]));
        }
    }

    SeedScenario learn_sc = make_scenario(cfg, cfg.learn_seed, cfg.learn_jobs);

    LearnerOptions opt;
    opt.seed = cfg.learn_seed;
    opt.confidence = cfg.learn_confidence;
    LearnOutcome out = run_learning(learn_sc.jobs, learn_sc.trace, res.grid, ecfg, opt);
    res.learner_totals = out.run.totals;
    res.learner_alpha = out.run.totals.alpha().value_or(0.0);
    res.regret = out.report;
    res.history = std::move(out.history);
    res.final_weights = std::move(out.final_weights);

    std::vector<SeedScenario> learn_only(1);
    learn_only[0] = std::move(learn_sc);

    std::vector<RunTotals> fixed_totals(res.grid.size());
    detail::parallel_for(res.grid.size(), cfg.threads, [&](std::size_t i) {
        fixed_totals[i] = detail::evaluate_policy(res.grid[i], learn_only, ecfg);
    });
    for (std::size_t i = 0; i < res.grid.size(); ++i) {
        const PolicySpec& s = res.grid[i];
        res.fixed_rows.push_back(detail::make_row(
            s.selfowned_mode == PolicySpec::SelfOwned::Planned ? "planned-self" : "adaptive", s,
            ecfg.selfowned_count, fixed_totals[i]));
    }

    std::vector<PolicySpec> theta_specs;
    for (Money b : bid_grid())
        for (const Ratio& th : theta_grid()) theta_specs.push_back(detail::theta_spec(th, b));
    std::vector<RunTotals> theta_totals(theta_specs.size());
    EngineConfig tcfg = ecfg;
    tcfg.selfowned_count = 0;  // the fixed-fraction baseline never had a pool policy
    detail::parallel_for(theta_specs.size(), cfg.threads, [&](std::size_t i) {
        theta_totals[i] = detail::evaluate_policy(theta_specs[i], learn_only, tcfg);
    });
    for (std::size_t i = 0; i < theta_specs.size(); ++i)
        res.theta_rows.push_back(detail::make_row("theta", theta_specs[i], 0, theta_totals[i]));

    auto best_alpha = [](const std::vector<PolicyRow>& rows) {
        double best = 1e300;
        for (const PolicyRow& r : rows)
            if (r.completed_work > 0 && r.alpha < best) best = r.alpha;
        return best;
    };
    res.best_fixed_alpha = best_alpha(res.fixed_rows);
    res.best_theta_alpha = best_alpha(res.theta_rows);
    res.rho_bar = 1.0 - res.learner_alpha / res.best_theta_alpha;
    res.fixed_ratio = res.learner_alpha / res.best_fixed_alpha;
    return res;
}

// ---------------------------------------------------------------------------
// emission

namespace detail {

inline std::string csv_ratio(const std::optional<Ratio>& r) {
    if (!r) return "";
    return ratio_format(*r);
}

inline std::string csv_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

}  // namespace detail

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string policies_csv(std::vector<PolicyRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const PolicyRow& a, const PolicyRow& b) {
        if (a.family != b.family) return a.family < b.family;
        if (a.selfowned_count != b.selfowned_count) return a.selfowned_count < b.selfowned_count;
        if (a.bid != b.bid) return a.bid < b.bid;
        auto key = [](const PolicyRow& r) {
            Ratio v = r.beta0 ? *r.beta0 : (r.beta ? *r.beta : (r.theta ? *r.theta : Ratio(0)));
            return static_cast<double>(v.num) / static_cast<double>(v.den);
        };
        return key(a) < key(b);
    });
    std::ostringstream out;
    out << "family,selfowned,bid,beta,beta0,theta,alpha,cost,completed_work,processed_work,"
           "completed_jobs,incomplete_jobs,gamma,spot_hourly\n";
    for (const PolicyRow& r : rows) {
        out << r.family << ',' << r.selfowned_count << ',' << money_format(r.bid) << ','
            << detail::csv_ratio(r.beta) << ',' << detail::csv_ratio(r.beta0) << ','
            << detail::csv_ratio(r.theta) << ',' << detail::csv_double(r.alpha) << ','
            << detail::csv_double(r.cost) << ',' << r.completed_work << ',' << r.processed_work << ','
            << r.completed_jobs << ',' << r.incomplete_jobs << ',' << detail::csv_double(r.gamma) << ','
            << detail::csv_double(r.spot_hourly) << "\n";
    }
    return out.str();
}

struct RhoRow {
    std::string experiment;
    int selfowned_count = 0;
    double ours_alpha = 0.0;
    double baseline_alpha = 0.0;
    double rho = 0.0;
};

inline std::string rho_csv(const std::vector<RhoRow>& rows) {
    std::ostringstream out;
    out << "experiment,selfowned,ours_alpha,baseline_alpha,rho\n";
    for (const RhoRow& r : rows)
        out << r.experiment << ',' << r.selfowned_count << ',' << detail::csv_double(r.ours_alpha) << ','
            << detail::csv_double(r.baseline_alpha) << ',' << detail::csv_double(r.rho) << "\n";
    return out.str();
}

inline std::string weights_csv(const std::vector<Resolution>& history, std::size_t policy_count) {
    std::ostringstream out;
    out << "slot,job_id,chosen,cost_chosen,argmin";
    for (std::size_t k = 0; k < policy_count; ++k) out << ",w" << k;
    out << "\n";
    for (const Resolution& r : history) {
        std::size_t argmin = 0;
        for (std::size_t k = 1; k < r.normalized_costs.size(); ++k)
            if (r.normalized_costs[k] < r.normalized_costs[argmin]) argmin = k;
        out << r.slot << ',' << r.job_id << ',' << r.chosen << ','
            << detail::csv_double(r.normalized_costs[static_cast<std::size_t>(r.chosen)]) << ',' << argmin;
        for (double w : r.weights) out << ',' << detail::csv_double(w);
        out << "\n";
    }
    return out.str();
}

inline std::string manifest_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "# " << kVersion << " run manifest; parses back as a config file\n";
    out << config_echo(cfg);
    return out.str();
}

/* Executes the configured mode and writes policies.csv, rho.csv,
 * weights.csv (learn mode) and manifest.txt under out_dir. */
inline void run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    std::filesystem::create_directories(cfg.out_dir);
    std::filesystem::path dir(cfg.out_dir);
    write_file(dir / "manifest.txt", manifest_text(cfg));

    std::vector<PolicyRow> rows;
    std::vector<RhoRow> rhos;
    if (cfg.mode == "sweep-spot") {
        SpotSweepResult r = sweep_spot(cfg);
        rows.insert(rows.end(), r.adaptive_rows.begin(), r.adaptive_rows.end());
        rows.insert(rows.end(), r.theta_rows.begin(), r.theta_rows.end());
        rhos.push_back({"sweep-spot", 0, r.best_adaptive_alpha, r.best_theta_alpha, r.rho});
        log << "sweep-spot: best adaptive alpha " << r.best_adaptive_alpha << ", best theta alpha "
            << r.best_theta_alpha << ", rho " << r.rho << "\n";
    } else if (cfg.mode == "sweep-selfowned") {
        SelfownedSweepResult r = sweep_selfowned(cfg);
        for (const SelfownedLevel& lvl : r.levels) {
            rows.insert(rows.end(), lvl.planned_rows.begin(), lvl.planned_rows.end());
            rows.insert(rows.end(), lvl.greedy_rows.begin(), lvl.greedy_rows.end());
            rhos.push_back({"sweep-selfowned", lvl.selfowned_count, lvl.best_planned_alpha,
                            lvl.best_greedy_alpha, lvl.rho});
            log << "sweep-selfowned R=" << lvl.selfowned_count << ": best planned alpha "
                << lvl.best_planned_alpha << ", best greedy alpha " << lvl.best_greedy_alpha << ", rho "
                << lvl.rho << "\n";
        }
    } else if (cfg.mode == "learn") {
        LearnResult r = run_learn(cfg);
        rows.insert(rows.end(), r.fixed_rows.begin(), r.fixed_rows.end());
        rows.insert(rows.end(), r.theta_rows.begin(), r.theta_rows.end());
        rhos.push_back({"learn", cfg.engine.selfowned_count, r.learner_alpha, r.best_theta_alpha, r.rho_bar});
        write_file(dir / "weights.csv", weights_csv(r.history, r.grid.size()));
        log << "learn: learner alpha " << r.learner_alpha << ", best fixed alpha " << r.best_fixed_alpha
            << ", best theta alpha " << r.best_theta_alpha << ", rho " << r.rho_bar << ", regret "
            << r.regret.regret << " (bound " << r.regret.bound << ", resolved " << r.regret.resolved
            << ")\n";
    } else {
        throw std::invalid_argument("unknown mode '" + cfg.mode + "'");
    }
    write_file(dir / "policies.csv", policies_csv(std::move(rows)));
    write_file(dir / "rho.csv", rho_csv(rhos));
}

}  // namespace cloudalloc
