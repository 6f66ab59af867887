#include <catch2/catch_amalgamated.hpp>

#include "cloudalloc/workload.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace cloudalloc;

TEST_CASE("job generation is deterministic per seed") {
    WorkloadConfig cfg;
    cfg.job_count = 500;
    cfg.seed = 17;
    std::vector<Job> a = generate_jobs(cfg);
    std::vector<Job> b = generate_jobs(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].arrival == b[i].arrival);
        CHECK(a[i].deadline_slots == b[i].deadline_slots);
        CHECK(a[i].size == b[i].size);
        CHECK(a[i].parallel_limit == b[i].parallel_limit);
    }
    cfg.seed = 18;
    std::vector<Job> c = generate_jobs(cfg);
    bool differs = false;
    for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i)
        differs = differs || a[i].size != c[i].size || a[i].arrival != c[i].arrival;
    CHECK(differs);
}

TEST_CASE("generated jobs are feasible and bounded") {
    WorkloadConfig cfg;
    cfg.job_count = 2000;
    cfg.seed = 5;
    std::vector<Job> jobs = generate_jobs(cfg);
    REQUIRE(jobs.size() == 2000);
    Slot prev_arrival = 1;
    for (const Job& j : jobs) {
        CHECK(j.size >= 120);   // 240 * 0.5 at the truncation floor
        CHECK(j.size <= 2400);  // 240 * 10 at the ceiling
        CHECK(j.arrival >= prev_arrival);
        prev_arrival = j.arrival;
        std::int64_t min_window = (j.size + j.parallel_limit - 1) / j.parallel_limit;
        CHECK(j.deadline_slots >= min_window);
        // The stretch factor never exceeds slack_max.
        CHECK(j.deadline_slots <=
              static_cast<Slot>(std::ceil(cfg.slack_max * double(j.size) / cfg.parallel_limit)) + 1);
        CHECK_NOTHROW(validate_job(j));
    }
}

TEST_CASE("size distribution matches its closed form") {
    ParetoSpec spec;
    CHECK(pareto_cdf(spec, spec.min_value) > 0.0);
    CHECK(pareto_cdf(spec, spec.max_value) < 1.0);

    std::mt19937_64 rng(99);
    const int n = 100'000;
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i) {
        samples[i] = pareto_sample(rng, spec);
        REQUIRE(samples[i] >= spec.min_value);
        REQUIRE(samples[i] <= spec.max_value);
    }
    // Empirical truncated CDF against the analytic one at a few probes.
    const double lo = pareto_cdf(spec, spec.min_value);
    const double hi = pareto_cdf(spec, spec.max_value);
    for (double x : {0.6, 0.8, 1.0, 1.5, 2.5, 5.0, 8.0}) {
        double analytic = (pareto_cdf(spec, x) - lo) / (hi - lo);
        int below = 0;
        for (double s : samples)
            if (s <= x) ++below;
        double empirical = double(below) / n;
        CHECK(std::abs(empirical - analytic) < 0.01);
    }
}

TEST_CASE("exponential price traces match their closed form") {
    PriceConfig cfg;
    cfg.kind = PriceKind::Exponential;
    cfg.mean = 0.18;
    cfg.seed = 3;
    SpotPriceTrace trace = generate_prices(cfg, 100'000);
    REQUIRE(trace.prices.size() == 100'000);

    double sum = 0.0;
    int below_bid = 0;
    const Money bid = 280'000;
    for (Money m : trace.prices) {
        REQUIRE(m >= 0);
        sum += double(m) / kMoneyOne;
        if (m <= bid) ++below_bid;
    }
    double mean = sum / double(trace.prices.size());
    CHECK(std::abs(mean - 0.18) < 0.0018);
    double analytic = 1.0 - std::exp(-0.28 / 0.18);
    CHECK(std::abs(double(below_bid) / double(trace.prices.size()) - analytic) < 0.01);

    SpotPriceTrace again = generate_prices(cfg, 100'000);
    CHECK(trace.prices == again.prices);
}

TEST_CASE("constant price traces repeat one value") {
    PriceConfig cfg;
    cfg.kind = PriceKind::Constant;
    cfg.constant = 120'000;
    SpotPriceTrace trace = generate_prices(cfg, 48);
    REQUIRE(trace.prices.size() == 48);
    for (Money m : trace.prices) CHECK(m == 120'000);
    CHECK(trace.hour_sum(1, 12) == 12 * 120'000);
}

TEST_CASE("jobs survive a save and load round trip") {
    WorkloadConfig cfg;
    cfg.job_count = 50;
    std::vector<Job> jobs = generate_jobs(cfg);
    std::stringstream buf;
    save_jobs(jobs, buf);
    std::vector<Job> back = load_jobs(buf);
    REQUIRE(back.size() == jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        CHECK(back[i].id == jobs[i].id);
        CHECK(back[i].arrival == jobs[i].arrival);
        CHECK(back[i].deadline_slots == jobs[i].deadline_slots);
        CHECK(back[i].size == jobs[i].size);
        CHECK(back[i].parallel_limit == jobs[i].parallel_limit);
    }
}

TEST_CASE("job files report malformed lines by number") {
    std::stringstream ok("# header\n1 1 12 5 2  # inline note\n\n2 3 24 10 4\n");
    std::vector<Job> jobs = load_jobs(ok);
    REQUIRE(jobs.size() == 2);
    CHECK(jobs[1].arrival == 3);

    std::stringstream short_line("1 1 12 5 2\n2 1\n");
    CHECK_THROWS_WITH(load_jobs(short_line),
                      "job file line 2: expected 'id arrival deadline size parallel'");
    std::stringstream trailing("1 1 12 5 2 9\n");
    CHECK_THROWS_WITH(load_jobs(trailing), "job file line 1: trailing field '9'");
    std::stringstream infeasible("1 1 2 5 2\n");
    CHECK_THROWS_WITH(load_jobs(infeasible),
                      "job file line 1: job 1: infeasible, violates size <= parallel_limit * deadline");
}

TEST_CASE("price files round trip and report bad lines") {
    SpotPriceTrace trace;
    trace.prices = {0, 1, 250'000, 1'100'000};
    std::stringstream buf;
    save_prices(trace, buf);
    SpotPriceTrace back = load_prices(buf);
    CHECK(back.prices == trace.prices);

    std::stringstream bad("0.1\n0.2\nbad\n");
    CHECK_THROWS_WITH(load_prices(bad), "price file line 3: bad money literal: bad");
    std::stringstream negative("0.1\n-0.2\n");
    CHECK_THROWS_WITH(load_prices(negative), "price file line 2: negative price");
}

TEST_CASE("workload config validation guards its ranges") {
    WorkloadConfig cfg;
    cfg.job_count = 0;
    CHECK_THROWS_AS(validate_workload_config(cfg), std::invalid_argument);
    cfg = WorkloadConfig{};
    cfg.arrival_rate = 0.0;
    CHECK_THROWS_AS(validate_workload_config(cfg), std::invalid_argument);
    cfg = WorkloadConfig{};
    cfg.slack_max = 0.5;
    CHECK_THROWS_AS(validate_workload_config(cfg), std::invalid_argument);
    cfg = WorkloadConfig{};
    cfg.size_base = 0.1;
    CHECK_THROWS_AS(validate_workload_config(cfg), std::invalid_argument);
}

TEST_CASE("random helpers stay in range") {
    std::mt19937_64 rng(1);
    double total = 0.0;
    for (int i = 0; i < 20'000; ++i) {
        double u = uniform01(rng);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        total += poisson_sample(rng, 1.0);
    }
    CHECK(std::abs(total / 20'000 - 1.0) < 0.05);
}
