#include <catch2/catch_amalgamated.hpp>

#include "cloudalloc/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace cloudalloc;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

ExperimentConfig tiny_config(const std::string& mode) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.threads = 2;
    cfg.workload.job_count = 40;
    cfg.workload.parallel_limit = 4;
    cfg.workload.size_base = 24.0;
    cfg.seeds = {1};
    cfg.selfowned_counts = {2};
    cfg.learn_jobs = 80;
    cfg.learn_seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("parameter grids have the published shape") {
    std::vector<Ratio> betas = beta_grid();
    REQUIRE(betas.size() == 13);
    CHECK(betas.front() == Ratio(0));
    CHECK(betas[6] == Ratio(1, 2));
    CHECK(betas.back() == Ratio(9999, 10000));

    std::vector<Money> bids = bid_grid();
    REQUIRE(bids.size() == 7);
    CHECK(bids.front() == 100'000);
    CHECK(bids[1] == 130'000);
    CHECK(bids.back() == 280'000);

    std::vector<Ratio> thetas = theta_grid();
    REQUIRE(thetas.size() == 11);
    CHECK(thetas.front() == Ratio(0));
    CHECK(thetas.back() == Ratio(1));
}

TEST_CASE("the reference preset pins the benchmark setup") {
    ExperimentConfig cfg;
    apply_config_key(cfg, "preset", "paper-v-a");
    CHECK(cfg.workload.job_count == 3000);
    CHECK(cfg.workload.arrival_rate == 1.0);
    CHECK(cfg.workload.size_base == 240.0);
    CHECK(cfg.workload.slack_max == 3.0);
    CHECK(cfg.workload.parallel_limit == 20);
    CHECK(cfg.prices.kind == PriceKind::Exponential);
    CHECK(cfg.prices.mean == 0.18);
    CHECK(cfg.engine.slot_minutes == 5);
    CHECK(cfg.engine.ondemand_price == 250'000);
    CHECK(cfg.engine.selfowned_price == 0);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(cfg.selfowned_counts == std::vector<int>{200, 400});
    CHECK(cfg.learn_jobs == 30000);
    CHECK(cfg.learn_seed == 101);
    CHECK(cfg.learn_confidence == 0.05);
    CHECK_THROWS_WITH(apply_config_key(cfg, "preset", "nope"), "unknown preset 'nope'");
}

TEST_CASE("config text applies keys and reports precise errors") {
    ExperimentConfig cfg;
    apply_config_text(cfg,
                      "# comment\n"
                      "mode = learn\n"
                      "\n"
                      "workload.jobs = 123\n"
                      "prices.kind = constant\n"
                      "prices.constant = 0.07\n"
                      "engine.release_on_completion = false\n"
                      "seeds = 4, 5, 6\n"
                      "selfowned.counts = 10,20\n",
                      "inline.cfg");
    CHECK(cfg.mode == "learn");
    CHECK(cfg.workload.job_count == 123);
    CHECK(cfg.prices.kind == PriceKind::Constant);
    CHECK(cfg.prices.constant == 70'000);
    CHECK_FALSE(cfg.engine.release_on_completion);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
    CHECK(cfg.selfowned_counts == std::vector<int>{10, 20});

    ExperimentConfig fresh;
    CHECK_THROWS_WITH(apply_config_text(fresh, "bogus = 1\n", "t.cfg"),
                      "t.cfg line 1: unknown config key 'bogus'");
    CHECK_THROWS_WITH(apply_config_text(fresh, "\nthreads = abc\n", "t.cfg"),
                      "t.cfg line 2: config key 'threads': expected integer, got 'abc'");
    CHECK_THROWS_WITH(apply_config_text(fresh, "workload.slack_max = soon\n", "t.cfg"),
                      "t.cfg line 1: config key 'workload.slack_max': expected number, got 'soon'");
    CHECK_THROWS_WITH(apply_config_text(fresh, "just words\n", "t.cfg"),
                      "t.cfg line 1: expected 'key = value'");
    CHECK_THROWS_WITH(apply_config_text(fresh, "mode = bogus\n", "t.cfg"),
                      "t.cfg line 1: config key 'mode': unknown mode 'bogus'");
    CHECK_THROWS_WITH(apply_config_text(fresh, "learn.confidence = 1.5\n", "t.cfg"),
                      "t.cfg line 1: config key 'learn.confidence': must lie in (0, 1)");
    CHECK_THROWS_WITH(apply_config_text(fresh, "engine.ondemand_price = cheap\n", "t.cfg"),
                      "t.cfg line 1: config key 'engine.ondemand_price': bad money literal: cheap");
}

TEST_CASE("the configuration echo round trips byte for byte") {
    ExperimentConfig cfg;
    apply_config_key(cfg, "preset", "paper-v-a");
    cfg.mode = "sweep-selfowned";
    cfg.threads = 3;
    cfg.engine.selfowned_price = 12'500;
    std::string echo = config_echo(cfg);

    ExperimentConfig back;
    apply_config_text(back, echo, "echo");
    CHECK(config_echo(back) == echo);

    std::string manifest = manifest_text(cfg);
    CHECK(manifest.rfind("# cloudalloc 1.0 run manifest", 0) == 0);
    ExperimentConfig from_manifest;
    apply_config_text(from_manifest, manifest, "manifest");
    CHECK(config_echo(from_manifest) == echo);
}

TEST_CASE("scenarios derive from the run seed deterministically") {
    ExperimentConfig cfg = tiny_config("sweep-spot");
    SeedScenario a = make_scenario(cfg, 7, 40);
    SeedScenario b = make_scenario(cfg, 7, 40);
    REQUIRE(a.jobs.size() == 40);
    CHECK(a.jobs.size() == b.jobs.size());
    CHECK(a.trace.prices == b.trace.prices);
    for (std::size_t i = 0; i < a.jobs.size(); ++i) CHECK(a.jobs[i].size == b.jobs[i].size);

    SeedScenario c = make_scenario(cfg, 8, 40);
    bool differs = c.trace.prices != a.trace.prices;
    for (std::size_t i = 0; i < std::min(a.jobs.size(), c.jobs.size()); ++i)
        differs = differs || a.jobs[i].size != c.jobs[i].size;
    CHECK(differs);

    // The trace is long enough for every job's hour aligned window.
    Slot needed = required_trace_length(a.jobs, 12);
    CHECK(static_cast<Slot>(a.trace.prices.size()) == needed);
    for (const Job& j : a.jobs) {
        Slot hours = (j.deadline_slots + 11) / 12;
        CHECK(j.arrival + hours * 12 - 1 <= needed);
    }
}

TEST_CASE("policy evaluation pools totals across scenarios") {
    ExperimentConfig cfg = tiny_config("sweep-spot");
    cfg.seeds = {1, 2};
    std::vector<SeedScenario> scenarios;
    for (std::uint64_t s : cfg.seeds) scenarios.push_back(make_scenario(cfg, s, 30));

    PolicySpec spec = detail::adaptive_spec(Ratio(1, 2), 190'000);
    RunTotals pooled = detail::evaluate_policy(spec, scenarios, cfg.engine);

    RunTotals manual;
    manual.slots_per_hour = 12;
    PolicyChooser fixed = [&](const Job&, int) { return PolicyChoice{0, spec}; };
    for (const SeedScenario& sc : scenarios) {
        RunResult r = run_simulation(sc.jobs, sc.trace, fixed, cfg.engine);
        manual.cost_scaled += r.totals.cost_scaled;
        manual.completed_work += r.totals.completed_work;
        manual.horizon_end += r.totals.horizon_end;
    }
    CHECK(pooled.cost_scaled == manual.cost_scaled);
    CHECK(pooled.completed_work == manual.completed_work);
    CHECK(pooled.horizon_end == manual.horizon_end);
    CHECK(pooled.completed_jobs + pooled.incomplete_jobs == 60);
}

TEST_CASE("the spot sweep covers both families and calibrates per bid") {
    ExperimentConfig cfg = tiny_config("sweep-spot");
    SpotSweepResult r = sweep_spot(cfg);
    REQUIRE(r.adaptive_rows.size() == 13 * 7);
    REQUIRE(r.theta_rows.size() == 11 * 7);
    for (const PolicyRow& row : r.adaptive_rows) CHECK(row.family == "adaptive");
    for (const PolicyRow& row : r.theta_rows) CHECK(row.family == "theta");

    // The calibration entry per bid carries that bid's minimal alpha.
    for (Money bid : bid_grid()) {
        Ratio star = r.calibration.at(bid);
        double best = 1e300;
        double star_alpha = 1e300;
        for (const PolicyRow& row : r.adaptive_rows) {
            if (row.bid != bid || row.completed_work == 0) continue;
            best = std::min(best, row.alpha);
            if (*row.beta == star) star_alpha = row.alpha;
        }
        CHECK(star_alpha == best);
    }

    double best_adaptive = 1e300;
    for (const PolicyRow& row : r.adaptive_rows)
        if (row.completed_work > 0) best_adaptive = std::min(best_adaptive, row.alpha);
    CHECK(r.best_adaptive_alpha == best_adaptive);
    CHECK(r.rho == Catch::Approx(1.0 - r.best_adaptive_alpha / r.best_theta_alpha));
    CHECK_THROWS_AS(r.calibration.at(999), std::invalid_argument);
}

TEST_CASE("the self owned sweep sizes pools against the greedy baseline") {
    ExperimentConfig cfg = tiny_config("sweep-selfowned");
    SelfownedSweepResult r = sweep_selfowned(cfg);
    REQUIRE(r.levels.size() == 1);
    const SelfownedLevel& lvl = r.levels[0];
    CHECK(lvl.selfowned_count == 2);
    CHECK(lvl.planned_rows.size() == 13 * 7);
    CHECK(lvl.greedy_rows.size() == 7);
    for (const PolicyRow& row : lvl.planned_rows) {
        CHECK(row.family == "planned-self");
        CHECK(row.selfowned_count == 2);
        CHECK(row.beta0.has_value());
    }
    for (const PolicyRow& row : lvl.greedy_rows) CHECK(row.family == "greedy-self");
    CHECK(lvl.rho == Catch::Approx(1.0 - lvl.best_planned_alpha / lvl.best_greedy_alpha));
}

TEST_CASE("csv emitters are stable and self describing") {
    PolicyRow a;
    a.family = "theta";
    a.bid = 130'000;
    a.theta = Ratio(3, 10);
    a.alpha = 0.012345678;
    PolicyRow b;
    b.family = "adaptive";
    b.bid = 100'000;
    b.beta = Ratio(1, 2);
    PolicyRow c;
    c.family = "adaptive";
    c.bid = 100'000;
    c.beta = Ratio(0);

    std::string csv = policies_csv({a, b, c});
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line ==
          "family,selfowned,bid,beta,beta0,theta,alpha,cost,completed_work,processed_work,"
          "completed_jobs,incomplete_jobs,gamma,spot_hourly");
    std::getline(lines, line);
    CHECK(line.rfind("adaptive,0,0.1,0,", 0) == 0);  // beta 0 sorts before beta 1/2
    std::getline(lines, line);
    CHECK(line.rfind("adaptive,0,0.1,1/2,", 0) == 0);
    std::getline(lines, line);
    CHECK(line.rfind("theta,0,0.13,,,3/10,0.012346,", 0) == 0);

    std::string rho = rho_csv({{"sweep-spot", 0, 0.5, 1.0, 0.5}});
    CHECK(rho ==
          "experiment,selfowned,ours_alpha,baseline_alpha,rho\n"
          "sweep-spot,0,0.500000,1.000000,0.500000\n");

    Resolution res;
    res.slot = 13;
    res.job_id = 1;
    res.chosen = 1;
    res.normalized_costs = {1.0, 0.4};
    res.weights = {0.45, 0.55};
    std::string weights = weights_csv({res}, 2);
    CHECK(weights ==
          "slot,job_id,chosen,cost_chosen,argmin,w0,w1\n"
          "13,1,1,0.400000,1,0.450000,0.550000\n");
}

TEST_CASE("experiment runs write their outputs under the target directory") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cloudalloc_exp_test";
    fs::remove_all(dir);

    ExperimentConfig cfg = tiny_config("sweep-spot");
    cfg.out_dir = (dir / "spot").string();
    std::ostringstream log;
    run_experiment(cfg, log);
    CHECK(log.str().rfind("sweep-spot: best adaptive alpha", 0) == 0);

    std::string manifest = slurp(dir / "spot" / "manifest.txt");
    ExperimentConfig back;
    apply_config_text(back, manifest, "manifest.txt");
    CHECK(config_echo(back) == config_echo(cfg));

    std::string policies = slurp(dir / "spot" / "policies.csv");
    CHECK(line_count(policies) == 1 + 13 * 7 + 11 * 7);
    std::string rho = slurp(dir / "spot" / "rho.csv");
    CHECK(line_count(rho) == 2);
    CHECK(rho.rfind("experiment,", 0) == 0);
    CHECK_FALSE(fs::exists(dir / "spot" / "weights.csv"));

    ExperimentConfig learn_cfg = tiny_config("learn");
    learn_cfg.out_dir = (dir / "learn").string();
    std::ostringstream learn_log;
    run_experiment(learn_cfg, learn_log);
    CHECK(learn_log.str().rfind("learn: learner alpha", 0) == 0);
    std::string weights = slurp(dir / "learn" / "weights.csv");
    CHECK(weights.rfind("slot,job_id,chosen,cost_chosen,argmin,w0,w1,w2,w3,w4,w5,w6", 0) == 0);
    std::string learn_rho = slurp(dir / "learn" / "rho.csv");
    CHECK(learn_rho.find("learn,0,") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("learn mode mixes one calibrated policy per bid") {
    ExperimentConfig cfg = tiny_config("learn");
    LearnResult r = run_learn(cfg);
    REQUIRE(r.grid.size() == 7);
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
        CHECK(r.grid[i].bid == r.calibration.bids[i]);
        CHECK(r.grid[i].beta == r.calibration.beta_star[i]);
        CHECK(r.grid[i].spot_mode == PolicySpec::Spot::Adaptive);
    }
    CHECK(r.fixed_rows.size() == 7);
    CHECK(r.theta_rows.size() == 77);
    CHECK(r.learner_totals.completed_jobs + r.learner_totals.incomplete_jobs == cfg.learn_jobs);
    CHECK(r.regret.resolved > 0);
    CHECK(r.regret.resolved <= cfg.learn_jobs);
    CHECK(r.rho_bar == Catch::Approx(1.0 - r.learner_alpha / r.best_theta_alpha));
    CHECK(r.fixed_ratio == Catch::Approx(r.learner_alpha / r.best_fixed_alpha));
    REQUIRE(r.final_weights.size() == 7);
    double sum = 0.0;
    for (double w : r.final_weights) sum += w;
    CHECK(sum == Catch::Approx(1.0));
}
