#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <cloudalloc/experiment.hpp>

int main(int argc, char** argv) {
    CLI::App app{"cloud instance allocation: policy sweeps and online learning"};

    std::string config_path;
    std::string mode;
    std::string out_dir;
    std::string preset;
    std::uint64_t seed = 0;
    std::int64_t jobs = 0;

    app.add_option("--config", config_path, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--mode", mode, "sweep-spot | sweep-selfowned | learn");
    app.add_option("--seed", seed, "use a single seed for workload and learner");
    app.add_option("--jobs", jobs, "job count for the selected mode");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--preset", preset, "named configuration preset (paper-v-a)");

    CLI11_PARSE(app, argc, argv);

    try {
        cloudalloc::ExperimentConfig cfg;
        if (!preset.empty()) cloudalloc::apply_preset(cfg, preset);
        if (!config_path.empty()) cloudalloc::apply_config_file(cfg, config_path);
        if (!mode.empty()) cloudalloc::apply_config_key(cfg, "mode", mode);
        if (app.count("--seed") > 0) {
            cfg.seeds = {seed};
            cfg.learn_seed = seed;
        }
        if (app.count("--jobs") > 0) {
            if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
            cfg.workload.job_count = jobs;
            cfg.learn_jobs = jobs;
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        cloudalloc::run_experiment(cfg, std::cout);
        std::cout << "wrote " << cfg.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
