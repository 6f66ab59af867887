#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "engine.hpp"
#include "model.hpp"
#include "workload.hpp"

namespace cloudalloc {

/* Multiplicative-weights selection over a fixed policy set. Each arriving
 * job is assigned one policy drawn from the current weights; once the
 * longest possible deadline has elapsed the costs of every policy on that
 * job are known (by replaying it against the recorded prices), and the
 * weights take an exponential update with a step size that decays as
 * feedback accumulates. */
struct LearnerOptions {
    std::uint64_t seed = 7;
    double confidence = 0.05;  // failure probability in the regret bound
};

struct Resolution {
    Slot slot = 0;  // when the feedback became available
    std::int64_t job_id = 0;
    int chosen = 0;
    std::vector<double> normalized_costs;  // one entry per policy, in [0, 1]
    std::vector<double> weights;           // after this update
};

struct RegretReport {
    std::int64_t resolved = 0;
    int best_policy = 0;
    double regret = 0.0;  // average normalized cost gap to the best fixed policy
    double bound = 0.0;
};

class OnlineLearner : public EngineHooks {
  public:
    OnlineLearner(std::vector<PolicySpec> policies, const SpotPriceTrace& trace, EngineConfig engine_cfg,
                  Slot max_deadline_slots, LearnerOptions opt = {})
        : policies_(std::move(policies)),
          trace_(trace),
          cfg_(engine_cfg),
          dmax_(max_deadline_slots),
          opt_(opt),
          rng_(opt.seed) {
        if (policies_.empty()) throw std::invalid_argument("learner needs at least one policy");
        if (dmax_ < 1) throw std::invalid_argument("max deadline must be positive");
        weights_.assign(policies_.size(), 1.0 / static_cast<double>(policies_.size()));
    }

    /* Draws a policy for each arriving job and schedules its feedback for
     * the slot where any job arriving now would have to be finished. */
    PolicyChooser chooser() {
        return [this](const Job& job, int pool_free) {
            int k = draw();
            pending_.push_back(Pending{job, pool_free, k, job.arrival + dmax_});
            return PolicyChoice{k, policies_[k]};
        };
    }

    void after_arrivals(Slot t) override {
        while (head_ < pending_.size() && pending_[head_].resolve_slot <= t) {
            resolve(pending_[head_]);
            ++head_;
        }
    }

    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Resolution>& history() const { return history_; }
    const std::vector<PolicySpec>& policies() const { return policies_; }

    /* Normalized cost of one outcome, bounded by the on-demand price of the
     * job's whole allocation window. Spot hours billed past completion can
     * exceed the bound by a sliver; feedback is clamped into [0, 1]. */
    double normalized_cost(std::int64_t cost_scaled, const Job& job) const {
        const int len = cfg_.slots_per_hour();
        const std::int64_t hours = (job.deadline_slots + len - 1) / len;
        const double bound = static_cast<double>(cfg_.ondemand_price) *
                             static_cast<double>(job.parallel_limit) * static_cast<double>(hours) *
                             static_cast<double>(len);
        double c = static_cast<double>(cost_scaled) / bound;
        return std::min(1.0, std::max(0.0, c));
    }

    RegretReport regret() const {
        RegretReport rep;
        rep.resolved = static_cast<std::int64_t>(history_.size());
        if (rep.resolved == 0) return rep;
        const std::size_t n = policies_.size();
        std::vector<double> totals(n, 0.0);
        double chosen_total = 0.0;
        for (const Resolution& r : history_) {
            for (std::size_t k = 0; k < n; ++k) totals[k] += r.normalized_costs[k];
            chosen_total += r.normalized_costs[static_cast<std::size_t>(r.chosen)];
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k)
            if (totals[k] < totals[best]) best = k;
        rep.best_policy = static_cast<int>(best);
        rep.regret = (chosen_total - totals[best]) / static_cast<double>(rep.resolved);
        rep.bound = 9.0 * std::sqrt(2.0 * static_cast<double>(dmax_) *
                                    std::log(static_cast<double>(n) / opt_.confidence) /
                                    static_cast<double>(rep.resolved));
        return rep;
    }

  private:
    struct Pending {
        Job job;
        int pool_free = 0;
        int chosen = 0;
        Slot resolve_slot = 0;
    };

    int draw() {
        double u = uniform01(rng_);
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < weights_.size(); ++k) {
            acc += weights_[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(weights_.size()) - 1;
    }

    void resolve(const Pending& p) {
        const std::size_t n = policies_.size();
        Resolution r;
        r.slot = p.resolve_slot;
        r.job_id = p.job.id;
        r.chosen = p.chosen;
        r.normalized_costs.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            JobOutcome o = replay_job(p.job, policies_[k], trace_, p.pool_free, cfg_);
            r.normalized_costs[k] = normalized_cost(o.cost_scaled, p.job);
        }
        if (n > 1 && r.slot > dmax_) {
            double eta = std::sqrt(2.0 * std::log(static_cast<double>(n)) /
                                   (static_cast<double>(dmax_) * static_cast<double>(r.slot - dmax_)));
            double sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                weights_[k] *= std::exp(-eta * r.normalized_costs[k]);
                sum += weights_[k];
            }
            for (double& w : weights_) w /= sum;
        }
        r.weights = weights_;
        history_.push_back(std::move(r));
    }

    std::vector<PolicySpec> policies_;
    const SpotPriceTrace& trace_;
    EngineConfig cfg_;
    Slot dmax_;
    LearnerOptions opt_;
    std::mt19937_64 rng_;
    std::vector<double> weights_;
    std::vector<Pending> pending_;
    std::size_t head_ = 0;
    std::vector<Resolution> history_;
};

struct LearnOutcome {
    RunResult run;
    std::vector<Resolution> history;
    std::vector<double> final_weights;
    RegretReport report;
};

inline LearnOutcome run_learning(std::vector<Job> jobs, const SpotPriceTrace& trace,
                                 std::vector<PolicySpec> policies, const EngineConfig& cfg,
                                 LearnerOptions opt = {}) {
    Slot dmax = 1;
    for (const Job& j : jobs) dmax = std::max(dmax, j.deadline_slots);
    OnlineLearner learner(std::move(policies), trace, cfg, dmax, opt);
    LearnOutcome out;
    out.run = run_simulation(std::move(jobs), trace, learner.chooser(), cfg, &learner);
    out.history = learner.history();
    out.final_weights = learner.weights();
    out.report = learner.regret();
    return out;
}

}  // namespace cloudalloc
