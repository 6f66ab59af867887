#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "money.hpp"
#include "policy.hpp"

namespace cloudalloc {

struct EngineConfig {
    int slot_minutes = 5;          // slots_per_hour = 60 / slot_minutes
    Money ondemand_price = 250000; // per instance-hour
    Money selfowned_price = 0;     // per instance-hour actually used
    int selfowned_count = 0;       // pool capacity R
    bool release_on_completion = true;  // hand reserved tail back when a job finishes early

    int slots_per_hour() const {
        if (slot_minutes < 1 || 60 % slot_minutes != 0)
            throw std::invalid_argument("slot_minutes must divide 60");
        return 60 / slot_minutes;
    }
};

/* How one job is driven. Adaptive is the cost-aware policy; FixedFraction
 * reproduces the constant theta split baseline. rescue controls whether the
 * engine falls back to the pure on-demand endgame when spot flexibility is
 * lost; the adaptive policy requires it, the baseline historically ran
 * without it and may leave jobs unfinished. */
struct PolicySpec {
    enum class Spot { Adaptive, FixedFraction };
    enum class SelfOwned { None, Planned, Greedy };

    Spot spot_mode = Spot::Adaptive;
    SelfOwned selfowned_mode = SelfOwned::None;
    Ratio beta{0, 1};
    Ratio beta0{0, 1};
    Ratio theta{0, 1};
    Money bid = 100000;
    bool rescue = true;
};

struct PolicyChoice {
    int index = 0;
    PolicySpec spec;
};

using PolicyChooser = std::function<PolicyChoice(const Job&, int pool_free)>;

struct EngineHooks {
    virtual ~EngineHooks() = default;
    /* Called once per slot after arrivals were assigned their policies. */
    virtual void after_arrivals(Slot) {}
};

struct JobOutcome {
    std::int64_t id = 0;
    int policy_index = 0;
    bool completed = false;
    Slot completion_slot = 0;
    int selfowned = 0;
    int pool_free_at_arrival = 0;
    std::int64_t selfowned_work = 0;
    std::int64_t spot_work = 0;
    std::int64_t ondemand_work = 0;
    std::int64_t ondemand_hours = 0;
    std::int64_t spot_cost_scaled = 0;  // micro money times slots_per_hour
    std::int64_t cost_scaled = 0;       // full job cost, same scale
    std::vector<UpdateRecord> records;
};

struct RunTotals {
    std::int64_t cost_scaled = 0;
    std::int64_t completed_work = 0;
    std::int64_t completed_jobs = 0;
    std::int64_t incomplete_jobs = 0;
    std::int64_t spot_cost_scaled = 0;
    std::int64_t spot_work = 0;
    std::int64_t ondemand_work = 0;
    std::int64_t ondemand_hours = 0;
    std::int64_t selfowned_work = 0;
    Slot horizon_end = 0;
    int slots_per_hour = 1;
    int selfowned_count = 0;

    double total_cost() const {
        return static_cast<double>(cost_scaled) / (static_cast<double>(kMoneyOne) * slots_per_hour);
    }
    std::int64_t processed_work() const { return selfowned_work + spot_work + ondemand_work; }
    /* Money spent per instance-slot of completed work. Jobs left unfinished
     * by a rescue-less policy still contribute their cost to the numerator
     * but earn no credit, so abandoning work is never rewarded. */
    std::optional<double> alpha() const {
        if (completed_work == 0) return std::nullopt;
        return total_cost() / static_cast<double>(completed_work);
    }
    /* Fraction of the self-owned capacity that did useful work. */
    std::optional<double> gamma() const {
        if (selfowned_count == 0 || horizon_end == 0) return std::nullopt;
        return static_cast<double>(selfowned_work) /
               (static_cast<double>(selfowned_count) * static_cast<double>(horizon_end));
    }
    /* Average price paid per instance-slot processed on spot; zero when no
     * spot work ran. */
    double spot_unit_cost() const {
        if (spot_work == 0) return 0.0;
        return static_cast<double>(spot_cost_scaled) /
               (static_cast<double>(kMoneyOne) * slots_per_hour * static_cast<double>(spot_work));
    }
    /* Same, expressed per instance-hour for comparison with hourly rates. */
    double spot_hourly_cost() const { return spot_unit_cost() * slots_per_hour; }
};

struct RunResult {
    std::vector<JobOutcome> outcomes;  // ordered by job id
    RunTotals totals;
};

namespace detail {

struct OndemandBlock {
    int count = 0;
    Slot from = 0;
    Slot to = 0;
};

/* Pure on-demand plan installed when flexibility runs out: extra instances
 * on the partial leading interval, full effective parallelism afterwards. */
struct EndgamePlan {
    Slot start = 0;       // first covered slot
    Slot full_start = 0;  // first slot of the trailing full hours
    Slot deadline = 0;
    int partial_base = 0;  // instances on [start, full_start)
    int topup = 0;         // extra instances on the sub-interval not covered by paid blocks
    Slot topup_from = 0;
    Slot topup_to = -1;
    int full_count = 0;  // instances on [full_start, deadline]

    int target(Slot t) const {
        if (t < start || t > deadline) return 0;
        if (t >= full_start) return full_count;
        int n = partial_base;
        if (t >= topup_from && t <= topup_to) n += topup;
        return n;
    }
};

struct LiveJob {
    Job job;
    PolicySpec spec;
    int policy_index = 0;
    int pool_free_at_arrival = 0;

    int selfowned = 0;
    int effective_parallel = 0;  // parallel_limit - selfowned
    std::int64_t work_left = 0;

    bool self_sufficient = false;  // self-owned covers everything, no updates
    int update_index = 0;
    Slot hour_start = 0;
    bool update_open = false;
    int spot_bid_count = 0;
    bool spot_held = false;

    std::vector<OndemandBlock> ondemand;  // paid hourly blocks
    bool endgame = false;
    EndgamePlan plan;

    std::int64_t selfowned_work = 0;
    std::int64_t spot_work = 0;
    std::int64_t ondemand_work = 0;
    std::int64_t ondemand_hours = 0;
    std::int64_t spot_cost_scaled = 0;
    std::vector<UpdateRecord> records;

    Slot deadline() const { return job.last_slot(); }
    int paid_ondemand_at(Slot t) const {
        int n = 0;
        for (const OndemandBlock& b : ondemand)
            if (t >= b.from && t <= b.to) n += b.count;
        return n;
    }
};

}  // namespace detail

class Engine {
  public:
    Engine(std::vector<Job> jobs, const SpotPriceTrace& trace, EngineConfig cfg)
        : jobs_(std::move(jobs)), trace_(trace), cfg_(cfg), len_(cfg.slots_per_hour()) {
        for (const Job& j : jobs_) validate_job(j);
        for (const Job& j : jobs_) {
            horizon_end_ = std::max(horizon_end_, j.last_slot());
            Slot hours = (j.deadline_slots + len_ - 1) / len_;
            trace_needed_ = std::max(trace_needed_, j.arrival + hours * len_ - 1);
        }
        if (trace_.length() < trace_needed_)
            throw std::runtime_error("price trace too short: need " + std::to_string(trace_needed_) +
                                     " slots, have " + std::to_string(trace_.length()));
        order_.resize(jobs_.size());
        for (std::size_t i = 0; i < jobs_.size(); ++i) order_[i] = i;
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            if (jobs_[a].arrival != jobs_[b].arrival) return jobs_[a].arrival < jobs_[b].arrival;
            return jobs_[a].id < jobs_[b].id;
        });
    }

    RunResult run(const PolicyChooser& chooser, EngineHooks* hooks = nullptr) {
        SelfOwnedPool pool(cfg_.selfowned_count, horizon_end_);
        std::vector<detail::LiveJob> live;
        std::vector<JobOutcome> outcomes(jobs_.size());
        std::size_t next_arrival = 0;

        for (Slot t = 1; t <= horizon_end_; ++t) {
            while (next_arrival < order_.size() && jobs_[order_[next_arrival]].arrival == t) {
                admit(jobs_[order_[next_arrival]], t, pool, chooser, live);
                ++next_arrival;
            }
            if (hooks) hooks->after_arrivals(t);

            for (std::size_t k = 0; k < live.size();) {
                if (step_job(live[k], t, pool, outcomes)) {
                    live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
                } else {
                    ++k;
                }
            }
        }
        if (!live.empty()) throw std::logic_error("jobs alive past the horizon: engine bug");

        RunResult result;
        result.outcomes = std::move(outcomes);
        result.totals.horizon_end = horizon_end_;
        result.totals.slots_per_hour = len_;
        result.totals.selfowned_count = cfg_.selfowned_count;
        for (const JobOutcome& o : result.outcomes) {
            result.totals.cost_scaled += o.cost_scaled;
            result.totals.spot_cost_scaled += o.spot_cost_scaled;
            result.totals.spot_work += o.spot_work;
            result.totals.ondemand_work += o.ondemand_work;
            result.totals.ondemand_hours += o.ondemand_hours;
            result.totals.selfowned_work += o.selfowned_work;
            if (o.completed) {
                ++result.totals.completed_jobs;
                result.totals.completed_work += find_job(o.id).size;
            } else {
                ++result.totals.incomplete_jobs;
            }
        }
        return result;
    }

    Slot horizon_end() const { return horizon_end_; }
    Slot trace_needed() const { return trace_needed_; }

  private:
    const Job& find_job(std::int64_t id) const {
        for (const Job& j : jobs_)
            if (j.id == id) return j;
        throw std::logic_error("unknown job id");
    }

    void admit(const Job& job, Slot t, SelfOwnedPool& pool, const PolicyChooser& chooser,
               std::vector<detail::LiveJob>& live) {
        int pool_free = cfg_.selfowned_count > 0 ? pool.min_free(t, job.last_slot()) : 0;
        PolicyChoice choice = chooser(job, pool_free);
        validate_policy_spec(choice.spec);

        detail::LiveJob s;
        s.job = job;
        s.spec = choice.spec;
        s.policy_index = choice.index;
        s.pool_free_at_arrival = pool_free;
        s.work_left = job.size;

        switch (choice.spec.selfowned_mode) {
            case PolicySpec::SelfOwned::None:
                s.selfowned = 0;
                break;
            case PolicySpec::SelfOwned::Planned:
                s.selfowned = selfowned_allocation(job.size, job.deadline_slots, job.parallel_limit,
                                                   choice.spec.beta0, pool_free, len_);
                break;
            case PolicySpec::SelfOwned::Greedy:
                s.selfowned = intuitive_selfowned(job.size, job.deadline_slots, job.parallel_limit, pool_free);
                break;
        }
        if (s.selfowned > 0) pool.reserve(t, job.last_slot(), s.selfowned);
        s.effective_parallel = job.parallel_limit - s.selfowned;
        if (s.work_left - static_cast<std::int64_t>(s.selfowned) * job.deadline_slots <= 0 ||
            s.effective_parallel == 0)
            s.self_sufficient = true;
        live.push_back(std::move(s));
    }

    static void validate_policy_spec(const PolicySpec& spec) {
        if (spec.beta < Ratio(0) || spec.beta >= Ratio(1)) throw std::invalid_argument("beta must lie in [0, 1)");
        if (spec.beta0 < Ratio(0) || spec.beta0 >= Ratio(1))
            throw std::invalid_argument("beta0 must lie in [0, 1)");
        if (spec.theta < Ratio(0) || spec.theta > Ratio(1))
            throw std::invalid_argument("theta must lie in [0, 1]");
        if (spec.bid <= 0) throw std::invalid_argument("bid must be positive");
        if (spec.spot_mode == PolicySpec::Spot::Adaptive && !spec.rescue)
            throw std::invalid_argument("the adaptive policy requires the endgame rescue");
    }

    /* Work remaining for spot and on-demand after the self-owned share that
     * is guaranteed between slot t and the deadline. */
    static std::int64_t reduced_work(const detail::LiveJob& s, Slot t) {
        return s.work_left - static_cast<std::int64_t>(s.selfowned) * (s.deadline() - t + 1);
    }

    void close_update(detail::LiveJob& s, bool held_to_hour_end) {
        if (!s.update_open) return;
        UpdateRecord& rec = s.records.back();
        if (held_to_hour_end && s.spot_bid_count > 0) {
            rec.charge = SpotChargeClass::FullHour;
            rec.spot_charge_scaled =
                static_cast<std::int64_t>(s.spot_bid_count) * trace_.hour_sum(s.hour_start, len_);
            s.spot_cost_scaled += rec.spot_charge_scaled;
        }
        s.update_open = false;
    }

    void begin_update(detail::LiveJob& s, Slot t) {
        close_update(s, s.spot_held);
        s.spot_held = false;
        s.spot_bid_count = 0;
        s.update_index = static_cast<int>((t - s.job.arrival) / len_) + 1;
        s.hour_start = t;

        std::int64_t reduced = reduced_work(s, t);
        if (reduced <= 0 || s.effective_parallel <= 0) {
            s.self_sufficient = true;  // the reserved share finishes the job on its own
            return;
        }
        Slot window = s.deadline() - t + 1;
        if (s.spec.rescue && s.work_left > window * s.job.parallel_limit)
            throw std::logic_error("job behind schedule at an update: engine bug");

        SplitDecision split = s.spec.spot_mode == PolicySpec::Spot::Adaptive
                                  ? flexible_split(reduced, window, s.effective_parallel, s.spec.beta, len_)
                                  : fixed_fraction_split(s.spec.theta, s.effective_parallel);

        UpdateRecord rec;
        rec.index = s.update_index;
        rec.hour_start = t;
        rec.spot_requested = split.spot;
        rec.ondemand_bought = split.ondemand;
        s.records.push_back(rec);
        s.update_open = true;

        if (split.ondemand > 0) {
            s.ondemand.push_back({split.ondemand, t, t + len_ - 1});
            s.ondemand_hours += split.ondemand;
        }
        s.spot_bid_count = split.spot;
        if (split.spot > 0) {
            s.spot_held = trace_.at(t) <= s.spec.bid;
            if (!s.spot_held) {
                s.records.back().slots_until_interrupt = 0;
                on_spot_loss(s, t);
            }
        }
    }

    /* Spot capacity disappeared at slot t (interrupted after running through
     * t-1, or never obtained at the hour start). Decide between waiting for
     * the next update and installing the on-demand endgame. */
    void on_spot_loss(detail::LiveJob& s, Slot t) {
        if (!s.spec.rescue || s.endgame) return;
        Slot next_boundary = s.hour_start + len_;
        std::int64_t until_boundary = 0;
        for (Slot u = t; u < next_boundary && u <= s.deadline(); ++u)
            until_boundary += s.selfowned + s.paid_ondemand_at(u);
        std::int64_t projected = s.work_left - until_boundary;
        if (projected <= 0) return;  // finishes this hour on paid capacity
        if (has_spot_flexibility(s.job.deadline_slots, s.job.parallel_limit, projected, s.update_index, len_))
            return;
        install_endgame(s, t);
    }

    void install_endgame(detail::LiveJob& s, Slot t) {
        const Slot loss_slot = t - 1;
        const Slot deadline = s.deadline();
        const int avail = s.effective_parallel;
        std::int64_t need = s.work_left - static_cast<std::int64_t>(s.selfowned) * (deadline - loss_slot);
        if (need <= 0) throw std::logic_error("endgame installed for a self-sufficient job: engine bug");

        detail::EndgamePlan& plan = s.plan;
        plan.start = t;
        plan.deadline = deadline;
        int full_hours = static_cast<int>((deadline - loss_slot) / len_);
        plan.full_start = deadline + 1 - static_cast<Slot>(full_hours) * len_;
        plan.full_count = avail;
        const Slot partial_len = plan.full_start - t;

        std::int64_t committed = 0;
        int running = 0;
        for (Slot u = t; u < plan.full_start; ++u) {
            int paid = s.paid_ondemand_at(u);
            committed += paid;
            running = std::max(running, paid);
        }
        std::int64_t uncovered =
            need - committed - static_cast<std::int64_t>(full_hours) * avail * len_;
        std::int64_t wanted =
            partial_len > 0 && uncovered > 0 ? (uncovered + partial_len - 1) / partial_len : 0;

        std::int64_t topup_hours = 0;
        if (wanted <= avail - running) {
            EndgameSchedule sched =
                endgame_schedule(need, committed, loss_slot, deadline, avail, running, len_);
            plan.partial_base = sched.partial_extra;
        } else {
            /* The hour's paid block expires before the trailing full hours
             * begin, so a uniform extra count cannot reach the target; max
             * it out and buy the rest on the uncovered tail. */
            plan.partial_base = avail - running;
            std::int64_t shortfall = uncovered - static_cast<std::int64_t>(plan.partial_base) * partial_len;
            Slot gap_from = 0, gap_to = -1;
            for (Slot u = t; u < plan.full_start; ++u) {
                if (s.paid_ondemand_at(u) == 0) {
                    if (gap_from == 0) gap_from = u;
                    gap_to = u;
                }
            }
            std::int64_t gap_len = gap_to - gap_from + 1;
            if (shortfall > 0) {
                if (gap_len <= 0) throw std::logic_error("endgame short of capacity: engine bug");
                std::int64_t extra = (shortfall + gap_len - 1) / gap_len;
                if (extra > running) throw std::logic_error("endgame short of capacity: engine bug");
                plan.topup = static_cast<int>(extra);
                plan.topup_from = gap_from;
                plan.topup_to = gap_to;
                topup_hours = extra;
            }
        }
        s.ondemand_hours += plan.partial_base + topup_hours +
                            static_cast<std::int64_t>(full_hours) * avail;

        std::int64_t capacity = 0;
        for (Slot u = t; u <= deadline; ++u)
            capacity += std::min<std::int64_t>(avail, s.paid_ondemand_at(u) + plan.target(u));
        if (capacity < need) throw std::logic_error("endgame short of capacity: engine bug");
        s.endgame = true;
    }

    /* Advances one job through slot t. Returns true when it leaves the
     * system (completed, or unfinished at its deadline for rescue-less
     * baselines). */
    bool step_job(detail::LiveJob& s, Slot t, SelfOwnedPool& pool, std::vector<JobOutcome>& outcomes) {
        const Slot deadline = s.deadline();
        if (t > deadline) throw std::logic_error("job alive past its deadline: engine bug");

        if (!s.self_sufficient && !s.endgame) {
            if ((t - s.job.arrival) % len_ == 0) {
                begin_update(s, t);
            } else if (s.spot_held && trace_.at(t) > s.spec.bid) {
                s.spot_held = false;
                s.records.back().slots_until_interrupt = static_cast<int>(t - s.hour_start);
                on_spot_loss(s, t);
            }
        }

        int self_cap = s.selfowned;
        int spot_cap = s.spot_held ? s.spot_bid_count : 0;
        int od_cap = s.paid_ondemand_at(t);
        if (s.endgame) od_cap = std::min(od_cap + s.plan.target(t), s.effective_parallel);

        std::int64_t used_self = std::min<std::int64_t>(s.work_left, self_cap);
        s.work_left -= used_self;
        std::int64_t used_spot = std::min<std::int64_t>(s.work_left, spot_cap);
        s.work_left -= used_spot;
        std::int64_t used_od = std::min<std::int64_t>(s.work_left, od_cap);
        s.work_left -= used_od;
        if (used_self + used_spot + used_od > s.job.parallel_limit)
            throw std::logic_error("per-slot parallelism exceeded: engine bug");

        s.selfowned_work += used_self;
        s.spot_work += used_spot;
        s.ondemand_work += used_od;
        if (s.update_open) s.records.back().spot_work += used_spot;

        if (s.work_left == 0) {
            finish(s, t, true, pool, outcomes);
            return true;
        }
        if (t == deadline) {
            if (s.spec.rescue) throw std::logic_error("deadline violated: engine bug");
            finish(s, t, false, pool, outcomes);
            return true;
        }
        return false;
    }

    void finish(detail::LiveJob& s, Slot t, bool completed, SelfOwnedPool& pool,
                std::vector<JobOutcome>& outcomes) {
        if (s.update_open) {
            UpdateRecord& rec = s.records.back();
            if (s.spot_held) {
                /* The tenant terminates held spot instances; the partial
                 * hour is billed like a full one. */
                rec.charge = SpotChargeClass::RanToCompletion;
                rec.slots_until_completion = static_cast<int>(t - s.hour_start + 1);
                rec.spot_charge_scaled =
                    static_cast<std::int64_t>(s.spot_bid_count) * trace_.hour_sum(s.hour_start, len_);
                s.spot_cost_scaled += rec.spot_charge_scaled;
            }
            s.update_open = false;
        }
        if (completed && cfg_.release_on_completion && s.selfowned > 0 && t < s.deadline())
            pool.release(t + 1, s.deadline(), s.selfowned);

        JobOutcome out;
        out.id = s.job.id;
        out.policy_index = s.policy_index;
        out.completed = completed;
        out.completion_slot = completed ? t : 0;
        out.selfowned = s.selfowned;
        out.pool_free_at_arrival = s.pool_free_at_arrival;
        out.selfowned_work = s.selfowned_work;
        out.spot_work = s.spot_work;
        out.ondemand_work = s.ondemand_work;
        out.ondemand_hours = s.ondemand_hours;
        out.spot_cost_scaled = s.spot_cost_scaled;
        out.cost_scaled = s.spot_cost_scaled + s.ondemand_hours * cfg_.ondemand_price * len_ +
                          s.selfowned_work * cfg_.selfowned_price;
        out.records = std::move(s.records);

        std::size_t pos = 0;
        while (pos < jobs_.size() && jobs_[pos].id != s.job.id) ++pos;
        if (pos == jobs_.size()) throw std::logic_error("finished job unknown to engine");
        outcomes[pos] = std::move(out);
    }

    std::vector<Job> jobs_;
    const SpotPriceTrace& trace_;
    EngineConfig cfg_;
    int len_;
    Slot horizon_end_ = 0;
    Slot trace_needed_ = 0;
    std::vector<std::size_t> order_;
};

inline RunResult run_simulation(std::vector<Job> jobs, const SpotPriceTrace& trace,
                                const PolicyChooser& chooser, const EngineConfig& cfg,
                                EngineHooks* hooks = nullptr) {
    Engine engine(std::move(jobs), trace, cfg);
    return engine.run(chooser, hooks);
}

/* Replays one job in isolation against the recorded price window, with the
 * pool frozen at the capacity the job saw at arrival. Used to evaluate what
 * any policy would have paid for the same job. The trace is sliced to the
 * job's own hour-aligned window so replay cost does not grow with the
 * arrival slot; reported slots are mapped back to trace coordinates. */
inline JobOutcome replay_job(const Job& job, const PolicySpec& spec, const SpotPriceTrace& trace,
                             int pool_free_at_arrival, EngineConfig cfg) {
    validate_job(job);
    const int len = cfg.slots_per_hour();
    const Slot hours = (job.deadline_slots + len - 1) / len;
    const Slot first = job.arrival;
    const Slot last = job.arrival + hours * len - 1;
    if (trace.length() < last)
        throw std::runtime_error("price trace too short: need " + std::to_string(last) + " slots, have " +
                                 std::to_string(trace.length()));
    SpotPriceTrace window;
    window.prices.assign(trace.prices.begin() + (first - 1), trace.prices.begin() + last);

    Job shifted = job;
    shifted.arrival = 1;
    cfg.selfowned_count = std::max(pool_free_at_arrival, 0);
    PolicyChooser fixed = [&](const Job&, int) { return PolicyChoice{0, spec}; };
    RunResult r = run_simulation({shifted}, window, fixed, cfg);

    JobOutcome out = std::move(r.outcomes.at(0));
    const Slot offset = first - 1;
    if (out.completed) out.completion_slot += offset;
    for (UpdateRecord& rec : out.records) rec.hour_start += offset;
    return out;
}

}  // namespace cloudalloc
