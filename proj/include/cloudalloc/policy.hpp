#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>

#include "model.hpp"
#include "rational.hpp"

namespace cloudalloc {

/* Number of whole allocation hours that fit in the window before the last,
 * possibly partial, hour. */
inline int leading_full_hours(Slot deadline_slots, int slots_per_hour) {
    if (deadline_slots < 1) throw std::invalid_argument("window must be >= 1 slot");
    return static_cast<int>((deadline_slots + slots_per_hour - 1) / slots_per_hour) - 1;
}

/* Fractional count of self-owned instances needed so that, with the rest of
 * the parallelism on spot at an expected availability of beta per hour, the
 * job is expected to finish inside its window. Two cases depending on
 * whether the final partial hour still covers a full expected spot run.
 * When the governing denominator is <= 0 the constraint no longer depends
 * on the count: any feasible job needs none, an infeasible one is capped. */
inline Ratio selfowned_need(std::int64_t size, Slot deadline_slots, int parallel_limit, Ratio beta,
                            int slots_per_hour) {
    if (beta < Ratio(0) || beta >= Ratio(1)) throw std::invalid_argument("beta must lie in [0, 1)");
    const std::int64_t d = deadline_slots;
    const std::int64_t len = slots_per_hour;
    const int hours = leading_full_hours(deadline_slots, slots_per_hour);
    const Ratio surplus(d * parallel_limit - size);

    Ratio denom;
    if (Ratio(d - hours * len) >= beta * Ratio(len)) {
        denom = Ratio(d) - Ratio((hours + 1) * len) * beta;
    } else {
        denom = (Ratio(1) - beta) * Ratio(hours * len);
    }
    if (denom <= Ratio(0))
        return surplus >= Ratio(0) ? Ratio(0) : Ratio(parallel_limit);
    return Ratio(parallel_limit) - surplus / denom;
}

/* Self-owned instances granted to an arriving job: the rounded-up need,
 * capped by what the pool can hold over the window and by the job's own
 * parallelism. */
inline int selfowned_allocation(std::int64_t size, Slot deadline_slots, int parallel_limit, Ratio beta0,
                                int pool_free, int slots_per_hour) {
    Ratio need = selfowned_need(size, deadline_slots, parallel_limit, beta0, slots_per_hour);
    std::int64_t want = need > Ratio(0) ? need.ceil() : 0;
    want = std::min<std::int64_t>(want, parallel_limit);
    want = std::min<std::int64_t>(want, std::max(pool_free, 0));
    return static_cast<int>(want);
}

/* Greedy baseline: hold the minimum sustained rate that finishes the job by
 * its deadline, pool and parallelism permitting. */
inline int intuitive_selfowned(std::int64_t size, Slot deadline_slots, int parallel_limit, int pool_free) {
    std::int64_t rate = (size + deadline_slots - 1) / deadline_slots;
    rate = std::min<std::int64_t>(rate, parallel_limit);
    rate = std::min<std::int64_t>(rate, std::max(pool_free, 0));
    return static_cast<int>(rate);
}

/* Spot capacity, in instance-updates, that the job can still gamble on
 * before on-demand pacing has to take over. This is the budget that keeps
 * expected completion feasible when each spot hour yields only beta of an
 * hour of work. */
inline std::int64_t spot_bid_budget(std::int64_t work_left, Slot window, int parallel_limit, Ratio beta,
                                    int slots_per_hour) {
    if (beta >= Ratio(1)) throw std::domain_error("spot budget undefined at beta = 1");
    if (beta < Ratio(0)) throw std::invalid_argument("beta must be >= 0");
    std::int64_t surplus = window * parallel_limit - work_left;
    if (surplus < 0) throw std::domain_error("spot budget needs a feasible job (window too small)");
    // floor(surplus / (len * (1 - beta))) computed exactly on integers
    Ratio denom = Ratio(slots_per_hour) * (Ratio(1) - beta);
    return (Ratio(surplus) / denom).floor();
}

/* Number of leading updates at which the whole parallelism can go to spot. */
inline std::int64_t full_spot_updates(std::int64_t bid_budget, int parallel_limit) {
    if (parallel_limit < 1) throw std::invalid_argument("parallel limit must be >= 1");
    return bid_budget / parallel_limit;
}

/* One hourly allocation decision: how many instances to bid on spot and how
 * many to buy on-demand. Invariant: spot + ondemand equals the effective
 * parallelism, so a job with spot available all hour runs at full speed. */
struct SplitDecision {
    int spot = 0;
    int ondemand = 0;
};

/* The cost-aware split: keep everything on spot while the budget covers a
 * full-parallelism hour, then spend the remaining budget in one mixed hour,
 * and once the budget is gone bid everything (the hour in which flexibility
 * will run out anyway). */
inline SplitDecision flexible_split(std::int64_t work_left, Slot window, int parallel_limit, Ratio beta,
                                    int slots_per_hour) {
    if (parallel_limit <= 0) throw std::domain_error("split needs positive effective parallelism");
    std::int64_t budget = spot_bid_budget(work_left, window, parallel_limit, beta, slots_per_hour);
    SplitDecision out;
    if (full_spot_updates(budget, parallel_limit) >= 1) {
        out.spot = parallel_limit;
        out.ondemand = 0;
    } else if (budget > 0) {
        out.spot = static_cast<int>(budget);
        out.ondemand = parallel_limit - out.spot;
    } else {
        out.spot = parallel_limit;
        out.ondemand = 0;
    }
    return out;
}

/* Fixed-fraction baseline split, constant across all updates of a job. */
inline SplitDecision fixed_fraction_split(Ratio theta, int parallel_limit) {
    if (theta < Ratio(0) || theta > Ratio(1)) throw std::invalid_argument("theta must lie in [0, 1]");
    if (parallel_limit <= 0) throw std::domain_error("split needs positive effective parallelism");
    Ratio scaled = theta * Ratio(parallel_limit);
    std::int64_t spot = (scaled + Ratio(1, 2)).floor();  // round to nearest, half up
    SplitDecision out;
    out.spot = static_cast<int>(spot);
    out.ondemand = parallel_limit - out.spot;
    return out;
}

/* Pure on-demand rescue once spot flexibility is gone. The final
 * full_hours hours before the deadline run at full parallelism; whatever
 * remains is covered by partial_extra additional instances on the leading
 * partial interval (loss_slot, full_start - 1]. */
struct EndgameSchedule {
    int full_hours = 0;      // whole hours at full parallelism before the deadline
    Slot full_start = 0;     // first slot of those hours
    int partial_extra = 0;   // extra instances on the partial leading interval
};

inline EndgameSchedule endgame_schedule(std::int64_t work_left, std::int64_t committed, Slot loss_slot,
                                        Slot deadline, int parallel_limit, int ondemand_running,
                                        int slots_per_hour) {
    if (deadline <= loss_slot) throw std::domain_error("endgame needs a nonempty remaining window");
    if (parallel_limit < 1) throw std::domain_error("endgame needs positive parallelism");
    EndgameSchedule plan;
    const Slot window = deadline - loss_slot;
    plan.full_hours = static_cast<int>(window / slots_per_hour);
    plan.full_start = deadline + 1 - static_cast<Slot>(plan.full_hours) * slots_per_hour;
    const Slot partial_len = plan.full_start - 1 - loss_slot;

    std::int64_t need = work_left - committed -
                        static_cast<std::int64_t>(plan.full_hours) * parallel_limit * slots_per_hour;
    if (partial_len > 0 && need > 0) {
        std::int64_t extra = (need + partial_len - 1) / partial_len;
        extra = std::min<std::int64_t>(extra, parallel_limit - ondemand_running);
        plan.partial_extra = static_cast<int>(std::max<std::int64_t>(extra, 0));
    }

    std::int64_t capacity = committed + static_cast<std::int64_t>(plan.partial_extra) * partial_len +
                            static_cast<std::int64_t>(plan.full_hours) * parallel_limit * slots_per_hour;
    if (capacity < work_left)
        throw std::runtime_error("endgame cannot finish the job: upstream invariant violated");
    return plan;
}

/* Expected instance-slots of work a job can push to spot over its lifetime
 * when every allocation hour yields beta of an hour. */
inline Ratio expected_max_spot_work(std::int64_t size, Slot deadline_slots, int parallel_limit, Ratio beta,
                                    int slots_per_hour) {
    std::int64_t budget = spot_bid_budget(size, deadline_slots, parallel_limit, beta, slots_per_hour);
    return Ratio(budget + parallel_limit) * Ratio(slots_per_hour) * beta;
}

}  // namespace cloudalloc
