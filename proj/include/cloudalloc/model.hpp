#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "money.hpp"
#include "rational.hpp"

namespace cloudalloc {

using Slot = std::int64_t;

/* One unit of work is one instance running for one slot. Slots are 1-based;
 * a job arriving at slot a with relative deadline d must finish processing
 * at or before slot a + d - 1. */
struct Job {
    std::int64_t id = 0;
    Slot arrival = 1;         // first slot of the allocation window
    Slot deadline_slots = 1;  // window length in slots, >= 1
    std::int64_t size = 1;    // instance-slots of work, >= 1
    int parallel_limit = 1;   // max instances usable in one slot, >= 1

    Slot last_slot() const { return arrival + deadline_slots - 1; }
};

inline void validate_job(const Job& j) {
    if (j.arrival < 1) throw std::invalid_argument("job " + std::to_string(j.id) + ": arrival must be >= 1");
    if (j.deadline_slots < 1)
        throw std::invalid_argument("job " + std::to_string(j.id) + ": deadline must be >= 1 slot");
    if (j.size < 1) throw std::invalid_argument("job " + std::to_string(j.id) + ": size must be >= 1");
    if (j.parallel_limit < 1)
        throw std::invalid_argument("job " + std::to_string(j.id) + ": parallel limit must be >= 1");
    if (j.size > j.deadline_slots * static_cast<std::int64_t>(j.parallel_limit))
        throw std::invalid_argument("job " + std::to_string(j.id) +
                                    ": infeasible, violates size <= parallel_limit * deadline");
}

/* Tunables of one allocation policy. beta is the spot availability the
 * tenant plans around when pacing on-demand purchases; beta0 plays the same
 * role when sizing the self-owned allocation; bid is the spot bid price. */
struct PolicyParams {
    Ratio beta{0, 1};
    Ratio beta0{0, 1};
    Money bid = 0;
};

inline void validate_policy(const PolicyParams& p) {
    if (p.beta < Ratio(0) || p.beta >= Ratio(1)) throw std::invalid_argument("beta must lie in [0, 1)");
    if (p.beta0 < Ratio(0) || p.beta0 >= Ratio(1)) throw std::invalid_argument("beta0 must lie in [0, 1)");
    if (p.bid <= 0) throw std::invalid_argument("bid must be positive");
}

/* Spot billing classification of one allocation hour.
 * FullHour: ran the whole hour, charged.
 * RanToCompletion: held when the job finished, charged for the full hour.
 * Unpaid: interrupted by the provider mid-hour or never obtained, free. */
enum class SpotChargeClass : std::uint8_t { FullHour, RanToCompletion, Unpaid };

/* Per allocation-update bookkeeping needed for billing and audits. */
struct UpdateRecord {
    int index = 0;            // 1-based update number
    Slot hour_start = 0;      // first slot of the allocation hour
    int spot_requested = 0;   // instances bid for
    int ondemand_bought = 0;  // instances acquired for this hour
    SpotChargeClass charge = SpotChargeClass::Unpaid;
    int slots_until_completion = 0;  // slots the spot ran when charge == RanToCompletion
    int slots_until_interrupt = 0;   // slots the spot ran when charge == Unpaid
    std::int64_t spot_work = 0;      // instance-slots actually processed on spot
    std::int64_t spot_charge_scaled = 0;  // micro money times slots_per_hour
};

/* Live state of one job inside the simulator. */
struct JobRun {
    Job job;
    PolicyParams params;
    int selfowned = 0;          // instances reserved for the whole window, fixed at arrival
    std::int64_t work_left = 0; // unprocessed instance-slots
    int update_index = 0;       // current allocation hour, 1-based; 0 before first update
    std::vector<UpdateRecord> updates;

    std::int64_t selfowned_work = 0;
    std::int64_t spot_work = 0;
    std::int64_t ondemand_work = 0;
    std::int64_t ondemand_hours = 0;  // instance-hours bought, including endgame buys
    bool in_endgame = false;
    bool completed = false;
    Slot completion_slot = 0;
};

/* Slackness of a job at a given allocation update: remaining window times
 * parallelism over remaining work. Values >= 1 mean the job could still
 * finish even if nothing ran until that update. Exact rational. */
inline Ratio slackness(Slot deadline_slots, int parallel_limit, std::int64_t work_left, int update_index,
                       int slots_per_hour) {
    if (work_left <= 0) throw std::domain_error("slackness undefined for completed job");
    if (update_index < 1) throw std::domain_error("slackness needs a 1-based update index");
    std::int64_t window = deadline_slots - static_cast<std::int64_t>(update_index - 1) * slots_per_hour;
    return Ratio(window * parallel_limit, work_left);
}

inline Ratio slackness(const JobRun& run, int slots_per_hour) {
    return slackness(run.job.deadline_slots, run.job.parallel_limit, run.work_left, run.update_index,
                     slots_per_hour);
}

/* Whether the job can afford to gamble on spot for one more hour: slackness
 * at the next update must still be >= 1. A finished job has nothing to bid
 * for, so it reports false. */
inline bool has_spot_flexibility(Slot deadline_slots, int parallel_limit, std::int64_t work_left,
                                 int update_index, int slots_per_hour) {
    if (work_left <= 0) return false;
    std::int64_t next_window = deadline_slots - static_cast<std::int64_t>(update_index) * slots_per_hour;
    if (next_window <= 0) return false;
    return Ratio(next_window * parallel_limit, work_left) >= Ratio(1);
}

inline bool has_spot_flexibility(const JobRun& run, int slots_per_hour) {
    return has_spot_flexibility(run.job.deadline_slots, run.job.parallel_limit, run.work_left,
                                run.update_index, slots_per_hour);
}

/* Per-slot spot price trace, micro money per instance-hour. */
struct SpotPriceTrace {
    std::vector<Money> prices;  // prices[t-1] is the price during slot t

    Slot length() const { return static_cast<Slot>(prices.size()); }

    Money at(Slot t) const {
        if (t < 1 || t > length())
            throw std::out_of_range("price trace too short: need slot " + std::to_string(t) +
                                    ", trace has " + std::to_string(length()));
        return prices[static_cast<std::size_t>(t - 1)];
    }

    /* Sum of the prices of one allocation hour; dividing by slots_per_hour
     * gives the mean hourly rate billed for a charged spot hour. */
    Money hour_sum(Slot hour_start, int slots_per_hour) const {
        Money sum = 0;
        for (int k = 0; k < slots_per_hour; ++k) sum += at(hour_start + k);
        return sum;
    }
};

/* Reservation ledger for the tenant's own R instances. Jobs reserve their
 * allocation at arrival over their whole window and hand back the tail of
 * the reservation when they finish early. */
class SelfOwnedPool {
  public:
    SelfOwnedPool(int capacity, Slot horizon) : capacity_(capacity), reserved_(static_cast<std::size_t>(horizon), 0) {
        if (capacity < 0) throw std::invalid_argument("pool capacity must be >= 0");
        if (horizon < 0) throw std::invalid_argument("pool horizon must be >= 0");
    }

    int capacity() const { return capacity_; }
    Slot horizon() const { return static_cast<Slot>(reserved_.size()); }

    /* Minimum free capacity over [from, to], inclusive. */
    int min_free(Slot from, Slot to) const {
        check_range(from, to);
        int free = capacity_;
        for (Slot t = from; t <= to; ++t)
            free = std::min(free, capacity_ - reserved_[static_cast<std::size_t>(t - 1)]);
        return free;
    }

    void reserve(Slot from, Slot to, int count) {
        if (count == 0) return;
        check_range(from, to);
        if (count < 0 || min_free(from, to) < count)
            throw std::runtime_error("self-owned pool overcommitted on [" + std::to_string(from) + ", " +
                                     std::to_string(to) + "]");
        for (Slot t = from; t <= to; ++t) reserved_[static_cast<std::size_t>(t - 1)] += count;
    }

    void release(Slot from, Slot to, int count) {
        if (count == 0 || from > to) return;
        check_range(from, to);
        for (Slot t = from; t <= to; ++t) {
            int& r = reserved_[static_cast<std::size_t>(t - 1)];
            if (r < count) throw std::runtime_error("self-owned pool release exceeds reservation");
            r -= count;
        }
    }

  private:
    void check_range(Slot from, Slot to) const {
        if (from < 1 || to > horizon() || from > to)
            throw std::out_of_range("pool range [" + std::to_string(from) + ", " + std::to_string(to) +
                                    "] outside horizon " + std::to_string(horizon()));
    }

    int capacity_;
    std::vector<int> reserved_;
};

}  // namespace cloudalloc
