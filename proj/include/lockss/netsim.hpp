#pragma once

// Discrete-event plumbing: star-topology flow model, a (time, seq) ordered
// event queue, serial and pooled CPUs, and the damage process.

#include "lockss/core.hpp"

#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

namespace lockss::netsim {

struct Link {
    double bandwidth = 1.5e6;  // bits per second
    double latency = 0.001;    // seconds
};

struct NetParams {
    std::vector<double> bandwidths{1.5e6, 10e6, 1000e6};
    double min_latency = 0.001;
    double max_latency = 0.030;
    double control_bytes = 1024;
    double vote_base_bytes = 2048;
    double vote_round_bytes = 32;
    double au_bytes = 50.0 * 1024 * 1024;

    void validate() const;
    double slowest_bandwidth() const;
};

Link sample_link(const NetParams& params, Rng& rng);

// size / min(bandwidth) + both latencies. Congestion is not modelled.
SimTime flow_time(const Link& src, const Link& dst, double bits);

// Worst case one-way time for a payload of `bits` between any two links.
SimTime worst_flow_time(const NetParams& params, double bits);

// Min-heap on (time, insertion sequence): FIFO among equal timestamps.
template <class Payload>
class EventQueue {
public:
    struct Entry {
        SimTime time;
        std::uint64_t seq;
        Payload payload;
    };

    void push(SimTime time, Payload payload)
    {
        if (time < now_) throw InvariantError("event scheduled in the past");
        heap_.push(Entry{time, next_seq_++, std::move(payload)});
    }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    SimTime next_time() const { return heap_.top().time; }
    SimTime now() const { return now_; }
    std::uint64_t pushed() const { return next_seq_; }

    Entry pop()
    {
        // priority_queue::top is const; the payload is moved out before pop.
        Entry e = std::move(const_cast<Entry&>(heap_.top()));
        heap_.pop();
        now_ = e.time;
        return e;
    }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    SimTime now_ = 0;
};

// One serial processor. Overlapping work is a protocol bug.
class SerialCpu {
public:
    SimTime charge(SimTime now, SimTime duration)
    {
        if (now < busy_until_) throw InvariantError("overlapping compute on a serial CPU");
        busy_until_ = now + duration;
        busy_total_ += duration;
        return busy_until_;
    }
    SimTime busy_until() const { return busy_until_; }
    SimTime busy_total() const { return busy_total_; }

private:
    SimTime busy_until_ = 0;
    SimTime busy_total_ = 0;
};

// A pool of identical workers with perfect work balancing. Jobs queue for the
// earliest free worker. A pool of 0 workers means unlimited capacity.
class CpuPool {
public:
    explicit CpuPool(std::size_t workers = 0);
    SimTime charge(SimTime now, SimTime duration);
    std::size_t workers() const { return workers_; }
    bool unlimited() const { return workers_ == 0; }
    SimTime busy_total() const { return busy_total_; }

private:
    std::size_t workers_;
    std::priority_queue<SimTime, std::vector<SimTime>, std::greater<>> free_at_;
    SimTime busy_total_ = 0;
};

// Exponential inter-damage time; infinity when MTBF is infinite or zero rate.
SimTime next_damage_delay(double mtbf_seconds, Rng& rng);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace lockss::netsim
