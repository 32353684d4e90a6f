#include "lockss/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace lockss::netsim {

void NetParams::validate() const
{
    if (bandwidths.empty()) throw ConfigError("net: no bandwidth classes");
    for (double b : bandwidths)
        if (!(b > 0.0)) throw ConfigError("net: bandwidths must be positive");
    if (!(min_latency >= 0.0 && max_latency >= min_latency)) throw ConfigError("net: bad latency range");
    if (control_bytes < 0 || vote_base_bytes < 0 || vote_round_bytes < 0 || au_bytes < 0)
        throw ConfigError("net: message sizes must be non-negative");
}

double NetParams::slowest_bandwidth() const { return *std::min_element(bandwidths.begin(), bandwidths.end()); }

Link sample_link(const NetParams& params, Rng& rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, params.bandwidths.size() - 1);
    std::uniform_real_distribution<double> lat(params.min_latency, params.max_latency);
    Link l;
    l.bandwidth = params.bandwidths[pick(rng)];
    l.latency = lat(rng);
    return l;
}

SimTime flow_time(const Link& src, const Link& dst, double bits)
{
    return bits / std::min(src.bandwidth, dst.bandwidth) + src.latency + dst.latency;
}

SimTime worst_flow_time(const NetParams& params, double bits)
{
    return bits / params.slowest_bandwidth() + 2.0 * params.max_latency;
}

CpuPool::CpuPool(std::size_t workers) : workers_(workers)
{
    for (std::size_t k = 0; k < workers_; ++k) free_at_.push(0.0);
}

SimTime CpuPool::charge(SimTime now, SimTime duration)
{
    busy_total_ += duration;
    if (unlimited()) return now + duration;
    const SimTime start = std::max(now, free_at_.top());
    free_at_.pop();
    free_at_.push(start + duration);
    return start + duration;
}

SimTime next_damage_delay(double mtbf_seconds, Rng& rng)
{
    if (!(mtbf_seconds > 0.0) || std::isinf(mtbf_seconds)) return kInfinity;
    std::exponential_distribution<double> e(1.0 / mtbf_seconds);
    return e(rng);
}

}  // namespace lockss::netsim
