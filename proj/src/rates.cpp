#include <algorithm>
#include <cmath>
#include <set>

#include "sdfog/errors.hpp"
#include "sdfog/netsim.hpp"

namespace sdfog {

std::map<FlowId, double> compute_link_rates(const Topology& topology,
                                            std::span<const RateDemand> flows) {
    std::map<FlowId, double> rate;
    std::vector<double> residual(topology.link_count());
    for (const auto& l : topology.links()) residual[l.id.value] = l.capacity_kbps;

    for (const auto& f : flows) {
        for (LinkId l : f.path)
            if (!topology.has_link(l)) throw ValidationError("flow path references unknown link");
        if (f.policy != Policy::QoSAware) continue;
        const double r = std::max(0.0, std::min(f.demand_kbps, f.reserved_kbps));
        rate[f.flow] = r;
        for (LinkId l : f.path) residual[l.value] -= r;
    }
    for (double& r : residual) r = std::max(0.0, r);

    // Progressive filling: raise every unfrozen flow by the same amount until
    // a link saturates or a flow reaches its demand, freeze those, repeat.
    std::vector<const RateDemand*> active;
    for (const auto& f : flows) {
        if (f.policy == Policy::QoSAware) continue;
        const double demand = std::max(0.0, f.demand_kbps);
        rate[f.flow] = 0.0;
        if (f.path.empty()) {
            rate[f.flow] = demand;
        } else if (demand > 0.0) {
            active.push_back(&f);
        }
    }

    std::vector<std::size_t> users(topology.link_count());
    while (!active.empty()) {
        std::fill(users.begin(), users.end(), 0);
        for (const auto* f : active)
            for (LinkId l : f->path) ++users[l.value];

        double step = kGreedy;
        for (std::size_t l = 0; l < users.size(); ++l)
            if (users[l] > 0) step = std::min(step, residual[l] / static_cast<double>(users[l]));
        for (const auto* f : active) step = std::min(step, f->demand_kbps - rate[f->flow]);

        std::set<std::size_t> saturated;
        for (std::size_t l = 0; l < users.size(); ++l) {
            if (users[l] == 0) continue;
            residual[l] -= step * static_cast<double>(users[l]);
            if (residual[l] <= 1e-9 * std::max(1.0, topology.links()[l].capacity_kbps)) {
                residual[l] = 0.0;
                saturated.insert(l);
            }
        }
        std::vector<const RateDemand*> still;
        for (const auto* f : active) {
            double& r = rate[f->flow];
            r += step;
            if (std::isfinite(f->demand_kbps) &&
                f->demand_kbps - r <= 1e-9 * std::max(1.0, f->demand_kbps)) {
                r = f->demand_kbps;
                continue;
            }
            const bool blocked = std::any_of(f->path.begin(), f->path.end(),
                                             [&](LinkId l) { return saturated.contains(l.value); });
            if (!blocked) still.push_back(f);
        }
        active.swap(still);
    }
    return rate;
}

}  // namespace sdfog
