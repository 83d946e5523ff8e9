#include "sdfog/discovery.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

double min_link_latency(const Topology& topology, NodeId u, NodeId v) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& adj : topology.adjacency(u))
        if (adj.peer == v) best = std::min(best, topology.link(adj.link).latency_ms);
    return best;
}

bool in_scope(const Topology& topology, NodeId n, std::optional<DomainId> scope) {
    return !scope || topology.node(n).domain == *scope;
}

}  // namespace

double DiscoveryResult::completion_ms() const {
    double worst = 0.0;
    for (const auto& v : visits) worst = std::max(worst, v.arrival_ms);
    return 2.0 * worst;
}

DiscoveryResult discover_recursive(const Topology& topology, std::span<const Registry> registries,
                                   const DiscoveryQuery& query) {
    if (!topology.has_node(query.origin))
        throw UnknownOrigin("discovery origin " + to_string(query.origin) + " does not exist");
    if (registries.size() != topology.node_count())
        throw ValidationError("expected one registry per node");

    DiscoveryResult result;
    if (!in_scope(topology, query.origin, query.scope)) return result;

    std::deque<DiscoveryVisit> frontier;
    auto send = [&](NodeId n, std::uint32_t hops, double arrival) {
        if (n != query.origin) result.messages_sent += 2;
        result.nodes_visited.insert(n);
        DiscoveryVisit v{n, hops, arrival, result.messages_sent};
        result.visits.push_back(v);
        frontier.push_back(v);
    };
    send(query.origin, 0, 0.0);

    while (!frontier.empty()) {
        DiscoveryVisit at = frontier.front();
        frontier.pop_front();

        auto hits = registries[at.node.value].lookup_local(query.service_type);
        for (auto& d : hits) {
            result.hop_distance.emplace(d.id, at.hops);
            result.descriptors.push_back(std::move(d));
        }
        if (query.prune_on_match && !hits.empty()) continue;
        if (at.hops >= query.ttl) continue;

        const FogNode& node = topology.node(at.node);
        for (const auto* side : {&node.north_neighbors, &node.south_neighbors}) {
            for (NodeId next : *side) {
                if (result.nodes_visited.contains(next)) continue;
                if (!in_scope(topology, next, query.scope)) continue;
                send(next, at.hops + 1, at.arrival_ms + min_link_latency(topology, at.node, next));
            }
        }
    }

    std::sort(result.descriptors.begin(), result.descriptors.end(),
              [](const ServiceDescriptor& a, const ServiceDescriptor& b) { return a.id < b.id; });
    return result;
}

void GlobalServiceIndex::apply(const RegistryChange& change) {
    const ServiceDescriptor& d = change.descriptor;
    if (change.kind == RegistryChange::Kind::Registered) {
        by_id_[d.id] = d;
        by_type_[d.metadata.service_type].insert(d.id);
        return;
    }
    by_id_.erase(d.id);
    auto it = by_type_.find(d.metadata.service_type);
    if (it != by_type_.end()) {
        it->second.erase(d.id);
        if (it->second.empty()) by_type_.erase(it);
    }
}

std::vector<ServiceDescriptor> GlobalServiceIndex::lookup(const Topology& topology,
                                                          std::string_view service_type,
                                                          std::optional<DomainId> scope) const {
    std::vector<ServiceDescriptor> out;
    auto it = by_type_.find(service_type);
    if (it == by_type_.end()) return out;
    for (ServiceId id : it->second) {
        const ServiceDescriptor& d = by_id_.at(id);
        if (in_scope(topology, d.host, scope)) out.push_back(d);
    }
    return out;
}

const ServiceDescriptor* GlobalServiceIndex::find(ServiceId id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &it->second;
}

DiscoveryResult discover_via_controller(const Topology& topology, const GlobalServiceIndex& index,
                                        std::string_view service_type,
                                        std::optional<DomainId> scope,
                                        std::optional<NodeId> origin) {
    DiscoveryResult result;
    result.messages_sent = 2;
    result.descriptors = index.lookup(topology, service_type, scope);
    std::vector<std::uint32_t> hops;
    if (origin) hops = hop_distances(topology, *origin);
    for (const auto& d : result.descriptors) {
        result.nodes_visited.insert(d.host);
        if (origin) result.hop_distance.emplace(d.id, hops[d.host.value]);
    }
    return result;
}

std::string discovery_trace_csv(std::uint64_t query_id, double start_ms,
                                const DiscoveryResult& result, bool header) {
    std::ostringstream os;
    if (header) os << "query_id,node,time_ms,messages\n";
    for (const auto& v : result.visits) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f", start_ms + v.arrival_ms);
        os << query_id << ',' << v.node << ',' << buf << ',' << v.messages_so_far << '\n';
    }
    return os.str();
}

}  // namespace sdfog
