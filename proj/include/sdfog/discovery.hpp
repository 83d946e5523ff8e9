#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sdfog/model.hpp"
#include "sdfog/som.hpp"

namespace sdfog {

struct DiscoveryQuery {
    NodeId origin;
    std::string service_type;
    std::uint32_t ttl = 0;              // hops
    std::optional<DomainId> scope;      // nullopt: global
    bool prune_on_match = false;        // stop expanding past a node that matched
};

// One query message reaching a node.
struct DiscoveryVisit {
    NodeId node;
    std::uint32_t hops = 0;
    double arrival_ms = 0.0;  // offset from query start along the search tree
    std::uint32_t messages_so_far = 0;
};

struct DiscoveryResult {
    std::vector<ServiceDescriptor> descriptors;  // ascending ServiceId
    std::uint32_t messages_sent = 0;
    std::set<NodeId> nodes_visited;
    std::map<ServiceId, std::uint32_t> hop_distance;
    std::vector<DiscoveryVisit> visits;  // in query order

    // Round-trip time of the slowest branch.
    double completion_ms() const;
};

// Breadth-first query over north then south neighbors. Each queried node
// costs a query and a reply message; the origin costs nothing.
DiscoveryResult discover_recursive(const Topology& topology, std::span<const Registry> registries,
                                   const DiscoveryQuery& query);

// Controller-side snapshot of every registry, kept in sync through
// Registry observers.
class GlobalServiceIndex {
public:
    void apply(const RegistryChange& change);

    std::vector<ServiceDescriptor> lookup(const Topology& topology, std::string_view service_type,
                                          std::optional<DomainId> scope) const;
    std::size_t size() const { return by_id_.size(); }
    const ServiceDescriptor* find(ServiceId id) const;

private:
    std::map<ServiceId, ServiceDescriptor> by_id_;
    std::map<std::string, std::set<ServiceId>, std::less<>> by_type_;
};

// Request plus reply to the controller: messages_sent is always 2. When an
// origin is given, hop_distance is filled from the controller's topology view.
DiscoveryResult discover_via_controller(const Topology& topology, const GlobalServiceIndex& index,
                                        std::string_view service_type,
                                        std::optional<DomainId> scope,
                                        std::optional<NodeId> origin = std::nullopt);

// CSV rows: query_id,node,time_ms,messages
std::string discovery_trace_csv(std::uint64_t query_id, double start_ms,
                                const DiscoveryResult& result, bool header = false);

}  // namespace sdfog
