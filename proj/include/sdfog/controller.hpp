#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdfog/discovery.hpp"
#include "sdfog/model.hpp"
#include "sdfog/som.hpp"

namespace sdfog {

struct FlowPlan {
    FlowId flow_id;
    ServiceDescriptor src;
    ServiceDescriptor dst;
    std::vector<LinkId> path;
    std::vector<NodeId> node_sequence;
    QoSRequirement qos;
    std::vector<VnfSpec> vnf_placements;
    std::map<NodeId, FlowTableEntry> flow_entries;
    double latency_ms = 0.0;
    double reserved_kbps = 0.0;  // per path link; 0 for best effort

    bool operator==(const FlowPlan&) const = default;
};

struct PathResult {
    std::vector<NodeId> nodes;
    std::vector<LinkId> links;
    std::int64_t cost = 0;
};

// Returns the weight of a usable link, or nullopt to prune it. Weights must
// be nonnegative.
using LinkWeight = std::function<std::optional<std::int64_t>(const Link&)>;

// Minimum-cost simple path; among equal-cost paths the lexicographically
// smallest node sequence wins (parallel links: lowest LinkId).
std::optional<PathResult> least_cost_path(const Topology& topology, NodeId src, NodeId dst,
                                          const LinkWeight& weight);

// Latencies are compared in integer microseconds so ties are exact.
std::int64_t latency_us(double latency_ms);

// Pure flow-creation step. QoSAware: capacity-pruned least-latency path, one
// BandwidthReserver on the upstream end of the tightest link. BestEffort:
// min-hop path with no reservation.
FlowPlan plan_flow(const Topology& topology, const ServiceDescriptor& src,
                   const ServiceDescriptor& dst, const QoSRequirement& qos, FlowId flow_id);

Flow to_flow(const FlowPlan& plan);

struct AppTemplate {
    double compute_demand = 0.0;
    double nominal_rate_kbps = 0.0;
};

using AppCatalog = std::map<std::string, AppTemplate, std::less<>>;

struct DeployedApp {
    std::uint64_t instance = 0;
    std::string name;
    double compute = 0.0;
    std::optional<ServiceId> service;  // apps that host a service
    std::optional<FlowId> flow;        // VNFs bound to a flow

    bool operator==(const DeployedApp&) const = default;
};

// Per-node Network Manager (flow table) and App Manager (deployed apps).
struct NodeAgent {
    NodeId node;
    bool online = true;
    std::map<FlowId, FlowTableEntry> flow_table;
    std::map<std::uint64_t, DeployedApp> apps;

    bool operator==(const NodeAgent&) const = default;
};

struct DecomposedService {
    std::size_t vertex = 0;
    std::string service_type;
    std::vector<std::size_t> out_edges;  // indices into TaskGraph::edges()
};

// Topological order; ties go to the earlier-declared vertex.
std::vector<DecomposedService> decompose_task(const TaskGraph& graph);

struct OrchestrateOptions {
    std::optional<std::uint32_t> discovery_ttl;  // default: topology diameter
    std::optional<DomainId> discovery_scope;     // default: global
    bool prune_on_match = true;
};

struct OrchestrationReport {
    std::vector<DecomposedService> decomposition;
    std::vector<ServiceDescriptor> bindings;  // per vertex
    std::vector<DiscoveryResult> discoveries;  // per vertex
    std::vector<std::string> discovery_route;  // "local"/"recursive"/"controller"/"instantiated"
    std::vector<FlowPlan> plans;               // per edge, decomposition order
    std::vector<Flow> flows;
};

// Everything install/release/orchestrate may touch.
struct ControllerSnapshot {
    std::vector<Link> links;
    std::vector<FogNode> nodes;
    std::vector<NodeAgent> agents;
    std::vector<std::vector<ServiceDescriptor>> registries;
    std::map<FlowId, Flow> flows;

    bool operator==(const ControllerSnapshot&) const = default;
};

struct ControllerOptions {
    double vnf_compute_units = 1.0;
};

// The logically centralized controller plus the per-node middleware and
// agents it drives. Owns the simulation's topology view.
class Controller {
public:
    explicit Controller(Topology topology, AppCatalog catalog = {}, ControllerOptions options = {});
    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    const Topology& topology() const { return topology_; }
    IdAllocator& ids() { return ids_; }

    Registry& registry(NodeId node);
    const Registry& registry(NodeId node) const;
    std::span<const Registry> registries() const { return registries_; }
    const GlobalServiceIndex& service_index() const { return index_; }
    const ServiceDescriptor& descriptor(ServiceId id) const;

    ServiceId register_service(NodeId host, ServiceMetadata metadata);

    NodeAgent& agent(NodeId node);
    const NodeAgent& agent(NodeId node) const;
    void set_agent_online(NodeId node, bool online);

    AppCatalog& catalog() { return catalog_; }

    DiscoveryResult discover(const DiscoveryQuery& query) const;
    DiscoveryResult discover_via_controller(std::string_view service_type,
                                            std::optional<DomainId> scope,
                                            std::optional<NodeId> origin = std::nullopt) const;
    ServiceDescriptor instantiate_service(std::string_view service_type);
    void retire_app(NodeId node, std::uint64_t instance);

    FlowPlan create_flow(const ServiceDescriptor& src, const ServiceDescriptor& dst,
                         const QoSRequirement& qos);
    Flow install_flow(const FlowPlan& plan);
    void release_flow(FlowId flow);

    const std::map<FlowId, Flow>& flows() const { return flows_; }
    const Flow& flow(FlowId id) const;

    // All-or-nothing: on failure every flow and app created by this call is
    // removed before the OrchestrationError propagates.
    OrchestrationReport orchestrate(const TaskGraph& task, NodeId origin,
                                    const OrchestrateOptions& options = {});

    ControllerSnapshot snapshot() const;

private:
    ServiceDescriptor bind_vertex(const std::string& service_type, NodeId origin,
                                  const OrchestrateOptions& options, OrchestrationReport& report,
                                  std::vector<std::pair<NodeId, std::uint64_t>>& instantiated);

    Topology topology_;
    AppCatalog catalog_;
    ControllerOptions options_;
    IdAllocator ids_;
    std::vector<Registry> registries_;
    GlobalServiceIndex index_;
    std::vector<NodeAgent> agents_;
    std::map<FlowId, Flow> flows_;
};

// flow_id,src,dst,policy,path,latency_ms,reserved_kbps
std::string flows_to_csv(const Topology& topology, std::span<const Flow> flows,
                         bool header = true);

}  // namespace sdfog
