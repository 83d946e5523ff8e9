#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdfog/ids.hpp"

namespace sdfog {

// Ordered from the network edge toward the datacenter. "North" means a
// higher tier, "south" a lower one.
enum class Tier { EdgeDevice = 0, Gateway = 1, Backbone = 2, Cloud = 3 };

std::string_view to_string(Tier tier);
Tier parse_tier(std::string_view text);

struct FogNode {
    NodeId id;
    std::string name;
    Tier tier = Tier::EdgeDevice;
    DomainId domain;
    std::vector<NodeId> north_neighbors;
    std::vector<NodeId> south_neighbors;
    double compute_capacity = 0.0;  // abstract compute units
    double compute_used = 0.0;

    double spare_compute() const { return compute_capacity - compute_used; }

    bool operator==(const FogNode&) const = default;
};

struct Link {
    LinkId id;
    std::string name;
    NodeId endpoint_a;
    NodeId endpoint_b;
    double capacity_kbps = 0.0;
    double latency_ms = 0.0;
    std::map<FlowId, double> reservations;  // kbps

    double reserved_kbps() const;
    double residual_kbps() const { return capacity_kbps - reserved_kbps(); }
    NodeId peer(NodeId from) const { return from == endpoint_a ? endpoint_b : endpoint_a; }
    bool touches(NodeId n) const { return n == endpoint_a || n == endpoint_b; }

    bool operator==(const Link&) const = default;
};

enum class ProviderKind { DeviceHardware, Application };

struct ServiceMetadata {
    std::string service_type;
    ProviderKind provider_kind = ProviderKind::Application;
    double nominal_data_rate_kbps = 0.0;
    std::map<std::string, std::string> attributes;

    bool operator==(const ServiceMetadata&) const = default;
};

struct ServiceDescriptor {
    ServiceId id;
    ServiceMetadata metadata;
    NodeId host;

    bool operator==(const ServiceDescriptor&) const = default;
};

enum class Policy { QoSAware, BestEffort };

std::string_view to_string(Policy policy);

struct QoSRequirement {
    double min_bandwidth_kbps = 0.0;
    std::optional<double> max_latency_ms;  // nullopt: unbounded
    Policy policy = Policy::BestEffort;

    static QoSRequirement best_effort() { return {}; }
    static QoSRequirement qos_aware(double kbps, std::optional<double> max_latency_ms = {}) {
        return {kbps, max_latency_ms, Policy::QoSAware};
    }

    bool operator==(const QoSRequirement&) const = default;
};

enum class VnfKind { BandwidthReserver };

struct VnfSpec {
    VnfKind kind = VnfKind::BandwidthReserver;
    NodeId host;
    FlowId flow;
    double parameter_kbps = 0.0;

    bool operator==(const VnfSpec&) const = default;
};

struct FlowTableEntry {
    FlowId match;
    std::optional<NodeId> next_hop;  // nullopt: deliver locally

    bool deliver_local() const { return !next_hop.has_value(); }
    bool operator==(const FlowTableEntry&) const = default;
};

// An installed unidirectional flow between two services.
struct Flow {
    FlowId id;
    ServiceDescriptor src;
    ServiceDescriptor dst;
    std::vector<LinkId> path;
    std::vector<NodeId> node_sequence;
    QoSRequirement qos;
    double reserved_kbps = 0.0;
    double latency_ms = 0.0;
    std::vector<VnfSpec> vnfs;

    bool operator==(const Flow&) const = default;
};

struct Adjacency {
    LinkId link;
    NodeId peer;

    bool operator==(const Adjacency&) const = default;
};

class Topology {
public:
    std::span<const FogNode> nodes() const { return nodes_; }
    std::span<const Link> links() const { return links_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t link_count() const { return links_.size(); }

    bool has_node(NodeId id) const { return id.value < nodes_.size(); }
    bool has_link(LinkId id) const { return id.value < links_.size(); }
    const FogNode& node(NodeId id) const;
    const Link& link(LinkId id) const;
    std::optional<NodeId> find_node(std::string_view name) const;
    std::optional<LinkId> find_link(std::string_view name) const;
    NodeId node_id(std::string_view name) const;  // throws ValidationError

    // Sorted by peer id, then link id.
    std::span<const Adjacency> adjacency(NodeId id) const;

    std::span<const std::string> domain_names() const { return domain_names_; }
    std::optional<DomainId> find_domain(std::string_view name) const;

    // Maximum hop distance over all node pairs, computed at load.
    std::uint32_t diameter() const { return diameter_; }

    // Reservation ledger. reserve() refuses to exceed capacity.
    void reserve(LinkId link, FlowId flow, double kbps);
    void release(LinkId link, FlowId flow);

    // Compute accounting. allocate_compute() refuses to exceed capacity.
    void allocate_compute(NodeId node, double units);
    void free_compute(NodeId node, double units);

    bool operator==(const Topology&) const = default;

private:
    friend class TopologyBuilder;

    std::vector<FogNode> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<Adjacency>> adjacency_;
    std::vector<std::string> domain_names_;
    std::uint32_t diameter_ = 0;
};

// Assembles and validates a Topology. North/south relations are derived
// from tiers; links between equal tiers need an explicit north hint.
class TopologyBuilder {
public:
    NodeId add_node(std::string name, Tier tier, std::string_view domain, double compute_capacity);
    LinkId add_link(std::string name, std::string_view a, std::string_view b, double capacity_kbps,
                    double latency_ms);
    // Marks `upper` as north of `lower`; only meaningful when their tiers tie.
    void hint_north(std::string_view lower, std::string_view upper);

    Topology build() const;

private:
    struct PendingNode {
        std::string name;
        Tier tier;
        std::string domain;
        double compute_capacity;
    };
    struct PendingLink {
        std::string name;
        std::string a;
        std::string b;
        double capacity_kbps;
        double latency_ms;
    };

    std::vector<PendingNode> nodes_;
    std::vector<PendingLink> links_;
    std::vector<std::pair<std::string, std::string>> north_hints_;
};

// Parses the JSON topology document: {"nodes": [...], "links": [...]}.
Topology load_topology(std::string_view config_text);
Topology load_topology_file(const std::string& path);

// Hop distances from `from` to every node (unreachable: max value).
std::vector<std::uint32_t> hop_distances(const Topology& topology, NodeId from);

// Least total link latency between two nodes (control-plane messages).
double control_latency_ms(const Topology& topology, NodeId from, NodeId to);

struct TaskEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    QoSRequirement qos;

    bool operator==(const TaskEdge&) const = default;
};

// Throws CycleError or DanglingEdgeError.
void validate_task_graph(std::span<const std::string> vertices, std::span<const TaskEdge> edges);

// Directed acyclic graph of service types. Construction validates.
class TaskGraph {
public:
    TaskGraph() = default;
    TaskGraph(std::vector<std::string> vertices, std::vector<TaskEdge> edges);

    const std::vector<std::string>& vertices() const { return vertices_; }
    const std::vector<TaskEdge>& edges() const { return edges_; }
    bool empty() const { return vertices_.empty(); }

private:
    std::vector<std::string> vertices_;
    std::vector<TaskEdge> edges_;
};

inline void validate_task_graph(const TaskGraph& graph) {
    validate_task_graph(graph.vertices(), graph.edges());
}

}  // namespace sdfog
