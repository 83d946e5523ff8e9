#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "sdfog/controller.hpp"
#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// Distance of every node to `dst` over usable links.
std::vector<std::int64_t> distances_to(const Topology& topology, NodeId dst,
                                       const LinkWeight& weight) {
    std::vector<std::int64_t> dist(topology.node_count(), kInf);
    using Item = std::pair<std::int64_t, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[dst.value] = 0;
    pq.emplace(0, dst.value);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const auto& adj : topology.adjacency(NodeId{u})) {
            auto w = weight(topology.link(adj.link));
            if (!w) continue;
            std::int64_t nd = d + *w;
            if (nd < dist[adj.peer.value]) {
                dist[adj.peer.value] = nd;
                pq.emplace(nd, adj.peer.value);
            }
        }
    }
    return dist;
}

}  // namespace

std::int64_t latency_us(double latency_ms) { return std::llround(latency_ms * 1000.0); }

std::optional<PathResult> least_cost_path(const Topology& topology, NodeId src, NodeId dst,
                                          const LinkWeight& weight) {
    topology.node(src);
    topology.node(dst);
    const auto dist = distances_to(topology, dst, weight);
    if (dist[src.value] == kInf) return std::nullopt;

    // Depth-first walk of the shortest-path subgraph in ascending node order.
    // Every edge kept satisfies dist[u] == w + dist[v], so any simple walk to
    // dst is optimal and the first one found is lexicographically smallest.
    // Backtracking only happens across zero-weight links.
    struct Frame {
        NodeId node;
        std::size_t next = 0;
        LinkId via;
    };
    std::vector<Frame> stack{{src, 0, LinkId{}}};
    std::vector<bool> on_path(topology.node_count(), false);
    on_path[src.value] = true;

    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.node == dst) break;
        auto adj = topology.adjacency(top.node);
        bool advanced = false;
        while (top.next < adj.size()) {
            const Adjacency& a = adj[top.next++];
            if (on_path[a.peer.value] || dist[a.peer.value] == kInf) continue;
            auto w = weight(topology.link(a.link));
            if (!w || dist[top.node.value] != *w + dist[a.peer.value]) continue;
            // Adjacency is sorted by (peer, link): skip remaining parallel links.
            while (top.next < adj.size() && adj[top.next].peer == a.peer) ++top.next;
            on_path[a.peer.value] = true;
            stack.push_back({a.peer, 0, a.link});
            advanced = true;
            break;
        }
        if (!advanced) {
            on_path[stack.back().node.value] = false;
            stack.pop_back();
        }
    }
    if (stack.empty()) return std::nullopt;

    PathResult out;
    out.cost = dist[src.value];
    for (std::size_t i = 0; i < stack.size(); ++i) {
        out.nodes.push_back(stack[i].node);
        if (i > 0) out.links.push_back(stack[i].via);
    }
    return out;
}

FlowPlan plan_flow(const Topology& topology, const ServiceDescriptor& src,
                   const ServiceDescriptor& dst, const QoSRequirement& qos, FlowId flow_id) {
    if (!topology.has_node(src.host) || !topology.has_node(dst.host))
        throw ValidationError("flow endpoints must be hosted on existing nodes");

    FlowPlan plan;
    plan.flow_id = flow_id;
    plan.src = src;
    plan.dst = dst;
    plan.qos = qos;

    std::optional<PathResult> path;
    if (qos.policy == Policy::QoSAware) {
        const double need = qos.min_bandwidth_kbps;
        path = least_cost_path(topology, src.host, dst.host,
                               [need](const Link& l) -> std::optional<std::int64_t> {
                                   if (l.residual_kbps() + 1e-9 < need) return std::nullopt;
                                   return latency_us(l.latency_ms);
                               });
        if (!path)
            throw NoPath("no path from node " + to_string(src.host) + " to node " +
                         to_string(dst.host) + " with " + std::to_string(need) +
                         " kbps residual capacity");
        if (qos.max_latency_ms && path->cost > latency_us(*qos.max_latency_ms))
            throw LatencyBudgetExceeded("least-latency feasible path takes " +
                                        std::to_string(path->cost / 1000.0) + " ms, budget " +
                                        std::to_string(*qos.max_latency_ms) + " ms");
    } else {
        path = least_cost_path(topology, src.host, dst.host,
                               [](const Link&) -> std::optional<std::int64_t> { return 1; });
        if (!path)
            throw NoPath("nodes " + to_string(src.host) + " and " + to_string(dst.host) +
                         " are not connected");
    }

    plan.node_sequence = std::move(path->nodes);
    plan.path = std::move(path->links);
    for (LinkId l : plan.path) plan.latency_ms += topology.link(l).latency_ms;

    if (qos.policy == Policy::QoSAware) {
        plan.reserved_kbps = qos.min_bandwidth_kbps;
        if (!plan.path.empty()) {
            // Bottleneck link; strict < keeps the one nearest the source.
            std::size_t tightest = 0;
            for (std::size_t i = 1; i < plan.path.size(); ++i)
                if (topology.link(plan.path[i]).residual_kbps() <
                    topology.link(plan.path[tightest]).residual_kbps())
                    tightest = i;
            plan.vnf_placements.push_back({VnfKind::BandwidthReserver,
                                           plan.node_sequence[tightest], flow_id,
                                           qos.min_bandwidth_kbps});
        }
    }

    for (std::size_t i = 0; i < plan.node_sequence.size(); ++i) {
        std::optional<NodeId> next;
        if (i + 1 < plan.node_sequence.size()) next = plan.node_sequence[i + 1];
        plan.flow_entries.emplace(plan.node_sequence[i], FlowTableEntry{flow_id, next});
    }
    return plan;
}

Flow to_flow(const FlowPlan& plan) {
    Flow f;
    f.id = plan.flow_id;
    f.src = plan.src;
    f.dst = plan.dst;
    f.path = plan.path;
    f.node_sequence = plan.node_sequence;
    f.qos = plan.qos;
    f.reserved_kbps = plan.reserved_kbps;
    f.latency_ms = plan.latency_ms;
    f.vnfs = plan.vnf_placements;
    return f;
}

}  // namespace sdfog
