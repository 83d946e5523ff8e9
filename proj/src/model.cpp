#include "sdfog/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

void sorted_unique(std::vector<NodeId>& ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

}  // namespace

std::string_view to_string(Tier tier) {
    switch (tier) {
        case Tier::EdgeDevice: return "edge";
        case Tier::Gateway: return "gateway";
        case Tier::Backbone: return "backbone";
        case Tier::Cloud: return "cloud";
    }
    return "?";
}

Tier parse_tier(std::string_view text) {
    if (text == "edge" || text == "edge-device" || text == "EdgeDevice") return Tier::EdgeDevice;
    if (text == "gateway" || text == "Gateway") return Tier::Gateway;
    if (text == "backbone" || text == "Backbone") return Tier::Backbone;
    if (text == "cloud" || text == "Cloud") return Tier::Cloud;
    throw ParseError("unknown tier '" + std::string(text) + "'");
}

std::string_view to_string(Policy policy) {
    return policy == Policy::QoSAware ? "qos" : "best-effort";
}

double Link::reserved_kbps() const {
    double sum = 0.0;
    for (const auto& [flow, kbps] : reservations) sum += kbps;
    return sum;
}

const FogNode& Topology::node(NodeId id) const {
    if (!has_node(id)) throw ValidationError("unknown node id " + to_string(id));
    return nodes_[id.value];
}

const Link& Topology::link(LinkId id) const {
    if (!has_link(id)) throw ValidationError("unknown link id " + to_string(id));
    return links_[id.value];
}

std::optional<NodeId> Topology::find_node(std::string_view name) const {
    for (const auto& n : nodes_)
        if (n.name == name) return n.id;
    return std::nullopt;
}

std::optional<LinkId> Topology::find_link(std::string_view name) const {
    for (const auto& l : links_)
        if (l.name == name) return l.id;
    return std::nullopt;
}

NodeId Topology::node_id(std::string_view name) const {
    if (auto id = find_node(name)) return *id;
    throw ValidationError("unknown node '" + std::string(name) + "'");
}

std::span<const Adjacency> Topology::adjacency(NodeId id) const {
    node(id);
    return adjacency_[id.value];
}

std::optional<DomainId> Topology::find_domain(std::string_view name) const {
    for (std::size_t i = 0; i < domain_names_.size(); ++i)
        if (domain_names_[i] == name) return DomainId{static_cast<std::uint32_t>(i)};
    return std::nullopt;
}

void Topology::reserve(LinkId id, FlowId flow, double kbps) {
    if (!has_link(id)) throw ValidationError("unknown link id " + to_string(id));
    Link& l = links_[id.value];
    if (l.reservations.contains(flow))
        throw ValidationError("flow " + to_string(flow) + " already reserved on link " + l.name);
    if (l.reserved_kbps() + kbps > l.capacity_kbps + 1e-9)
        throw StaleReservation("link " + l.name + " lacks residual capacity for " +
                               std::to_string(kbps) + " kbps");
    l.reservations.emplace(flow, kbps);
}

void Topology::release(LinkId id, FlowId flow) {
    if (!has_link(id)) throw ValidationError("unknown link id " + to_string(id));
    links_[id.value].reservations.erase(flow);
}

void Topology::allocate_compute(NodeId id, double units) {
    if (!has_node(id)) throw AgentFailure("unknown node id " + to_string(id));
    FogNode& n = nodes_[id.value];
    if (n.compute_used + units > n.compute_capacity + 1e-9)
        throw AgentFailure("node " + n.name + " lacks compute for " + std::to_string(units) +
                           " units");
    n.compute_used += units;
}

void Topology::free_compute(NodeId id, double units) {
    if (!has_node(id)) throw AgentFailure("unknown node id " + to_string(id));
    FogNode& n = nodes_[id.value];
    n.compute_used = std::max(0.0, n.compute_used - units);
}

NodeId TopologyBuilder::add_node(std::string name, Tier tier, std::string_view domain,
                                 double compute_capacity) {
    nodes_.push_back({std::move(name), tier, std::string(domain), compute_capacity});
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

LinkId TopologyBuilder::add_link(std::string name, std::string_view a, std::string_view b,
                                 double capacity_kbps, double latency_ms) {
    links_.push_back({std::move(name), std::string(a), std::string(b), capacity_kbps, latency_ms});
    return LinkId{static_cast<std::uint32_t>(links_.size() - 1)};
}

void TopologyBuilder::hint_north(std::string_view lower, std::string_view upper) {
    north_hints_.emplace_back(std::string(lower), std::string(upper));
}

Topology TopologyBuilder::build() const {
    if (nodes_.empty()) throw ValidationError("topology has no nodes");

    Topology t;
    std::map<std::string, NodeId, std::less<>> by_name;
    for (const auto& pn : nodes_) {
        if (pn.name.empty()) throw ValidationError("node with empty id");
        if (pn.compute_capacity < 0.0)
            throw ValidationError("node " + pn.name + " has negative compute capacity");
        NodeId id{static_cast<std::uint32_t>(t.nodes_.size())};
        if (!by_name.emplace(pn.name, id).second)
            throw ValidationError("duplicate node id '" + pn.name + "'");

        auto dom = t.find_domain(pn.domain);
        if (!dom) {
            dom = DomainId{static_cast<std::uint32_t>(t.domain_names_.size())};
            t.domain_names_.push_back(pn.domain);
        }
        FogNode n;
        n.id = id;
        n.name = pn.name;
        n.tier = pn.tier;
        n.domain = *dom;
        n.compute_capacity = pn.compute_capacity;
        t.nodes_.push_back(std::move(n));
    }

    auto lookup = [&](const std::string& name, const std::string& context) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ValidationError(context + " references unknown node '" + name + "'");
        return it->second;
    };

    std::set<std::pair<NodeId, NodeId>> hints;  // (lower, upper)
    for (const auto& [lower, upper] : north_hints_)
        hints.emplace(lookup(lower, "north hint"), lookup(upper, "north hint"));

    t.adjacency_.resize(t.nodes_.size());
    std::set<std::string> link_names;
    std::set<std::pair<NodeId, NodeId>> used_hints;
    for (const auto& pl : links_) {
        if (!link_names.insert(pl.name).second)
            throw ValidationError("duplicate link id '" + pl.name + "'");
        const std::string ctx = "link " + pl.name;
        NodeId a = lookup(pl.a, ctx);
        NodeId b = lookup(pl.b, ctx);
        if (a == b) throw ValidationError(ctx + " is a self-loop");
        if (!(pl.capacity_kbps > 0.0)) throw ValidationError(ctx + " has nonpositive capacity");
        if (!(pl.latency_ms >= 0.0)) throw ValidationError(ctx + " has negative latency");

        Link l;
        l.id = LinkId{static_cast<std::uint32_t>(t.links_.size())};
        l.name = pl.name;
        l.endpoint_a = a;
        l.endpoint_b = b;
        l.capacity_kbps = pl.capacity_kbps;
        l.latency_ms = pl.latency_ms;

        FogNode& na = t.nodes_[a.value];
        FogNode& nb = t.nodes_[b.value];
        NodeId lower = a;
        NodeId upper = b;
        if (na.tier == nb.tier) {
            const bool a_below = hints.contains({a, b});
            const bool b_below = hints.contains({b, a});
            if (a_below == b_below)
                throw ValidationError(ctx + " joins equal tiers; exactly one north hint required");
            if (b_below) std::swap(lower, upper);
            used_hints.insert({lower, upper});
        } else if (na.tier > nb.tier) {
            std::swap(lower, upper);
        }
        t.nodes_[lower.value].north_neighbors.push_back(upper);
        t.nodes_[upper.value].south_neighbors.push_back(lower);

        t.adjacency_[a.value].push_back({l.id, b});
        t.adjacency_[b.value].push_back({l.id, a});
        t.links_.push_back(std::move(l));
    }

    for (const auto& h : hints)
        if (!used_hints.contains(h))
            throw ValidationError("north hint " + t.nodes_[h.first.value].name + " -> " +
                                  t.nodes_[h.second.value].name +
                                  " does not match an equal-tier link");

    for (auto& n : t.nodes_) {
        sorted_unique(n.north_neighbors);
        sorted_unique(n.south_neighbors);
        if (n.tier == Tier::Cloud && !n.north_neighbors.empty())
            throw ValidationError("cloud node " + n.name + " has a north neighbor");
        if (n.tier == Tier::EdgeDevice && !n.south_neighbors.empty())
            throw ValidationError("edge node " + n.name + " has a south neighbor");
    }
    for (auto& adj : t.adjacency_)
        std::sort(adj.begin(), adj.end(), [](const Adjacency& x, const Adjacency& y) {
            return std::tie(x.peer, x.link) < std::tie(y.peer, y.link);
        });

    std::uint32_t diameter = 0;
    for (const auto& n : t.nodes_) {
        for (std::uint32_t d : hop_distances(t, n.id)) {
            if (d == kUnreachable) throw ValidationError("topology is disconnected");
            diameter = std::max(diameter, d);
        }
    }
    t.diameter_ = diameter;
    return t;
}

namespace {

std::string id_text(const nlohmann::json& v, const std::string& what) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(what + " must be a string or integer");
}

double number(const nlohmann::json& obj, const char* key, const std::string& what) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(what + " is missing '" + key + "'");
    if (!it->is_number()) throw ParseError(what + " field '" + key + "' must be a number");
    return it->get<double>();
}

}  // namespace

Topology load_topology(std::string_view config_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed topology: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("topology document must be an object");
    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw ParseError("topology requires a 'nodes' array");
    if (doc.contains("links") && !doc["links"].is_array())
        throw ParseError("'links' must be an array");

    TopologyBuilder builder;
    for (const auto& jn : doc["nodes"]) {
        if (!jn.is_object() || !jn.contains("id")) throw ParseError("node entry requires 'id'");
        const std::string name = id_text(jn["id"], "node id");
        const std::string what = "node " + name;
        if (!jn.contains("tier") || !jn["tier"].is_string())
            throw ParseError(what + " requires a string 'tier'");
        const std::string domain = jn.contains("domain") ? id_text(jn["domain"], what + " domain")
                                                         : std::string("default");
        const double compute =
            jn.contains("compute_capacity") ? number(jn, "compute_capacity", what) : 0.0;
        builder.add_node(name, parse_tier(jn["tier"].get<std::string>()), domain, compute);
        if (jn.contains("north")) {
            if (!jn["north"].is_array()) throw ParseError(what + " 'north' must be an array");
            for (const auto& up : jn["north"]) builder.hint_north(name, id_text(up, what + " north"));
        }
    }
    if (doc.contains("links")) {
        for (const auto& jl : doc["links"]) {
            if (!jl.is_object() || !jl.contains("id")) throw ParseError("link entry requires 'id'");
            const std::string name = id_text(jl["id"], "link id");
            const std::string what = "link " + name;
            if (!jl.contains("a") || !jl.contains("b"))
                throw ParseError(what + " requires endpoints 'a' and 'b'");
            builder.add_link(name, id_text(jl["a"], what + " a"), id_text(jl["b"], what + " b"),
                             number(jl, "capacity_kbps", what), number(jl, "latency_ms", what));
        }
    }
    return builder.build();
}

Topology load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open topology file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_topology(ss.str());
}

std::vector<std::uint32_t> hop_distances(const Topology& topology, NodeId from) {
    std::vector<std::uint32_t> dist(topology.node_count(), kUnreachable);
    std::queue<NodeId> q;
    dist[from.value] = 0;
    q.push(from);
    while (!q.empty()) {
        NodeId u = q.front();
        q.pop();
        for (const auto& adj : topology.adjacency(u)) {
            if (dist[adj.peer.value] != kUnreachable) continue;
            dist[adj.peer.value] = dist[u.value] + 1;
            q.push(adj.peer);
        }
    }
    return dist;
}

double control_latency_ms(const Topology& topology, NodeId from, NodeId to) {
    std::vector<double> dist(topology.node_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[from.value] = 0.0;
    pq.emplace(0.0, from.value);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        if (u == to.value) return d;
        for (const auto& adj : topology.adjacency(NodeId{u})) {
            double nd = d + topology.link(adj.link).latency_ms;
            if (nd < dist[adj.peer.value]) {
                dist[adj.peer.value] = nd;
                pq.emplace(nd, adj.peer.value);
            }
        }
    }
    return dist[to.value];
}

void validate_task_graph(std::span<const std::string> vertices, std::span<const TaskEdge> edges) {
    const std::size_t n = vertices.size();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.src >= n || e.dst >= n)
            throw DanglingEdgeError("task edge " + std::to_string(i) + " references vertex " +
                                    std::to_string(std::max(e.src, e.dst)) + " of " +
                                    std::to_string(n));
        out[e.src].push_back(e.dst);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (vertices[i].empty()) throw ValidationError("task vertex " + std::to_string(i) + " is empty");

    // Iterative DFS; a back edge closes a cycle through its target.
    enum class Color : std::uint8_t { White, Grey, Black };
    std::vector<Color> color(n, Color::White);
    for (std::size_t root = 0; root < n; ++root) {
        if (color[root] != Color::White) continue;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        color[root] = Color::Grey;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < out[v].size()) {
                std::size_t w = out[v][next++];
                if (color[w] == Color::Grey) throw CycleError(w, vertices[w]);
                if (color[w] == Color::White) {
                    color[w] = Color::Grey;
                    stack.emplace_back(w, 0);
                }
            } else {
                color[v] = Color::Black;
                stack.pop_back();
            }
        }
    }
}

TaskGraph::TaskGraph(std::vector<std::string> vertices, std::vector<TaskEdge> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
    validate_task_graph(vertices_, edges_);
}

}  // namespace sdfog
