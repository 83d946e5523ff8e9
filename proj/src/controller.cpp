#include "sdfog/controller.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "sdfog/errors.hpp"

namespace sdfog {

std::vector<DecomposedService> decompose_task(const TaskGraph& graph) {
    const auto& vertices = graph.vertices();
    const auto& edges = graph.edges();
    std::vector<std::size_t> indegree(vertices.size(), 0);
    std::vector<std::vector<std::size_t>> out(vertices.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        ++indegree[edges[i].dst];
        out[edges[i].src].push_back(i);
    }

    // Kahn's algorithm with the smallest ready vertex index first.
    std::set<std::size_t> ready;
    for (std::size_t v = 0; v < vertices.size(); ++v)
        if (indegree[v] == 0) ready.insert(v);

    std::vector<DecomposedService> order;
    while (!ready.empty()) {
        std::size_t v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back({v, vertices[v], out[v]});
        for (std::size_t e : out[v])
            if (--indegree[edges[e].dst] == 0) ready.insert(edges[e].dst);
    }
    return order;
}

Controller::Controller(Topology topology, AppCatalog catalog, ControllerOptions options)
    : topology_(std::move(topology)), catalog_(std::move(catalog)), options_(options) {
    registries_.reserve(topology_.node_count());
    agents_.reserve(topology_.node_count());
    for (const auto& n : topology_.nodes()) {
        registries_.emplace_back(n.id, ids_);
        registries_.back().set_observer([this](const RegistryChange& c) { index_.apply(c); });
        agents_.emplace_back().node = n.id;
    }
}

Registry& Controller::registry(NodeId node) {
    topology_.node(node);
    return registries_[node.value];
}

const Registry& Controller::registry(NodeId node) const {
    topology_.node(node);
    return registries_[node.value];
}

const ServiceDescriptor& Controller::descriptor(ServiceId id) const {
    if (const auto* d = index_.find(id)) return *d;
    throw UnknownService("service " + to_string(id) + " is not registered");
}

ServiceId Controller::register_service(NodeId host, ServiceMetadata metadata) {
    return registry(host).register_service(std::move(metadata));
}

NodeAgent& Controller::agent(NodeId node) {
    if (!topology_.has_node(node)) throw AgentFailure("no agent on node " + to_string(node));
    return agents_[node.value];
}

const NodeAgent& Controller::agent(NodeId node) const {
    if (!topology_.has_node(node)) throw AgentFailure("no agent on node " + to_string(node));
    return agents_[node.value];
}

void Controller::set_agent_online(NodeId node, bool online) { agent(node).online = online; }

DiscoveryResult Controller::discover(const DiscoveryQuery& query) const {
    return discover_recursive(topology_, registries_, query);
}

DiscoveryResult Controller::discover_via_controller(std::string_view service_type,
                                                    std::optional<DomainId> scope,
                                                    std::optional<NodeId> origin) const {
    return sdfog::discover_via_controller(topology_, index_, service_type, scope, origin);
}

ServiceDescriptor Controller::instantiate_service(std::string_view service_type) {
    auto tmpl = catalog_.find(service_type);
    if (tmpl == catalog_.end())
        throw NoSuchAppTemplate("no application template provides '" + std::string(service_type) +
                                "'");
    const AppTemplate& app = tmpl->second;

    std::optional<NodeId> best;
    double best_spare = -std::numeric_limits<double>::infinity();
    for (const auto& n : topology_.nodes()) {
        if (!agents_[n.id.value].online) continue;
        const double spare = n.spare_compute();
        // Nodes are visited in id order, so strict > keeps the lowest id on ties.
        if (spare + 1e-9 >= app.compute_demand && spare > best_spare) {
            best = n.id;
            best_spare = spare;
        }
    }
    if (!best)
        throw NoFeasibleNode("no node has " + std::to_string(app.compute_demand) +
                             " spare compute units for '" + std::string(service_type) + "'");

    // App Manager on the chosen node deploys the app, which then registers
    // its service on the node's middleware.
    const std::uint64_t instance = ids_.next_instance();
    ServiceMetadata meta;
    meta.service_type = std::string(service_type);
    meta.provider_kind = ProviderKind::Application;
    meta.nominal_data_rate_kbps = app.nominal_rate_kbps;
    meta.attributes["provider_id"] = "app-" + std::to_string(instance);

    topology_.allocate_compute(*best, app.compute_demand);
    ServiceId sid;
    try {
        sid = registries_[best->value].register_service(std::move(meta));
    } catch (...) {
        topology_.free_compute(*best, app.compute_demand);
        throw;
    }
    agents_[best->value].apps.emplace(
        instance, DeployedApp{instance, std::string(service_type), app.compute_demand, sid, {}});
    return *registries_[best->value].find(sid);
}

void Controller::retire_app(NodeId node, std::uint64_t instance) {
    NodeAgent& a = agent(node);
    auto it = a.apps.find(instance);
    if (it == a.apps.end())
        throw AgentFailure("node " + to_string(node) + " runs no app instance " +
                           std::to_string(instance));
    if (it->second.service) registries_[node.value].deregister_service(*it->second.service);
    topology_.free_compute(node, it->second.compute);
    a.apps.erase(it);
}

FlowPlan Controller::create_flow(const ServiceDescriptor& src, const ServiceDescriptor& dst,
                                 const QoSRequirement& qos) {
    FlowPlan plan = plan_flow(topology_, src, dst, qos, ids_.next_flow());
    return plan;
}

Flow Controller::install_flow(const FlowPlan& plan) {
    if (flows_.contains(plan.flow_id))
        throw ValidationError("flow " + to_string(plan.flow_id) + " is already installed");

    // Validate everything first so the apply phase cannot fail halfway.
    if (plan.node_sequence.empty() || plan.node_sequence.size() != plan.path.size() + 1)
        throw ValidationError("flow plan has an inconsistent node sequence");
    for (NodeId n : plan.node_sequence) {
        if (!topology_.has_node(n) || !agents_[n.value].online)
            throw AgentFailure("no reachable agent on node " + to_string(n));
    }
    for (std::size_t i = 0; i < plan.path.size(); ++i) {
        const Link& l = topology_.link(plan.path[i]);
        if (!l.touches(plan.node_sequence[i]) || l.peer(plan.node_sequence[i]) != plan.node_sequence[i + 1])
            throw ValidationError("flow plan link " + l.name + " does not join its nodes");
    }
    if (plan.qos.policy == Policy::QoSAware) {
        std::map<LinkId, double> need;
        for (LinkId l : plan.path) need[l] += plan.reserved_kbps;
        for (const auto& [id, kbps] : need) {
            const Link& l = topology_.link(id);
            if (l.residual_kbps() + 1e-9 < kbps)
                throw StaleReservation("link " + l.name + " has " +
                                       std::to_string(l.residual_kbps()) +
                                       " kbps residual, flow needs " + std::to_string(kbps));
        }
    }
    std::map<NodeId, double> vnf_compute;
    for (const auto& v : plan.vnf_placements) {
        if (std::find(plan.node_sequence.begin(), plan.node_sequence.end(), v.host) ==
            plan.node_sequence.end())
            throw ValidationError("VNF host " + to_string(v.host) + " is not on the flow path");
        vnf_compute[v.host] += options_.vnf_compute_units;
    }
    for (const auto& [host, units] : vnf_compute)
        if (topology_.node(host).spare_compute() + 1e-9 < units)
            throw AgentFailure("App Manager on node " + topology_.node(host).name +
                               " cannot host the VNF: insufficient compute");

    if (plan.qos.policy == Policy::QoSAware)
        for (LinkId l : plan.path) topology_.reserve(l, plan.flow_id, plan.reserved_kbps);
    for (const auto& [node, entry] : plan.flow_entries) agents_[node.value].flow_table[plan.flow_id] = entry;
    for (const auto& v : plan.vnf_placements) {
        topology_.allocate_compute(v.host, options_.vnf_compute_units);
        const std::uint64_t instance = ids_.next_instance();
        agents_[v.host.value].apps.emplace(
            instance,
            DeployedApp{instance, "bandwidth-reserver", options_.vnf_compute_units, {}, plan.flow_id});
    }

    Flow flow = to_flow(plan);
    flows_.emplace(flow.id, flow);
    return flow;
}

void Controller::release_flow(FlowId id) {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw UnknownFlow("flow " + to_string(id) + " is not installed");
    const Flow& flow = it->second;

    for (NodeId n : flow.node_sequence) agents_[n.value].flow_table.erase(id);
    for (auto& a : agents_) {
        for (auto app = a.apps.begin(); app != a.apps.end();) {
            if (app->second.flow == id) {
                topology_.free_compute(a.node, app->second.compute);
                app = a.apps.erase(app);
            } else {
                ++app;
            }
        }
    }
    for (LinkId l : flow.path) topology_.release(l, id);
    flows_.erase(it);
}

const Flow& Controller::flow(FlowId id) const {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw UnknownFlow("flow " + to_string(id) + " is not installed");
    return it->second;
}

ServiceDescriptor Controller::bind_vertex(const std::string& service_type, NodeId origin,
                                          const OrchestrateOptions& options,
                                          OrchestrationReport& report,
                                          std::vector<std::pair<NodeId, std::uint64_t>>& instantiated) {
    auto nearest = [](const DiscoveryResult& r) {
        const ServiceDescriptor* best = nullptr;
        for (const auto& d : r.descriptors) {
            if (!best || r.hop_distance.at(d.id) < r.hop_distance.at(best->id)) best = &d;
        }
        return *best;
    };

    DiscoveryQuery q{origin, service_type, options.discovery_ttl.value_or(topology_.diameter()),
                     options.discovery_scope, options.prune_on_match};
    DiscoveryResult r = discover(q);
    if (!r.descriptors.empty()) {
        ServiceDescriptor d = nearest(r);
        report.discovery_route.push_back(d.host == origin ? "local" : "recursive");
        report.discoveries.push_back(std::move(r));
        return d;
    }

    r = discover_via_controller(service_type, options.discovery_scope, origin);
    if (!r.descriptors.empty()) {
        ServiceDescriptor d = nearest(r);
        report.discovery_route.push_back("controller");
        report.discoveries.push_back(std::move(r));
        return d;
    }

    ServiceDescriptor d = instantiate_service(service_type);
    for (const auto& [instance, app] : agents_[d.host.value].apps)
        if (app.service == d.id) instantiated.emplace_back(d.host, instance);
    r.nodes_visited.insert(d.host);
    r.descriptors.push_back(d);
    r.hop_distance.emplace(d.id, hop_distances(topology_, origin)[d.host.value]);
    report.discovery_route.push_back("instantiated");
    report.discoveries.push_back(std::move(r));
    return d;
}

OrchestrationReport Controller::orchestrate(const TaskGraph& task, NodeId origin,
                                            const OrchestrateOptions& options) {
    if (!topology_.has_node(origin))
        throw UnknownOrigin("orchestration origin " + to_string(origin) + " does not exist");

    OrchestrationReport report;
    report.decomposition = decompose_task(task);
    std::vector<std::pair<NodeId, std::uint64_t>> instantiated;
    std::vector<FlowId> installed;

    auto rollback = [&] {
        for (auto it = installed.rbegin(); it != installed.rend(); ++it) release_flow(*it);
        for (auto it = instantiated.rbegin(); it != instantiated.rend(); ++it)
            retire_app(it->first, it->second);
    };

    using Stage = OrchestrationError::Stage;
    report.bindings.resize(task.vertices().size());
    for (const auto& svc : report.decomposition) {
        try {
            report.bindings[svc.vertex] =
                bind_vertex(svc.service_type, origin, options, report, instantiated);
        } catch (const Error& e) {
            rollback();
            std::throw_with_nested(OrchestrationError(
                Stage::Discovery, svc.vertex,
                "discovery of '" + svc.service_type + "' failed: " + e.what()));
        }
    }

    for (const auto& svc : report.decomposition) {
        for (std::size_t e : svc.out_edges) {
            const TaskEdge& edge = task.edges()[e];
            Stage stage = Stage::Creation;
            try {
                FlowPlan plan = create_flow(report.bindings[edge.src], report.bindings[edge.dst],
                                            edge.qos);
                stage = Stage::Installation;
                Flow flow = install_flow(plan);
                installed.push_back(flow.id);
                report.plans.push_back(std::move(plan));
                report.flows.push_back(std::move(flow));
            } catch (const Error& ex) {
                rollback();
                std::throw_with_nested(OrchestrationError(
                    stage, e,
                    std::string(stage == Stage::Creation ? "flow creation" : "flow installation") +
                        " failed for edge " + std::to_string(e) + ": " + ex.what()));
            }
        }
    }
    return report;
}

ControllerSnapshot Controller::snapshot() const {
    ControllerSnapshot s;
    s.links.assign(topology_.links().begin(), topology_.links().end());
    s.nodes.assign(topology_.nodes().begin(), topology_.nodes().end());
    s.agents = agents_;
    for (const auto& r : registries_) s.registries.push_back(r.entries());
    s.flows = flows_;
    return s;
}

std::string flows_to_csv(const Topology& topology, std::span<const Flow> flows, bool header) {
    std::ostringstream os;
    if (header) os << "flow_id,src,dst,policy,path,latency_ms,reserved_kbps\n";
    for (const auto& f : flows) {
        os << f.id << ',' << f.src.metadata.service_type << '@' << topology.node(f.src.host).name
           << ',' << f.dst.metadata.service_type << '@' << topology.node(f.dst.host).name << ','
           << to_string(f.qos.policy) << ',';
        for (std::size_t i = 0; i < f.node_sequence.size(); ++i) {
            if (i) os << '>';
            os << topology.node(f.node_sequence[i]).name;
        }
        char buf[96];
        std::snprintf(buf, sizeof buf, ",%.3f,%.3f\n", f.latency_ms, f.reserved_kbps);
        os << buf;
    }
    return os.str();
}

}  // namespace sdfog
