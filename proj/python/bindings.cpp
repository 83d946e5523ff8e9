#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdfog/controller.hpp"
#include "sdfog/errors.hpp"
#include "sdfog/netsim.hpp"
#include "sdfog/scenarios.hpp"

namespace py = pybind11;
using namespace sdfog;

namespace {

std::vector<std::string> names(const Topology& t, const std::vector<NodeId>& nodes) {
    std::vector<std::string> out;
    for (NodeId n : nodes) out.push_back(t.node(n).name);
    return out;
}

py::dict flow_dict(const Topology& t, const Flow& f) {
    py::dict d;
    d["id"] = f.id.value;
    d["policy"] = std::string(to_string(f.qos.policy));
    d["nodes"] = names(t, f.node_sequence);
    std::vector<std::string> links;
    for (LinkId l : f.path) links.push_back(t.link(l).name);
    d["links"] = links;
    d["latency_ms"] = f.latency_ms;
    d["reserved_kbps"] = f.reserved_kbps;
    std::vector<std::string> vnfs;
    for (const auto& v : f.vnfs) vnfs.push_back(t.node(v.host).name);
    d["vnf_hosts"] = vnfs;
    return d;
}

QoSRequirement qos_from(const std::string& policy, double kbps, std::optional<double> max_latency) {
    if (policy == "qos") return QoSRequirement::qos_aware(kbps, max_latency);
    if (policy == "best-effort") return QoSRequirement::best_effort();
    throw ParseError("policy must be 'qos' or 'best-effort'");
}

Policy policy_from(const std::string& text) {
    return qos_from(text, 0.0, std::nullopt).policy;
}

py::dict run_dict(const RunResult& r) {
    py::dict d;
    d["mode"] = std::string(to_string(r.mode));
    d["policy"] = std::string(to_string(r.policy));
    d["users"] = r.users;
    d["mean_quality"] = r.metrics.mean_quality;
    d["quality_stddev"] = r.metrics.quality_stddev;
    d["per_frame_quality"] = r.metrics.per_frame_quality;
    d["abort_time_ms"] = r.metrics.abort_time_ms;
    d["detection_ms"] = r.detection_ms;
    d["backup_delivered_bytes"] = r.backup_delivered_bytes;
    d["milestones"] = r.milestones;
    d["trace_csv"] = r.trace.to_csv();
    d["discovery_csv"] = r.discovery_csv;
    d["flows_csv"] = r.flows_csv;
    return d;
}

}  // namespace

PYBIND11_MODULE(_sdfog, m) {
    m.doc() = "Software-defined fog orchestration and fluid-flow simulation";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<NoPath>(m, "NoPath", base);
    py::register_exception<StaleReservation>(m, "StaleReservation", base);
    py::register_exception<OrchestrationError>(m, "OrchestrationError", base);
    py::register_exception<ScenarioFailure>(m, "ScenarioFailure", base);

    py::class_<Topology>(m, "Topology")
        .def_property_readonly("node_names",
                               [](const Topology& t) {
                                   std::vector<std::string> out;
                                   for (const auto& n : t.nodes()) out.push_back(n.name);
                                   return out;
                               })
        .def_property_readonly("diameter", &Topology::diameter)
        .def("link", [](const Topology& t, const std::string& name) {
            auto id = t.find_link(name);
            if (!id) throw ValidationError("unknown link " + name);
            const Link& l = t.link(*id);
            py::dict d;
            d["a"] = t.node(l.endpoint_a).name;
            d["b"] = t.node(l.endpoint_b).name;
            d["capacity_kbps"] = l.capacity_kbps;
            d["latency_ms"] = l.latency_ms;
            d["reserved_kbps"] = l.reserved_kbps();
            return d;
        })
        .def("north", [](const Topology& t, const std::string& n) { return names(t, t.node(t.node_id(n)).north_neighbors); })
        .def("south", [](const Topology& t, const std::string& n) { return names(t, t.node(t.node_id(n)).south_neighbors); });

    m.def("load_topology", [](const std::string& text) { return load_topology(text); }, py::arg("text"));
    m.def("default_hsh_topology", [] { return std::string(default_hsh_topology()); });

    m.def(
        "compute_link_rates",
        [](const Topology& t, const std::vector<py::dict>& flows) {
            std::vector<RateDemand> demands;
            for (const auto& f : flows) {
                RateDemand d;
                d.flow = FlowId{f["id"].cast<std::uint32_t>()};
                for (const auto& l : f["links"].cast<std::vector<std::string>>()) {
                    auto id = t.find_link(l);
                    if (!id) throw ValidationError("unknown link " + l);
                    d.path.push_back(*id);
                }
                d.policy = policy_from(f.contains("policy") ? f["policy"].cast<std::string>() : "best-effort");
                d.demand_kbps = f.contains("demand_kbps") ? f["demand_kbps"].cast<double>() : kGreedy;
                d.reserved_kbps = f.contains("reserved_kbps") ? f["reserved_kbps"].cast<double>() : 0.0;
                demands.push_back(std::move(d));
            }
            std::map<std::uint32_t, double> out;
            for (const auto& [id, r] : compute_link_rates(t, demands)) out[id.value] = r;
            return out;
        },
        py::arg("topology"), py::arg("flows"),
        "flows: dicts with id, links (names), optional policy, demand_kbps, reserved_kbps");

    py::class_<Controller>(m, "Controller")
        .def(py::init([](const Topology& t, const std::map<std::string, std::pair<double, double>>& catalog) {
                 AppCatalog c;
                 for (const auto& [k, v] : catalog) c[k] = AppTemplate{v.first, v.second};
                 return std::make_unique<Controller>(t, std::move(c));
             }),
             py::arg("topology"), py::arg("catalog") = std::map<std::string, std::pair<double, double>>{})
        .def_property_readonly("topology", &Controller::topology, py::return_value_policy::reference_internal)
        .def(
            "register_service",
            [](Controller& c, const std::string& node, const std::string& type, const std::string& provider,
               double rate) {
                ServiceMetadata md{type, ProviderKind::Application, rate, {}};
                if (!provider.empty()) md.attributes["provider_id"] = provider;
                return c.register_service(c.topology().node_id(node), md).value;
            },
            py::arg("node"), py::arg("service_type"), py::arg("provider") = "", py::arg("rate_kbps") = 0.0)
        .def(
            "discover",
            [](const Controller& c, const std::string& origin, const std::string& type,
               std::optional<std::uint32_t> ttl) {
                DiscoveryQuery q{c.topology().node_id(origin), type, ttl.value_or(c.topology().diameter())};
                auto r = c.discover(q);
                py::dict d;
                std::vector<std::uint32_t> ids;
                for (const auto& s : r.descriptors) ids.push_back(s.id.value);
                d["services"] = ids;
                d["messages"] = r.messages_sent;
                std::vector<NodeId> visited(r.nodes_visited.begin(), r.nodes_visited.end());
                d["visited"] = names(c.topology(), visited);
                return d;
            },
            py::arg("origin"), py::arg("service_type"), py::arg("ttl") = std::nullopt)
        .def(
            "install_flow",
            [](Controller& c, std::uint32_t src, std::uint32_t dst, const std::string& policy, double kbps,
               std::optional<double> max_latency) {
                auto plan = c.create_flow(c.descriptor(ServiceId{src}), c.descriptor(ServiceId{dst}),
                                          qos_from(policy, kbps, max_latency));
                return flow_dict(c.topology(), c.install_flow(plan));
            },
            py::arg("src"), py::arg("dst"), py::arg("policy") = "qos", py::arg("bandwidth_kbps") = 0.0,
            py::arg("max_latency_ms") = std::nullopt)
        .def("release_flow", [](Controller& c, std::uint32_t id) { c.release_flow(FlowId{id}); })
        .def(
            "orchestrate",
            [](Controller& c, const std::vector<std::string>& vertices,
               const std::vector<std::tuple<std::size_t, std::size_t, std::string, double>>& edges,
               const std::string& origin) {
                std::vector<TaskEdge> es;
                for (const auto& [s, d, p, k] : edges) es.push_back({s, d, qos_from(p, k, std::nullopt)});
                auto report = c.orchestrate(TaskGraph(vertices, es), c.topology().node_id(origin));
                py::list flows;
                for (const auto& f : report.flows) flows.append(flow_dict(c.topology(), f));
                return flows;
            },
            py::arg("vertices"), py::arg("edges"), py::arg("origin"))
        .def("flows", [](const Controller& c) {
            py::list out;
            for (const auto& [id, f] : c.flows()) out.append(flow_dict(c.topology(), f));
            return out;
        });

    py::class_<ScenarioConfig>(m, "ScenarioConfig")
        .def(py::init<>())
        .def_static("load", &load_scenario_config, py::arg("path"))
        .def_static("parse", &parse_scenario_config, py::arg("text"), py::arg("base_dir") = "")
        .def_readwrite("topology_file", &ScenarioConfig::topology_file)
        .def_readwrite("background_users", &ScenarioConfig::background_users)
        .def_readwrite("background_rate_kbps", &ScenarioConfig::background_rate_kbps)
        .def_readwrite("backbone_capacity_kbps", &ScenarioConfig::backbone_capacity_kbps)
        .def_readwrite("backbone_latency_ms", &ScenarioConfig::backbone_latency_ms)
        .def_readwrite("reservation_kbps", &ScenarioConfig::reservation_kbps)
        .def_readwrite("duration_ms", &ScenarioConfig::duration_ms)
        .def_readwrite("seed", &ScenarioConfig::seed)
        .def_readwrite("backup_rate_kbps", &ScenarioConfig::backup_rate_kbps)
        .def_readwrite("fall_at_ms", &ScenarioConfig::fall_at_ms)
        .def_readwrite("abort_applies_to_qos", &ScenarioConfig::abort_applies_to_qos)
        .def_readwrite("sweep_users", &ScenarioConfig::sweep_users);

    m.def("run_emergency", [](const ScenarioConfig& c, const std::string& policy) {
        py::gil_scoped_release nogil;
        RunResult r = run_emergency_mode(c, policy_from(policy));
        py::gil_scoped_acquire gil;
        return run_dict(r);
    }, py::arg("config"), py::arg("policy") = "qos");
    m.def("run_normal", [](const ScenarioConfig& c, const std::string& policy) {
        return run_dict(run_normal_mode(c, policy_from(policy)));
    }, py::arg("config"), py::arg("emergency_policy") = "qos");
    m.def("run_sweep", [](const ScenarioConfig& c) {
        std::vector<SweepRow> rows;
        {
            py::gil_scoped_release nogil;
            rows = run_sweep(c);
        }
        return sweep_to_csv(rows);
    }, py::arg("config"), "Metrics CSV of the congestion sweep");
}
