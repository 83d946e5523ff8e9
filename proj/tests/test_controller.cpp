#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdfog/controller.hpp"
#include "sdfog/errors.hpp"

using namespace sdfog;

namespace {

ServiceMetadata svc(std::string type, std::string provider) {
    return {std::move(type), ProviderKind::Application, 0.0, {{"provider_id", std::move(provider)}}};
}

Topology chain3(double capacity = 1000.0, double compute = 4.0) {
    TopologyBuilder b;
    b.add_node("edge", Tier::EdgeDevice, "x", compute);
    b.add_node("gateway", Tier::Gateway, "x", compute);
    b.add_node("cloud", Tier::Cloud, "x", compute);
    b.add_link("l1", "edge", "gateway", capacity, 20);
    b.add_link("l2", "gateway", "cloud", capacity, 20);
    return b.build();
}

ServiceDescriptor at(const Topology& t, std::string_view node, std::string type = "s") {
    return {ServiceId{0}, svc(std::move(type), std::string(node)), t.node_id(node)};
}

// True when any exception nested inside `e` is an Inner.
template <class Inner>
bool nested_is(const std::exception& e) {
    try {
        std::rethrow_if_nested(e);
    } catch (const Inner&) {
        return true;
    } catch (const std::exception& inner) {
        return nested_is<Inner>(inner);
    }
    return false;
}

double total_reserved(const Topology& t, LinkId l) { return t.link(l).reserved_kbps(); }

}  // namespace

TEST(Decompose, HshGraph) {
    TaskGraph g({"cctv-video", "hsh-alerts"}, {{0, 1, QoSRequirement::qos_aware(500)}});
    auto d = decompose_task(g);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].service_type, "cctv-video");
    EXPECT_EQ(d[0].out_edges, std::vector<std::size_t>{0});
    EXPECT_EQ(d[1].service_type, "hsh-alerts");
    EXPECT_TRUE(d[1].out_edges.empty());
    EXPECT_TRUE(decompose_task(TaskGraph{}).empty());
}

TEST(Decompose, TopologicalOnRandomDags) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 9;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::string> names(n, "v");
        std::vector<TaskEdge> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng() % 3 == 0) edges.push_back({perm[i], perm[j], {}});
        auto order = decompose_task(TaskGraph(names, edges));
        ASSERT_EQ(order.size(), n);
        std::vector<std::size_t> pos(n);
        for (std::size_t k = 0; k < n; ++k) pos[order[k].vertex] = k;
        for (const auto& e : edges) EXPECT_LT(pos[e.src], pos[e.dst]);
        // Kahn with smallest-index-first.
        std::vector<std::size_t> indeg(n, 0);
        for (const auto& e : edges) ++indeg[e.dst];
        std::set<std::size_t> ready;
        for (std::size_t v = 0; v < n; ++v)
            if (!indeg[v]) ready.insert(v);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t v = *ready.begin();
            ready.erase(ready.begin());
            EXPECT_EQ(order[k].vertex, v);
            for (const auto& e : edges)
                if (e.src == v && --indeg[e.dst] == 0) ready.insert(e.dst);
        }
    }
}

TEST(PlanFlow, ChainQos) {
    Topology t = chain3();
    FlowPlan p = plan_flow(t, at(t, "edge"), at(t, "cloud"), QoSRequirement::qos_aware(500, 100), FlowId{1});
    EXPECT_EQ(p.path.size(), 2u);
    EXPECT_DOUBLE_EQ(p.latency_ms, 40.0);
    EXPECT_DOUBLE_EQ(p.reserved_kbps, 500.0);
    ASSERT_EQ(p.vnf_placements.size(), 1u);
    EXPECT_EQ(p.vnf_placements[0].host, t.node_id("edge"));  // equal residuals: nearest the source
    EXPECT_EQ(p.flow_entries.size(), 3u);
    EXPECT_FALSE(p.flow_entries.at(t.node_id("cloud")).next_hop);
    EXPECT_EQ(p.flow_entries.at(t.node_id("edge")).next_hop, t.node_id("gateway"));
}

TEST(PlanFlow, DemandAboveCapacity) {
    Topology t = chain3();
    EXPECT_THROW(plan_flow(t, at(t, "edge"), at(t, "cloud"), QoSRequirement::qos_aware(1500), FlowId{1}),
                 NoPath);
}

TEST(PlanFlow, LatencyBudget) {
    Topology t = chain3();
    EXPECT_THROW(plan_flow(t, at(t, "edge"), at(t, "cloud"), QoSRequirement::qos_aware(100, 39), FlowId{1}),
                 LatencyBudgetExceeded);
}

TEST(PlanFlow, PicksFasterDisjointPath) {
    TopologyBuilder b;
    b.add_node("s", Tier::Gateway, "x", 1);
    b.add_node("fast", Tier::Backbone, "x", 1);
    b.add_node("slow", Tier::Backbone, "x", 1);
    b.add_node("d", Tier::Cloud, "x", 1);
    b.add_link("s-slow", "s", "slow", 1000, 25);
    b.add_link("slow-d", "slow", "d", 1000, 25);
    b.add_link("s-fast", "s", "fast", 1000, 5);
    b.add_link("fast-d", "fast", "d", 1000, 5);
    Topology t = b.build();
    FlowPlan p = plan_flow(t, at(t, "s"), at(t, "d"), QoSRequirement::qos_aware(100), FlowId{1});
    EXPECT_EQ(p.node_sequence[1], t.node_id("fast"));
    EXPECT_DOUBLE_EQ(p.latency_ms, 10.0);
}

TEST(PlanFlow, VnfAtBottleneckUpstream) {
    Topology t = chain3();
    t.reserve(LinkId{1}, FlowId{99}, 300);
    FlowPlan p = plan_flow(t, at(t, "edge"), at(t, "cloud"), QoSRequirement::qos_aware(500), FlowId{1});
    ASSERT_EQ(p.vnf_placements.size(), 1u);
    EXPECT_EQ(p.vnf_placements[0].host, t.node_id("gateway"));
    // Reversed direction: upstream is now the cloud side.
    FlowPlan back = plan_flow(t, at(t, "cloud"), at(t, "edge"), QoSRequirement::qos_aware(500), FlowId{2});
    EXPECT_EQ(back.vnf_placements[0].host, t.node_id("cloud"));
}

TEST(PlanFlow, BestEffortIsMinHopWithoutReservation) {
    TopologyBuilder b;
    b.add_node("s", Tier::Gateway, "x", 1);
    b.add_node("m", Tier::Backbone, "x", 1);
    b.add_node("d", Tier::Cloud, "x", 1);
    b.add_link("sm", "s", "m", 10, 1);
    b.add_link("md", "m", "d", 10, 1);
    b.add_link("sd", "s", "d", 10, 100);
    Topology t = b.build();
    FlowPlan p = plan_flow(t, at(t, "s"), at(t, "d"), QoSRequirement::best_effort(), FlowId{1});
    EXPECT_EQ(p.path, std::vector<LinkId>{*t.find_link("sd")});
    EXPECT_TRUE(p.vnf_placements.empty());
    EXPECT_DOUBLE_EQ(p.reserved_kbps, 0.0);
}

TEST(PlanFlow, SameHostIsEmptyPath) {
    Topology t = chain3();
    FlowPlan p = plan_flow(t, at(t, "gateway", "a"), at(t, "gateway", "b"), QoSRequirement::qos_aware(50),
                           FlowId{1});
    EXPECT_TRUE(p.path.empty());
    EXPECT_EQ(p.node_sequence, std::vector<NodeId>{t.node_id("gateway")});
    EXPECT_EQ(p.flow_entries.size(), 1u);
}

TEST(RoutingProperty, MatchesExhaustiveEnumeration) {
    std::mt19937_64 rng(41);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        Topology t = oracle::random_topology(rng);
        for (const auto& l : t.links())
            if (rng() % 3 == 0) t.reserve(l.id, FlowId{1000}, std::floor(l.capacity_kbps * 0.5));
        NodeId s{static_cast<std::uint32_t>(rng() % t.node_count())};
        NodeId d{static_cast<std::uint32_t>(rng() % t.node_count())};
        if (s == d) continue;
        const double bw = std::uniform_real_distribution<double>(0, 1200)(rng);
        auto qos = QoSRequirement::qos_aware(bw);
        auto expect = oracle::best_path(
            t, s, d, [&](const Link& l) { return l.residual_kbps() >= bw; },
            [](const Link& l) { return oracle::micros(l.latency_ms); });
        ServiceDescriptor src{ServiceId{1}, svc("a", "a"), s}, dst{ServiceId{2}, svc("b", "b"), d};
        if (!expect) {
            EXPECT_THROW(plan_flow(t, src, dst, qos, FlowId{1}), NoPath);
            continue;
        }
        FlowPlan p = plan_flow(t, src, dst, qos, FlowId{1});
        ASSERT_EQ(p.node_sequence, expect->nodes);
        ASSERT_EQ(p.path, expect->links);
        ++checked;

        // Bottleneck: minimum residual, nearest the source on ties.
        std::size_t k = 0;
        for (std::size_t i = 1; i < p.path.size(); ++i)
            if (t.link(p.path[i]).residual_kbps() < t.link(p.path[k]).residual_kbps()) k = i;
        ASSERT_EQ(p.vnf_placements.size(), 1u);
        EXPECT_EQ(p.vnf_placements[0].host, p.node_sequence[k]);

        auto hop = oracle::best_path(
            t, s, d, [](const Link&) { return true; }, [](const Link&) { return std::int64_t{1}; });
        FlowPlan be = plan_flow(t, src, dst, QoSRequirement::best_effort(), FlowId{2});
        EXPECT_EQ(be.node_sequence, hop->nodes);
        EXPECT_EQ(be.path, hop->links);
    }
    EXPECT_GT(checked, 100);
}

struct ChainController : ::testing::Test {
    Controller c{chain3()};
    ServiceDescriptor src, dst;

    void SetUp() override {
        const Topology& t = c.topology();
        src = c.descriptor(c.register_service(t.node_id("edge"), svc("camera", "cam")));
        dst = c.descriptor(c.register_service(t.node_id("cloud"), svc("alerts", "alerts")));
    }
};

TEST_F(ChainController, InstallAppliesEntriesVnfAndLedger) {
    Flow f = c.install_flow(c.create_flow(src, dst, QoSRequirement::qos_aware(500, 100)));
    const Topology& t = c.topology();
    std::size_t entries = 0, vnfs = 0;
    for (const auto& n : t.nodes()) {
        entries += c.agent(n.id).flow_table.count(f.id);
        for (const auto& [i, a] : c.agent(n.id).apps) vnfs += a.flow == f.id;
    }
    EXPECT_EQ(entries, 3u);
    EXPECT_EQ(vnfs, 1u);
    EXPECT_DOUBLE_EQ(total_reserved(t, LinkId{0}), 500.0);
    EXPECT_DOUBLE_EQ(total_reserved(t, LinkId{1}), 500.0);
}

TEST_F(ChainController, SaturateThenStale) {
    auto qos = QoSRequirement::qos_aware(500);
    FlowPlan p1 = c.create_flow(src, dst, qos);
    FlowPlan p2 = c.create_flow(src, dst, qos);
    FlowPlan p3 = c.create_flow(src, dst, qos);
    c.install_flow(p1);
    c.install_flow(p2);
    EXPECT_DOUBLE_EQ(c.topology().link(LinkId{0}).residual_kbps(), 0.0);
    auto before = c.snapshot();
    EXPECT_THROW(c.install_flow(p3), StaleReservation);
    EXPECT_EQ(c.snapshot(), before);
    EXPECT_THROW(c.create_flow(src, dst, qos), NoPath);
}

TEST_F(ChainController, BestEffortLeavesLedger) {
    Flow f = c.install_flow(c.create_flow(src, dst, QoSRequirement::best_effort()));
    EXPECT_DOUBLE_EQ(total_reserved(c.topology(), LinkId{0}), 0.0);
    EXPECT_EQ(c.agent(c.topology().node_id("gateway")).flow_table.count(f.id), 1u);
}

TEST_F(ChainController, ReleaseIsExactInverse) {
    auto before = c.snapshot();
    Flow f = c.install_flow(c.create_flow(src, dst, QoSRequirement::qos_aware(300)));
    c.release_flow(f.id);
    EXPECT_EQ(c.snapshot(), before);
    EXPECT_THROW(c.release_flow(f.id), UnknownFlow);
    EXPECT_THROW(c.release_flow(FlowId{77}), UnknownFlow);
}

TEST_F(ChainController, ReleaseOneOfTwo) {
    Flow a = c.install_flow(c.create_flow(src, dst, QoSRequirement::qos_aware(300)));
    Flow b = c.install_flow(c.create_flow(src, dst, QoSRequirement::qos_aware(200)));
    c.release_flow(a.id);
    const Link& l = c.topology().link(LinkId{1});
    EXPECT_EQ(l.reservations, (std::map<FlowId, double>{{b.id, 200.0}}));
}

TEST_F(ChainController, OfflineAgentFailsInstall) {
    FlowPlan p = c.create_flow(src, dst, QoSRequirement::qos_aware(300));
    c.set_agent_online(c.topology().node_id("gateway"), false);
    auto before = c.snapshot();
    EXPECT_THROW(c.install_flow(p), AgentFailure);
    EXPECT_EQ(c.snapshot(), before);
}

TEST(Orchestrate, HshEmergencyTask) {
    TopologyBuilder b;
    b.add_node("gateway", Tier::Gateway, "home", 4);
    b.add_node("backbone", Tier::Backbone, "isp", 8);
    b.add_node("cloud", Tier::Cloud, "dc", 64);
    b.add_link("access", "gateway", "backbone", 10000, 2);
    b.add_link("backbone", "backbone", "cloud", 1000, 20);
    Controller c(b.build());
    const Topology& t = c.topology();
    c.register_service(t.node_id("gateway"), svc("cctv-video", "cam"));
    c.register_service(t.node_id("cloud"), svc("hsh-alerts", "hsh"));
    TaskGraph task({"cctv-video", "hsh-alerts"}, {{0, 1, QoSRequirement::qos_aware(500)}});
    auto report = c.orchestrate(task, t.node_id("gateway"));
    ASSERT_EQ(report.flows.size(), 1u);
    const Flow& f = report.flows[0];
    EXPECT_EQ(f.node_sequence.front(), t.node_id("gateway"));
    EXPECT_EQ(f.node_sequence.back(), t.node_id("cloud"));
    ASSERT_EQ(f.vnfs.size(), 1u);
    EXPECT_EQ(f.vnfs[0].host, t.node_id("backbone"));  // upstream of the 1 Mbps backbone
    EXPECT_EQ(report.discovery_route, (std::vector<std::string>{"local", "recursive"}));
}

TEST(Orchestrate, MissingTypeRollsBackEverything) {
    Controller c(chain3(), {{"made", {1.0, 0.0}}});
    const Topology& t = c.topology();
    c.register_service(t.node_id("edge"), svc("camera", "cam"));
    TaskGraph task({"camera", "made", "ghost"},
                   {{0, 1, QoSRequirement::qos_aware(100)}, {1, 2, QoSRequirement::best_effort()}});
    auto before = c.snapshot();
    try {
        c.orchestrate(task, t.node_id("edge"));
        FAIL() << "expected OrchestrationError";
    } catch (const OrchestrationError& e) {
        EXPECT_EQ(e.stage(), OrchestrationError::Stage::Discovery);
        EXPECT_EQ(e.index(), 2u);
        EXPECT_TRUE(nested_is<NoSuchAppTemplate>(e));
    }
    EXPECT_EQ(c.snapshot(), before);
    EXPECT_TRUE(c.flows().empty());
}

TEST(Orchestrate, SecondEdgeInfeasibleRollsBackFirst) {
    Controller c(chain3());
    const Topology& t = c.topology();
    c.register_service(t.node_id("edge"), svc("a", "a"));
    c.register_service(t.node_id("gateway"), svc("b", "b"));
    c.register_service(t.node_id("cloud"), svc("c", "c"));
    TaskGraph task({"a", "b", "c"},
                   {{0, 1, QoSRequirement::qos_aware(600)}, {1, 2, QoSRequirement::qos_aware(2000)}});
    auto before = c.snapshot();
    try {
        c.orchestrate(task, t.node_id("edge"));
        FAIL() << "expected OrchestrationError";
    } catch (const OrchestrationError& e) {
        EXPECT_EQ(e.stage(), OrchestrationError::Stage::Creation);
        EXPECT_EQ(e.index(), 1u);
        EXPECT_TRUE(nested_is<NoPath>(e));
    }
    EXPECT_EQ(c.snapshot(), before);
}

TEST(AdmissionProperty, RandomOrchestrateReleaseSequences) {
    std::mt19937_64 rng(99);
    for (int world = 0; world < 5; ++world) {
        oracle::RandomGraphOptions o;
        o.max_nodes = 8;
        o.min_nodes = 4;
        Controller c(oracle::random_topology(rng, o), {{"spawned", {1.0, 0.0}}});
        const Topology& t = c.topology();
        const std::vector<std::string> types{"a", "b", "c", "spawned"};
        for (int i = 0; i < 6; ++i)
            c.register_service(NodeId{static_cast<std::uint32_t>(rng() % t.node_count())},
                               svc(types[rng() % 3], "p" + std::to_string(i)));
        for (int step = 0; step < 300; ++step) {
            if (!c.flows().empty() && rng() % 3 == 0) {
                auto it = c.flows().begin();
                std::advance(it, static_cast<long>(rng() % c.flows().size()));
                c.release_flow(it->first);
            } else {
                const std::size_t n = 2 + rng() % 2;
                std::vector<std::string> vs;
                for (std::size_t i = 0; i < n; ++i) vs.push_back(types[rng() % types.size()]);
                std::vector<TaskEdge> es;
                for (std::size_t i = 0; i + 1 < n; ++i)
                    es.push_back({i, i + 1,
                                  rng() % 4 ? QoSRequirement::qos_aware(std::floor(std::uniform_real_distribution<double>(50, 900)(rng)))
                                            : QoSRequirement::best_effort()});
                NodeId origin{static_cast<std::uint32_t>(rng() % t.node_count())};
                auto before = c.snapshot();
                try {
                    c.orchestrate(TaskGraph(vs, es), origin);
                } catch (const OrchestrationError&) {
                    ASSERT_EQ(c.snapshot(), before);
                }
            }
            for (const auto& l : t.links()) ASSERT_LE(l.reserved_kbps(), l.capacity_kbps + 1e-9);
            for (const auto& [id, f] : c.flows()) {
                std::set<NodeId> seen(f.node_sequence.begin(), f.node_sequence.end());
                ASSERT_EQ(seen.size(), f.node_sequence.size());
                for (std::size_t i = 0; i < f.path.size(); ++i) {
                    const Link& l = t.link(f.path[i]);
                    ASSERT_TRUE(l.touches(f.node_sequence[i]) && l.touches(f.node_sequence[i + 1]));
                }
            }
        }
    }
}

TEST(FlowsCsv, Columns) {
    Controller c(chain3());
    const Topology& t = c.topology();
    auto s = c.descriptor(c.register_service(t.node_id("edge"), svc("a", "a")));
    auto d = c.descriptor(c.register_service(t.node_id("cloud"), svc("b", "b")));
    c.install_flow(c.create_flow(s, d, QoSRequirement::qos_aware(500)));
    std::vector<Flow> flows;
    for (const auto& [id, f] : c.flows()) flows.push_back(f);
    std::string csv = flows_to_csv(t, flows);
    EXPECT_EQ(csv.rfind("flow_id,src,dst,policy,path,latency_ms,reserved_kbps\n", 0), 0u);
    EXPECT_NE(csv.find("edge>gateway>cloud"), std::string::npos);
    EXPECT_NE(csv.find(",qos,"), std::string::npos);
}
