#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdfog/netsim.hpp"

using namespace sdfog;

namespace {

// Star of `caps.size()` links around a backbone node; link ids follow `caps`.
Topology star(const std::vector<double>& caps) {
    TopologyBuilder b;
    b.add_node("hub", Tier::Backbone, "x", 1);
    for (std::size_t i = 0; i < caps.size(); ++i) {
        b.add_node("leaf" + std::to_string(i), Tier::Gateway, "x", 1);
        b.add_link("l" + std::to_string(i), "leaf" + std::to_string(i), "hub", caps[i], 1);
    }
    return b.build();
}

RateDemand be(std::uint32_t id, std::vector<std::uint32_t> links, double demand = kGreedy) {
    RateDemand d{FlowId{id}, {}, Policy::BestEffort, demand, 0.0};
    for (auto l : links) d.path.push_back(LinkId{l});
    return d;
}

RateDemand reserved(std::uint32_t id, std::vector<std::uint32_t> links, double kbps,
                    double demand = kGreedy) {
    RateDemand d = be(id, std::move(links), demand);
    d.policy = Policy::QoSAware;
    d.reserved_kbps = kbps;
    return d;
}

}  // namespace

TEST(LinkRates, ReservedPlusTwoGreedy) {
    Topology t = star({1000});
    std::vector<RateDemand> f{reserved(1, {0}, 500), be(2, {0}), be(3, {0})};
    auto r = compute_link_rates(t, f);
    EXPECT_DOUBLE_EQ(r.at(FlowId{1}), 500);
    EXPECT_DOUBLE_EQ(r.at(FlowId{2}), 250);
    EXPECT_DOUBLE_EQ(r.at(FlowId{3}), 250);
}

TEST(LinkRates, TwoLinkWaterFill) {
    Topology t = star({1000, 500});
    std::vector<RateDemand> f{be(1, {0, 1}), be(2, {1})};
    auto r = compute_link_rates(t, f);
    EXPECT_DOUBLE_EQ(r.at(FlowId{1}), 250);
    EXPECT_DOUBLE_EQ(r.at(FlowId{2}), 250);
}

TEST(LinkRates, Empty) {
    Topology t = star({1000});
    EXPECT_TRUE(compute_link_rates(t, {}).empty());
}

TEST(LinkRates, DemandCapRedistributes) {
    Topology t = star({1000});
    std::vector<RateDemand> f{be(1, {0}, 100), be(2, {0})};
    auto r = compute_link_rates(t, f);
    EXPECT_DOUBLE_EQ(r.at(FlowId{1}), 100);
    EXPECT_DOUBLE_EQ(r.at(FlowId{2}), 900);
}

TEST(LinkRates, ReservedRespectsSmallerDemand) {
    Topology t = star({1000});
    std::vector<RateDemand> f{reserved(1, {0}, 500, 200), be(2, {0})};
    auto r = compute_link_rates(t, f);
    EXPECT_DOUBLE_EQ(r.at(FlowId{1}), 200);
    EXPECT_DOUBLE_EQ(r.at(FlowId{2}), 800);
}

TEST(LinkRates, HshBackboneShares) {
    Topology t = star({1000});
    for (int users : {0, 2, 4, 8, 12, 16, 20}) {
        std::vector<RateDemand> f{be(0, {0}, 500)};
        for (int u = 1; u <= users; ++u) f.push_back(be(static_cast<std::uint32_t>(u), {0}, 250));
        const double video = compute_link_rates(t, f).at(FlowId{0});
        const double share = 1000.0 / (users + 1);
        const double expect = share >= 250.0 ? std::min(500.0, 1000.0 - 250.0 * users) : share;
        EXPECT_NEAR(video, expect, 1e-9)
            << users;
    }
}

TEST(MaxMinProperty, MatchesWaterFillingOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> cap(10, 2000);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t links = 1 + rng() % 6;
        std::vector<double> caps(links);
        for (auto& c : caps) c = std::round(cap(rng));
        Topology t = star(caps);

        const std::size_t flows = rng() % 9;
        std::vector<RateDemand> demands;
        std::vector<oracle::FlowSpec> specs;
        std::vector<double> reservable = caps;
        for (std::size_t f = 0; f < flows; ++f) {
            oracle::FlowSpec s;
            for (std::size_t l = 0; l < links; ++l)
                if (rng() % 2) s.links.push_back(l);
            if (rng() % 3 == 0) s.demand = std::round(cap(rng) / 2);
            if (rng() % 4 == 0) {
                double room = kGreedy;
                for (auto l : s.links) room = std::min(room, reservable[l]);
                if (s.links.empty()) room = 500;
                s.reserved = true;
                s.reservation = std::floor(room * std::uniform_real_distribution<double>(0, 1)(rng));
                for (auto l : s.links) reservable[l] -= s.reservation;
            }
            RateDemand d{FlowId{static_cast<std::uint32_t>(f)}, {},
                         s.reserved ? Policy::QoSAware : Policy::BestEffort, s.demand, s.reservation};
            for (auto l : s.links) d.path.push_back(LinkId{static_cast<std::uint32_t>(l)});
            demands.push_back(d);
            specs.push_back(s);
        }

        const auto got = compute_link_rates(t, demands);
        const auto expect = oracle::water_fill(caps, specs);
        ASSERT_EQ(got.size(), flows);
        for (std::size_t f = 0; f < flows; ++f) {
            const double g = got.at(FlowId{static_cast<std::uint32_t>(f)});
            if (std::isinf(expect[f]))
                ASSERT_EQ(g, expect[f]) << trial;  // greedy flow with no links
            else
                ASSERT_NEAR(g, expect[f], 1e-6) << trial;
        }

        // Conservation, work conservation and max-min optimality.
        std::vector<double> load(links, 0.0);
        for (std::size_t f = 0; f < flows; ++f)
            for (auto l : specs[f].links) load[l] += expect[f];
        for (std::size_t l = 0; l < links; ++l) ASSERT_LE(load[l], caps[l] + 1e-6);
        for (std::size_t f = 0; f < flows; ++f) {
            if (specs[f].reserved || specs[f].links.empty()) continue;
            const double r = got.at(FlowId{static_cast<std::uint32_t>(f)});
            if (r >= specs[f].demand - 1e-6) continue;
            bool bottleneck = false;
            for (auto l : specs[f].links) {
                if (load[l] < caps[l] - 1e-6) continue;
                bool largest = true;
                for (std::size_t g = 0; g < flows; ++g)
                    if (!specs[g].reserved && std::count(specs[g].links.begin(), specs[g].links.end(), l) &&
                        expect[g] > r + 1e-6)
                        largest = false;
                bottleneck |= largest;
            }
            ASSERT_TRUE(bottleneck) << "flow " << f << " could grow in trial " << trial;
        }
    }
}

TEST(MaxMinProperty, ReservationDominance) {
    Topology t = star({1000, 800});
    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
        std::vector<RateDemand> f{reserved(0, {0, 1}, 400)};
        for (int u = 0; u < k; ++u)
            f.push_back(be(static_cast<std::uint32_t>(u + 1), {static_cast<std::uint32_t>(rng() % 2)}));
        EXPECT_DOUBLE_EQ(compute_link_rates(t, f).at(FlowId{0}), 400.0);
    }
}
