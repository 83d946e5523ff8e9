#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sdfog/ids.hpp"
#include "sdfog/model.hpp"

namespace sdfog {

// A node, or an application running on a node, that consumes a service.
struct Subscriber {
    NodeId node;
    std::string app;

    bool operator==(const Subscriber&) const = default;
};

struct Subscription {
    std::uint64_t id = 0;
    ServiceId service;
    Subscriber subscriber;
    double established_at_ms = 0.0;

    bool operator==(const Subscription&) const = default;
};

struct Delivery {
    Subscription subscription;
    double time_ms = 0.0;
    double bits = 0.0;
    std::optional<FlowId> via;  // nullopt for same-node delivery
};

struct Cancellation {
    Subscription subscription;
    double time_ms = 0.0;
};

// How a remote message reaches its destination.
struct Route {
    FlowId flow;
    double latency_ms = 0.0;
    double rate_kbps = 0.0;

    // Arrival time of a message of `bits` sent at `now` (infinite when rate is 0).
    double arrival(double now_ms, double bits) const;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual std::optional<Route> route(NodeId from, NodeId to) const = 0;
};

struct RegistryChange {
    enum class Kind { Registered, Deregistered } kind;
    ServiceDescriptor descriptor;
};

// Per-node service registry and publish/subscribe access interface.
class Registry {
public:
    Registry(NodeId host, IdAllocator& ids) : host_(host), ids_(&ids) {}

    NodeId host() const { return host_; }

    ServiceId register_service(ServiceMetadata metadata);
    // Returns the cancelled subscriptions, stamped at `now_ms`.
    std::vector<Cancellation> deregister_service(ServiceId id, double now_ms = 0.0);

    // Registration order.
    std::vector<ServiceDescriptor> lookup_local(std::string_view service_type) const;
    const ServiceDescriptor* find(ServiceId id) const;
    std::vector<ServiceDescriptor> entries() const;
    std::size_t size() const { return entries_.size(); }

    Subscription subscribe(ServiceId id, Subscriber subscriber, double now_ms = 0.0);
    void unsubscribe(std::uint64_t subscription_id);
    std::vector<Subscription> subscriptions(ServiceId id) const;

    // One delivery per active subscriber. Remote subscribers need a route.
    std::vector<Delivery> publish(ServiceId id, double payload_bits, double now_ms,
                                  const Transport* transport = nullptr) const;

    // Request/reply over the same channels as publish; returns the reply
    // arrival time at the caller.
    double invoke(ServiceId id, const Subscriber& caller, double request_bits, double reply_bits,
                  double now_ms, const Transport* transport = nullptr) const;

    // Called after every successful register/deregister.
    void set_observer(std::function<void(const RegistryChange&)> observer) {
        observer_ = std::move(observer);
    }

    // type_index is exactly the inversion of entries.
    bool index_consistent() const;

private:
    NodeId host_;
    IdAllocator* ids_;
    std::map<ServiceId, ServiceDescriptor> entries_;
    std::map<std::string, std::set<ServiceId>, std::less<>> type_index_;
    std::map<std::uint64_t, Subscription> subscriptions_;
    std::uint64_t next_subscription_ = 1;
    std::function<void(const RegistryChange&)> observer_;
};

// One CSV row per descriptor: service_id,host,service_type,provider_kind,rate_kbps,attributes
std::string registry_to_csv(const Registry& registry, bool header = true);

}  // namespace sdfog
