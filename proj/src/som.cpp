#include "sdfog/som.hpp"

#include <limits>
#include <sstream>

#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

const std::string* provider_id(const ServiceMetadata& m) {
    auto it = m.attributes.find("provider_id");
    return it == m.attributes.end() ? nullptr : &it->second;
}

bool same_provider(const ServiceMetadata& x, const ServiceMetadata& y) {
    if (x.service_type != y.service_type) return false;
    const std::string* px = provider_id(x);
    const std::string* py = provider_id(y);
    if (px && py) return *px == *py;
    if (px || py) return false;
    return x == y;
}

}  // namespace

double Route::arrival(double now_ms, double bits) const {
    if (rate_kbps <= 0.0) return std::numeric_limits<double>::infinity();
    // kbps == bits per millisecond
    return now_ms + latency_ms + bits / rate_kbps;
}

ServiceId Registry::register_service(ServiceMetadata metadata) {
    if (metadata.service_type.empty()) throw ValidationError("service_type must be non-empty");
    for (const auto& [id, d] : entries_)
        if (same_provider(d.metadata, metadata))
            throw DuplicateRegistration("service '" + metadata.service_type +
                                        "' already registered by this provider on node " +
                                        to_string(host_));

    ServiceId id = ids_->next_service();
    ServiceDescriptor desc{id, std::move(metadata), host_};
    type_index_[desc.metadata.service_type].insert(id);
    auto [it, inserted] = entries_.emplace(id, std::move(desc));
    if (observer_) observer_({RegistryChange::Kind::Registered, it->second});
    return id;
}

std::vector<Cancellation> Registry::deregister_service(ServiceId id, double now_ms) {
    auto it = entries_.find(id);
    if (it == entries_.end())
        throw UnknownService("service " + to_string(id) + " is not registered on node " +
                             to_string(host_));

    std::vector<Cancellation> cancelled;
    for (auto s = subscriptions_.begin(); s != subscriptions_.end();) {
        if (s->second.service == id) {
            cancelled.push_back({s->second, now_ms});
            s = subscriptions_.erase(s);
        } else {
            ++s;
        }
    }

    ServiceDescriptor removed = std::move(it->second);
    entries_.erase(it);
    auto idx = type_index_.find(removed.metadata.service_type);
    idx->second.erase(id);
    if (idx->second.empty()) type_index_.erase(idx);
    if (observer_) observer_({RegistryChange::Kind::Deregistered, removed});
    return cancelled;
}

std::vector<ServiceDescriptor> Registry::lookup_local(std::string_view service_type) const {
    std::vector<ServiceDescriptor> out;
    auto idx = type_index_.find(service_type);
    if (idx == type_index_.end()) return out;
    for (ServiceId id : idx->second) out.push_back(entries_.at(id));
    return out;
}

const ServiceDescriptor* Registry::find(ServiceId id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<ServiceDescriptor> Registry::entries() const {
    std::vector<ServiceDescriptor> out;
    out.reserve(entries_.size());
    for (const auto& [id, d] : entries_) out.push_back(d);
    return out;
}

Subscription Registry::subscribe(ServiceId id, Subscriber subscriber, double now_ms) {
    if (!entries_.contains(id))
        throw UnknownService("cannot subscribe to unknown service " + to_string(id));
    Subscription s{next_subscription_++, id, std::move(subscriber), now_ms};
    subscriptions_.emplace(s.id, s);
    return s;
}

void Registry::unsubscribe(std::uint64_t subscription_id) { subscriptions_.erase(subscription_id); }

std::vector<Subscription> Registry::subscriptions(ServiceId id) const {
    std::vector<Subscription> out;
    for (const auto& [sid, s] : subscriptions_)
        if (s.service == id) out.push_back(s);
    return out;
}

std::vector<Delivery> Registry::publish(ServiceId id, double payload_bits, double now_ms,
                                        const Transport* transport) const {
    if (!entries_.contains(id))
        throw UnknownService("node " + to_string(host_) + " does not own service " + to_string(id));

    std::vector<Delivery> out;
    for (const auto& [sid, s] : subscriptions_) {
        if (s.service != id) continue;
        if (s.subscriber.node == host_) {
            out.push_back({s, now_ms, payload_bits, std::nullopt});
            continue;
        }
        std::optional<Route> r = transport ? transport->route(host_, s.subscriber.node) : std::nullopt;
        if (!r)
            throw NoFlowToSubscriber("no installed flow from node " + to_string(host_) +
                                     " to subscriber node " + to_string(s.subscriber.node));
        out.push_back({s, r->arrival(now_ms, payload_bits), payload_bits, r->flow});
    }
    return out;
}

double Registry::invoke(ServiceId id, const Subscriber& caller, double request_bits,
                        double reply_bits, double now_ms, const Transport* transport) const {
    if (!entries_.contains(id))
        throw UnknownService("cannot invoke unknown service " + to_string(id));
    if (caller.node == host_) return now_ms;

    auto leg = [&](NodeId from, NodeId to) {
        std::optional<Route> r = transport ? transport->route(from, to) : std::nullopt;
        if (!r)
            throw NoFlowToSubscriber("no installed flow from node " + to_string(from) +
                                     " to node " + to_string(to));
        return *r;
    };
    const double served = leg(caller.node, host_).arrival(now_ms, request_bits);
    return leg(host_, caller.node).arrival(served, reply_bits);
}

bool Registry::index_consistent() const {
    std::map<std::string, std::set<ServiceId>, std::less<>> rebuilt;
    for (const auto& [id, d] : entries_) {
        if (d.host != host_ || d.id != id) return false;
        rebuilt[d.metadata.service_type].insert(id);
    }
    return rebuilt == type_index_;
}

std::string registry_to_csv(const Registry& registry, bool header) {
    std::ostringstream os;
    if (header) os << "service_id,host,service_type,provider_kind,rate_kbps,attributes\n";
    for (const auto& d : registry.entries()) {
        os << d.id << ',' << d.host << ',' << d.metadata.service_type << ','
           << (d.metadata.provider_kind == ProviderKind::DeviceHardware ? "device" : "application")
           << ',' << d.metadata.nominal_data_rate_kbps << ',';
        bool first = true;
        for (const auto& [k, v] : d.metadata.attributes) {
            if (!first) os << ';';
            os << k << '=' << v;
            first = false;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace sdfog
