#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace sdfog {

// Opaque identifier; the tag keeps node, link, service and flow ids apart.
template <class Tag>
struct Id {
    std::uint32_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t v) : value(v) {}

    friend constexpr auto operator<=>(Id, Id) = default;
    friend std::ostream& operator<<(std::ostream& os, Id id) { return os << id.value; }
};

struct NodeTag {};
struct LinkTag {};
struct ServiceTag {};
struct FlowTag {};
struct DomainTag {};

using NodeId = Id<NodeTag>;
using LinkId = Id<LinkTag>;
using ServiceId = Id<ServiceTag>;
using FlowId = Id<FlowTag>;
using DomainId = Id<DomainTag>;

template <class Tag>
std::string to_string(Id<Tag> id) {
    return std::to_string(id.value);
}

// Per-instance counters for ids minted at run time (services, flows).
// Node, link and domain ids are fixed when a topology is loaded.
class IdAllocator {
public:
    ServiceId next_service() { return ServiceId{next_service_++}; }
    FlowId next_flow() { return FlowId{next_flow_++}; }
    std::uint64_t next_instance() { return next_instance_++; }

private:
    std::uint32_t next_service_ = 1;
    std::uint32_t next_flow_ = 1;
    std::uint64_t next_instance_ = 1;
};

}  // namespace sdfog

template <class Tag>
struct std::hash<sdfog::Id<Tag>> {
    std::size_t operator()(sdfog::Id<Tag> id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
