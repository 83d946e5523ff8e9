#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdfog/model.hpp"

namespace sdfog {

inline constexpr double kGreedy = std::numeric_limits<double>::infinity();

struct RateDemand {
    FlowId flow;
    std::vector<LinkId> path;
    Policy policy = Policy::BestEffort;
    double demand_kbps = kGreedy;
    double reserved_kbps = 0.0;
};

// Reserved flows get min(demand, reservation); whatever capacity they leave
// is split max-min fairly (progressive filling) among best-effort flows.
std::map<FlowId, double> compute_link_rates(const Topology& topology,
                                            std::span<const RateDemand> flows);

enum class EventKind { FlowStart, FlowEnd, FrameEmit, FrameDeadline, ControlMessage, Custom };

std::string_view to_string(EventKind kind);

class Simulator;

struct SimEvent {
    double time_ms = 0.0;
    std::uint64_t seq = 0;  // assigned by the simulator
    EventKind kind = EventKind::Custom;
    std::optional<FlowId> flow;
    std::string detail;
    std::function<void(Simulator&)> action;
};

struct TraceRecord {
    double time_ms = 0.0;
    EventKind kind = EventKind::Custom;
    std::optional<FlowId> flow;
    std::string detail;

    bool operator==(const TraceRecord&) const = default;
};

struct FrameRecord {
    std::size_t index = 0;
    double emit_time_ms = 0.0;
    double bits_delivered_by_deadline = 0.0;
    double quality = 0.0;  // min(1, delivered / frame_size)

    bool operator==(const FrameRecord&) const = default;
};

struct VideoStream {
    FlowId flow;
    double fps = 25.0;
    double frame_size_bits = 20000.0;
    double playout_deadline_ms = 200.0;

    double frame_interval_ms() const { return 1000.0 / fps; }
    double nominal_rate_kbps() const { return frame_size_bits * fps / 1000.0; }

    bool operator==(const VideoStream&) const = default;
};

struct AbortRule {
    double window_ms = 5000.0;
    double min_rate_kbps = 50.0;
};

struct StreamResult {
    VideoStream stream;
    double start_ms = 0.0;
    double stop_ms = 0.0;
    std::vector<FrameRecord> frames;  // by index
    std::optional<double> abort_time_ms;

    bool operator==(const StreamResult&) const = default;
};

struct SimTrace {
    std::vector<TraceRecord> records;
    std::map<FlowId, double> delivered_bytes;
    std::map<FlowId, StreamResult> streams;
    double end_ms = 0.0;

    // time_ms,event_kind,flow_id,detail
    std::string to_csv(bool header = true) const;
    std::uint64_t hash() const;  // FNV-1a over to_csv()

    bool operator==(const SimTrace&) const = default;
};

struct Metrics {
    double mean_quality = 0.0;  // NaN when no frame falls in the window
    std::vector<double> per_frame_quality;
    std::map<FlowId, double> delivered_bytes;
    std::optional<double> abort_time_ms;
    double quality_stddev = 0.0;
};

// Quality statistics of one stream over frames emitted in [from_ms, to_ms).
Metrics metrics(const SimTrace& trace, FlowId stream_flow,
                double from_ms = -std::numeric_limits<double>::infinity(),
                double to_ms = std::numeric_limits<double>::infinity());

// Deterministic fluid-flow event loop. Events run in (time, seq) order;
// handlers may only schedule at or after the current time.
class Simulator {
public:
    explicit Simulator(const Topology& topology, std::uint64_t seed = 1);

    double now() const { return now_; }
    std::mt19937_64& rng() { return rng_; }
    const Topology& topology() const { return *topology_; }

    std::uint64_t schedule(double time_ms, EventKind kind, std::optional<FlowId> flow,
                           std::string detail, std::function<void(Simulator&)> action = {});
    std::uint64_t schedule(SimEvent event);

    // Schedules FlowStart/FlowEnd; rates are recomputed when they fire.
    void start_flow(double time_ms, const Flow& flow, double demand_kbps);
    void end_flow(double time_ms, FlowId flow);

    // Frames are emitted every 1000/fps ms in [start_ms, stop_ms). The flow
    // must already be known to the simulator (started or scheduled).
    void start_stream(const VideoStream& stream, double start_ms, double stop_ms);
    void enable_abort_check(FlowId flow, AbortRule rule);

    // An infinite horizon stops at the last event instead of accruing forever.
    const SimTrace& run(double until_ms);

    bool is_active(FlowId flow) const;
    double rate(FlowId flow) const;  // 0 when inactive
    double delivered_bytes(FlowId flow) const;
    const SimTrace& trace() const { return trace_; }

private:
    struct FlowState {
        Flow flow;
        double demand_kbps = 0.0;
        double rate_kbps = 0.0;
        double bits = 0.0;
        double last_update_ms = 0.0;
        bool active = false;
        std::vector<std::pair<double, double>> history;  // (time, rate) steps
    };

    struct StreamState {
        StreamResult result;
        double path_latency_ms = 0.0;
        std::optional<AbortRule> abort_rule;
        std::optional<double> below_since;
        std::uint64_t abort_token = 0;
        std::size_t frame_count = 0;
        std::size_t next_emit_index = 0;
        std::optional<std::uint64_t> pending_emit;  // seq of the queued FrameEmit
        std::map<std::size_t, FrameRecord> frames;
    };

    void accrue();
    void recompute_rates();
    void set_rate(FlowState& state, double rate);
    void watch_abort(FlowId flow);
    void emit_frame(FlowId flow, std::size_t index);
    void finalize_frame(FlowId flow, std::size_t index);
    void abort_stream(FlowId flow);
    double integrate(const FlowState& state, double from, double to) const;
    void finish();

    const Topology* topology_;
    std::mt19937_64 rng_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::vector<SimEvent> queue_;  // min-heap on (time, seq)
    std::set<std::uint64_t> cancelled_;
    std::map<FlowId, FlowState> flows_;
    std::map<FlowId, StreamState> streams_;
    SimTrace trace_;
};

// Convenience wrapper: runs a fresh simulator over an initial schedule.
SimTrace run(const Topology& topology, std::vector<SimEvent> events, double until_ms,
             std::uint64_t seed);

}  // namespace sdfog
