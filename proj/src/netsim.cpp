#include "sdfog/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

bool later(const SimEvent& a, const SimEvent& b) {
    if (a.time_ms != b.time_ms) return a.time_ms > b.time_ms;
    return a.seq > b.seq;
}

std::string frame_detail(std::size_t index) { return "frame " + std::to_string(index); }

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::FlowStart: return "FlowStart";
        case EventKind::FlowEnd: return "FlowEnd";
        case EventKind::FrameEmit: return "FrameEmit";
        case EventKind::FrameDeadline: return "FrameDeadline";
        case EventKind::ControlMessage: return "ControlMessage";
        case EventKind::Custom: return "Custom";
    }
    return "?";
}

std::string SimTrace::to_csv(bool header) const {
    std::ostringstream os;
    if (header) os << "time_ms,event_kind,flow_id,detail\n";
    char buf[48];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%.3f", r.time_ms);
        os << buf << ',' << to_string(r.kind) << ',';
        if (r.flow) os << *r.flow;
        os << ',' << r.detail << '\n';
    }
    return os.str();
}

std::uint64_t SimTrace::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : to_csv(false)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Metrics metrics(const SimTrace& trace, FlowId stream_flow, double from_ms, double to_ms) {
    Metrics m;
    m.delivered_bytes = trace.delivered_bytes;
    auto it = trace.streams.find(stream_flow);
    if (it == trace.streams.end()) {
        m.mean_quality = std::nan("");
        return m;
    }
    m.abort_time_ms = it->second.abort_time_ms;
    for (const auto& f : it->second.frames)
        if (f.emit_time_ms >= from_ms && f.emit_time_ms < to_ms) m.per_frame_quality.push_back(f.quality);
    if (m.per_frame_quality.empty()) {
        m.mean_quality = std::nan("");
        return m;
    }
    double sum = 0.0;
    for (double q : m.per_frame_quality) sum += q;
    m.mean_quality = sum / static_cast<double>(m.per_frame_quality.size());
    double var = 0.0;
    for (double q : m.per_frame_quality) var += (q - m.mean_quality) * (q - m.mean_quality);
    m.quality_stddev = std::sqrt(var / static_cast<double>(m.per_frame_quality.size()));
    return m;
}

Simulator::Simulator(const Topology& topology, std::uint64_t seed)
    : topology_(&topology), rng_(seed) {}

std::uint64_t Simulator::schedule(double time_ms, EventKind kind, std::optional<FlowId> flow,
                                  std::string detail, std::function<void(Simulator&)> action) {
    return schedule(SimEvent{time_ms, 0, kind, flow, std::move(detail), std::move(action)});
}

std::uint64_t Simulator::schedule(SimEvent event) {
    if (!(event.time_ms >= now_))
        throw ValidationError("cannot schedule an event in the past (" +
                              std::to_string(event.time_ms) + " < " + std::to_string(now_) + ")");
    event.seq = next_seq_++;
    const std::uint64_t seq = event.seq;
    queue_.push_back(std::move(event));
    std::push_heap(queue_.begin(), queue_.end(), later);
    return seq;
}

void Simulator::start_flow(double time_ms, const Flow& flow, double demand_kbps) {
    auto [it, inserted] = flows_.try_emplace(flow.id);
    if (!inserted && it->second.active)
        throw ValidationError("flow " + to_string(flow.id) + " is already active");
    for (LinkId l : flow.path)
        if (!topology_->has_link(l)) throw ValidationError("flow path references unknown link");
    it->second.flow = flow;
    it->second.demand_kbps = demand_kbps;
    const FlowId id = flow.id;
    schedule(time_ms, EventKind::FlowStart, id, std::string(to_string(flow.qos.policy)),
             [id](Simulator& sim) {
                 FlowState& s = sim.flows_.at(id);
                 sim.accrue();
                 s.active = true;
                 s.last_update_ms = sim.now_;
                 sim.recompute_rates();
             });
}

void Simulator::end_flow(double time_ms, FlowId id) {
    if (!flows_.contains(id)) throw FlowNotInstalled("flow " + to_string(id) + " is unknown");
    schedule(time_ms, EventKind::FlowEnd, id, "", [id](Simulator& sim) {
        FlowState& s = sim.flows_.at(id);
        if (!s.active) return;
        sim.accrue();
        s.active = false;
        sim.set_rate(s, 0.0);
        sim.recompute_rates();
    });
}

void Simulator::start_stream(const VideoStream& stream, double start_ms, double stop_ms) {
    auto fit = flows_.find(stream.flow);
    if (fit == flows_.end())
        throw FlowNotInstalled("flow " + to_string(stream.flow) + " is not installed");
    if (!(stream.fps > 0.0) || !(stream.frame_size_bits > 0.0))
        throw ValidationError("stream fps and frame size must be positive");
    if (streams_.contains(stream.flow))
        throw ValidationError("flow " + to_string(stream.flow) + " already carries a stream");

    StreamState st;
    st.result.stream = stream;
    st.result.start_ms = start_ms;
    st.result.stop_ms = stop_ms;
    st.path_latency_ms = fit->second.flow.latency_ms;
    const double interval = stream.frame_interval_ms();
    while (start_ms + static_cast<double>(st.frame_count) * interval < stop_ms) ++st.frame_count;
    streams_.emplace(stream.flow, std::move(st));

    if (streams_.at(stream.flow).frame_count == 0) return;
    const FlowId id = stream.flow;
    streams_.at(id).pending_emit = schedule(start_ms, EventKind::FrameEmit, id, frame_detail(0),
                                            [id](Simulator& sim) { sim.emit_frame(id, 0); });
}

void Simulator::enable_abort_check(FlowId flow, AbortRule rule) {
    auto it = streams_.find(flow);
    if (it == streams_.end())
        throw FlowNotInstalled("flow " + to_string(flow) + " carries no stream");
    it->second.abort_rule = rule;
}

bool Simulator::is_active(FlowId flow) const {
    auto it = flows_.find(flow);
    return it != flows_.end() && it->second.active;
}

double Simulator::rate(FlowId flow) const {
    auto it = flows_.find(flow);
    return it != flows_.end() && it->second.active ? it->second.rate_kbps : 0.0;
}

double Simulator::delivered_bytes(FlowId flow) const {
    auto it = flows_.find(flow);
    if (it == flows_.end()) return 0.0;
    double bits = it->second.bits;
    if (it->second.active) bits += it->second.rate_kbps * (now_ - it->second.last_update_ms);
    return bits / 8.0;
}

const SimTrace& Simulator::run(double until_ms) {
    while (!queue_.empty() && queue_.front().time_ms <= until_ms) {
        std::pop_heap(queue_.begin(), queue_.end(), later);
        SimEvent ev = std::move(queue_.back());
        queue_.pop_back();
        if (cancelled_.erase(ev.seq)) continue;
        now_ = ev.time_ms;
        trace_.records.push_back({ev.time_ms, ev.kind, ev.flow, ev.detail});
        if (ev.action) ev.action(*this);
    }
    if (std::isfinite(until_ms)) now_ = std::max(now_, until_ms);
    accrue();
    finish();
    return trace_;
}

void Simulator::accrue() {
    for (auto& [id, s] : flows_) {
        if (!s.active) continue;
        s.bits += s.rate_kbps * (now_ - s.last_update_ms);
        s.last_update_ms = now_;
    }
}

void Simulator::recompute_rates() {
    accrue();
    std::vector<RateDemand> demands;
    for (const auto& [id, s] : flows_) {
        if (!s.active) continue;
        demands.push_back({id, s.flow.path, s.flow.qos.policy, s.demand_kbps, s.flow.reserved_kbps});
    }
    const auto rates = compute_link_rates(*topology_, demands);
    for (auto& [id, s] : flows_)
        if (s.active) set_rate(s, rates.at(id));
}

void Simulator::set_rate(FlowState& s, double r) {
    const bool changed = s.history.empty() || s.history.back().second != r;
    if (changed) {
        if (!s.history.empty() && s.history.back().first == now_)
            s.history.back().second = r;
        else
            s.history.emplace_back(now_, r);
    }
    s.rate_kbps = r;
    if (changed && streams_.contains(s.flow.id)) watch_abort(s.flow.id);
}

void Simulator::watch_abort(FlowId flow) {
    StreamState& st = streams_.at(flow);
    if (!st.abort_rule || st.result.abort_time_ms) return;
    if (now_ < st.result.start_ms || now_ >= st.result.stop_ms) return;
    const double r = rate(flow);
    if (r < st.abort_rule->min_rate_kbps) {
        if (st.below_since) return;
        st.below_since = now_;
        const std::uint64_t token = ++st.abort_token;
        schedule(now_ + st.abort_rule->window_ms, EventKind::Custom, flow, "abort-check",
                 [flow, token](Simulator& sim) {
                     StreamState& s = sim.streams_.at(flow);
                     if (s.abort_token != token || s.result.abort_time_ms) return;
                     if (sim.now_ >= s.result.stop_ms) return;
                     sim.abort_stream(flow);
                 });
    } else {
        st.below_since.reset();
        ++st.abort_token;
    }
}

void Simulator::emit_frame(FlowId flow, std::size_t index) {
    StreamState& st = streams_.at(flow);
    st.pending_emit.reset();
    st.next_emit_index = index + 1;
    if (index == 0) watch_abort(flow);

    const VideoStream& vs = st.result.stream;
    const double emit = st.result.start_ms + static_cast<double>(index) * vs.frame_interval_ms();
    schedule(emit + vs.playout_deadline_ms, EventKind::FrameDeadline, flow, frame_detail(index),
             [flow, index](Simulator& sim) { sim.finalize_frame(flow, index); });
    if (index + 1 < st.frame_count) {
        const double next = st.result.start_ms + static_cast<double>(index + 1) * vs.frame_interval_ms();
        st.pending_emit = schedule(next, EventKind::FrameEmit, flow, frame_detail(index + 1),
                                   [flow, index](Simulator& sim) { sim.emit_frame(flow, index + 1); });
    }
}

void Simulator::finalize_frame(FlowId flow, std::size_t index) {
    StreamState& st = streams_.at(flow);
    const VideoStream& vs = st.result.stream;
    const double emit = st.result.start_ms + static_cast<double>(index) * vs.frame_interval_ms();

    // The sender pushes this frame until the next one replaces it; bits that
    // cannot arrive before the playout deadline do not count.
    double end = emit + std::min(vs.frame_interval_ms(), vs.playout_deadline_ms - st.path_latency_ms);
    if (st.result.abort_time_ms) end = std::min(end, *st.result.abort_time_ms);
    double bits = end > emit ? integrate(flows_.at(flow), emit, end) : 0.0;
    bits = std::min(bits, vs.frame_size_bits);
    st.frames[index] = FrameRecord{index, emit, bits, std::min(1.0, bits / vs.frame_size_bits)};
}

void Simulator::abort_stream(FlowId flow) {
    StreamState& st = streams_.at(flow);
    st.result.abort_time_ms = now_;
    if (st.pending_emit) {
        cancelled_.insert(*st.pending_emit);
        st.pending_emit.reset();
    }
    const double interval = st.result.stream.frame_interval_ms();
    for (std::size_t k = st.next_emit_index; k < st.frame_count; ++k)
        st.frames[k] = FrameRecord{k, st.result.start_ms + static_cast<double>(k) * interval, 0.0, 0.0};
    schedule(now_, EventKind::ControlMessage, flow, "stream-aborted");
}

double Simulator::integrate(const FlowState& s, double from, double to) const {
    double bits = 0.0;
    for (std::size_t i = 0; i < s.history.size(); ++i) {
        const double seg_start = s.history[i].first;
        const double seg_end = i + 1 < s.history.size() ? s.history[i + 1].first : kGreedy;
        const double lo = std::max(from, seg_start);
        const double hi = std::min(to, seg_end);
        if (hi > lo) bits += s.history[i].second * (hi - lo);
    }
    return bits;
}

void Simulator::finish() {
    trace_.end_ms = now_;
    for (const auto& [id, s] : flows_) trace_.delivered_bytes[id] = s.bits / 8.0;
    for (const auto& [id, st] : streams_) {
        StreamResult r = st.result;
        r.frames.clear();
        for (const auto& [k, f] : st.frames) r.frames.push_back(f);
        trace_.streams[id] = std::move(r);
    }
}

SimTrace run(const Topology& topology, std::vector<SimEvent> events, double until_ms,
             std::uint64_t seed) {
    Simulator sim(topology, seed);
    for (auto& e : events) sim.schedule(std::move(e));
    return sim.run(until_ms);
}

}  // namespace sdfog
