#include "sdfog/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "sdfog/errors.hpp"

namespace sdfog {

namespace {

constexpr double kSamplePeriodMs = 20.0;
constexpr double kSampleBits = 96.0;  // three 32-bit axes
constexpr double kFallSpikeMs = 100.0;
constexpr double kFallThresholdG = 2.5;
constexpr double kControlMessageBits = 512.0;

constexpr std::string_view kDefaultTopology = R"({
  "nodes": [
    {"id": "patient-phone",    "tier": "edge",     "domain": "home",       "compute_capacity": 2},
    {"id": "home-gateway",     "tier": "gateway",  "domain": "home",       "compute_capacity": 4},
    {"id": "backbone",         "tier": "backbone", "domain": "isp",        "compute_capacity": 8},
    {"id": "cloud",            "tier": "cloud",    "domain": "datacenter", "compute_capacity": 64},
    {"id": "owner-phone",      "tier": "edge",     "domain": "datacenter", "compute_capacity": 2},
    {"id": "streaming-server", "tier": "backbone", "domain": "datacenter", "compute_capacity": 16}
  ],
  "links": [
    {"id": "body-area",    "a": "patient-phone",    "b": "home-gateway", "capacity_kbps": 10000,  "latency_ms": 2},
    {"id": "home-access",  "a": "home-gateway",     "b": "backbone",     "capacity_kbps": 10000,  "latency_ms": 2},
    {"id": "backbone",     "a": "backbone",         "b": "cloud",        "capacity_kbps": 1000,   "latency_ms": 20},
    {"id": "media-uplink", "a": "streaming-server", "b": "cloud",        "capacity_kbps": 100000, "latency_ms": 1},
    {"id": "owner-relay",  "a": "cloud",            "b": "owner-phone",  "capacity_kbps": 100000, "latency_ms": 5}
  ]
}
)";

ServiceMetadata device(std::string type, double kbps, std::string provider) {
    return {std::move(type), ProviderKind::DeviceHardware, kbps, {{"provider_id", std::move(provider)}}};
}

ServiceMetadata application(std::string type, double kbps, std::string provider) {
    return {std::move(type), ProviderKind::Application, kbps, {{"provider_id", std::move(provider)}}};
}

// Remote messages ride the lowest-numbered installed flow between the two hosts.
class FlowTransport final : public Transport {
public:
    FlowTransport(const Controller& controller, const Simulator& sim)
        : controller_(controller), sim_(sim) {}

    std::optional<Route> route(NodeId from, NodeId to) const override {
        for (const auto& [id, f] : controller_.flows())
            if (f.src.host == from && f.dst.host == to) return Route{id, f.latency_ms, sim_.rate(id)};
        return std::nullopt;
    }

private:
    const Controller& controller_;
    const Simulator& sim_;
};

class HshRun {
public:
    HshRun(const ScenarioConfig& config, Mode mode, Policy policy)
        : cfg_(config),
          mode_(mode),
          policy_(policy),
          world_(build_hsh_topology(config)),
          ctl_(*world_.controller),
          sim_(ctl_.topology(), config.seed),
          transport_(ctl_, sim_),
          controller_node_(ctl_.topology().node_id(config.controller_node)) {
        result_.mode = mode;
        result_.policy = policy;
        result_.users = config.background_users;
    }

    RunResult execute() {
        start_background();
        if (mode_ == Mode::Normal) {
            start_backup();
            sim_.schedule(cfg_.duration_ms, EventKind::Custom, std::nullopt, "end-of-run");
        }
        fall_at_ = cfg_.fall_at_ms;
        if (mode_ == Mode::Emergency && !fall_at_) fall_at_ = 500.0;

        patient_app_ = ctl_.registry(world_.patient_phone)
                           .subscribe(world_.accelerometer, {world_.patient_phone, "hsh-patient-app"});
        sim_.schedule(0.0, EventKind::Custom, std::nullopt, "accelerometer-sample",
                      [this](Simulator&) { on_sample(); });

        sim_.run(std::numeric_limits<double>::infinity());

        result_.trace = sim_.trace();
        if (result_.video_flow) {
            const StreamResult& s = result_.trace.streams.at(*result_.video_flow);
            result_.metrics = metrics(result_.trace, *result_.video_flow, s.start_ms, s.stop_ms);
        } else {
            result_.metrics.mean_quality = std::nan("");
            result_.metrics.delivered_bytes = result_.trace.delivered_bytes;
        }
        if (result_.backup_flow)
            result_.backup_delivered_bytes = result_.trace.delivered_bytes.at(*result_.backup_flow);
        result_.milestones = control_milestones(result_.trace, result_.video_flow);
        std::vector<Flow> flows;
        for (const auto& [id, f] : ctl_.flows()) flows.push_back(f);
        result_.flows_csv = flows_to_csv(ctl_.topology(), flows);
        result_.discovery_csv = discovery_csv_.str();
        return std::move(result_);
    }

private:
    void start_background() {
        const ServiceDescriptor& server = ctl_.descriptor(world_.media_server);
        for (std::size_t i = 0; i < world_.users.size(); ++i) {
            const ServiceDescriptor& client = ctl_.descriptor(world_.media_clients[i]);
            Flow f = ctl_.install_flow(ctl_.create_flow(server, client, QoSRequirement::best_effort()));
            sim_.start_flow(static_cast<double>(i) * cfg_.background_stagger_ms, f,
                            cfg_.background_rate_kbps);
            result_.background_flows.push_back(f.id);
        }
    }

    void start_backup() {
        TaskGraph task({"body-sensors", "hsh-backup"}, {{0, 1, QoSRequirement::best_effort()}});
        OrchestrationReport report = orchestrate_or_fail(task, world_.patient_phone);
        const Flow& f = report.flows.front();
        sim_.start_flow(0.0, f, cfg_.backup_rate_kbps);
        result_.backup_flow = f.id;
    }

    OrchestrationReport orchestrate_or_fail(const TaskGraph& task, NodeId origin) {
        try {
            return ctl_.orchestrate(task, origin);
        } catch (const OrchestrationError& e) {
            std::string why = e.what();
            throw ScenarioFailure("orchestration rejected: " + why);
        }
    }

    void on_sample() {
        const double t = sim_.now();
        const bool falling = fall_at_ && t >= *fall_at_ && t < *fall_at_ + kFallSpikeMs;
        const double magnitude_g = (falling ? 3.5 : 1.0) + noise_(sim_.rng());

        const auto deliveries = ctl_.registry(world_.patient_phone)
                                    .publish(world_.accelerometer, kSampleBits, t, &transport_);
        for (const auto& d : deliveries)
            if (d.subscription.id == patient_app_.id) mine(magnitude_g);

        const double next = t + kSamplePeriodMs;
        const bool keep_sampling = !detected_ && (fall_at_ ? next < *fall_at_ + kFallSpikeMs
                                                           : next < cfg_.duration_ms);
        if (keep_sampling)
            sim_.schedule(next, EventKind::Custom, std::nullopt, "accelerometer-sample",
                          [this](Simulator&) { on_sample(); });
    }

    // Patient application mining the acceleration stream.
    void mine(double magnitude_g) {
        if (detected_ || magnitude_g <= kFallThresholdG) return;
        detected_ = true;
        result_.detection_ms = sim_.now();
        sim_.schedule(sim_.now(), EventKind::ControlMessage, std::nullopt, "fall-detect",
                      [this](Simulator&) { on_fall_detected(); });
    }

    void on_fall_detected() {
        if (result_.backup_flow) {
            sim_.end_flow(sim_.now(), *result_.backup_flow);
            ctl_.release_flow(*result_.backup_flow);
        }
        const double notify_at =
            sim_.now() + control_latency_ms(ctl_.topology(), world_.patient_phone, world_.home_gateway);
        sim_.schedule(notify_at, EventKind::ControlMessage, std::nullopt, "control-notify",
                      [this](Simulator&) { on_control_notified(); });
    }

    // HSH Control Service on the gateway: sound the alarm, submit the task.
    void on_control_notified() {
        const double alarm_at = ctl_.registry(world_.home_gateway)
                                    .invoke(world_.alarm, {world_.home_gateway, "hsh-gateway-app"},
                                            kControlMessageBits, kControlMessageBits, sim_.now(),
                                            &transport_);
        sim_.schedule(alarm_at, EventKind::Custom, std::nullopt, "alarm-triggered");
        sim_.schedule(sim_.now(), EventKind::ControlMessage, std::nullopt, "task-submit",
                      [this](Simulator&) { on_task_submitted(); });
    }

    void on_task_submitted() {
        const double submitted = sim_.now();
        const QoSRequirement qos = policy_ == Policy::QoSAware
                                       ? QoSRequirement::qos_aware(cfg_.reservation_kbps)
                                       : QoSRequirement::best_effort();
        TaskGraph task({"cctv-video", "hsh-alerts"}, {{0, 1, qos}});
        OrchestrationReport report = orchestrate_or_fail(task, world_.home_gateway);

        double discovery_ms = 0.0;
        for (const auto& d : report.discoveries) {
            discovery_ms = std::max(discovery_ms, d.completion_ms());
            discovery_csv_ << discovery_trace_csv(++query_ids_, submitted, d);
        }
        const Flow flow = report.flows.front();
        const Topology& topo = ctl_.topology();
        const double discovered = submitted + discovery_ms;
        const double created = discovered + control_latency_ms(topo, world_.home_gateway, controller_node_);
        double installed = created;
        for (NodeId n : flow.node_sequence)
            installed = std::max(installed, created + control_latency_ms(topo, controller_node_, n));

        sim_.schedule(discovered, EventKind::ControlMessage, std::nullopt, "discovery-complete");
        sim_.schedule(created, EventKind::ControlMessage, flow.id, "flow-created");
        sim_.schedule(installed, EventKind::ControlMessage, flow.id, "flow-installed",
                      [this, flow](Simulator&) { start_video(flow); });
    }

    void start_video(const Flow& flow) {
        const double now = sim_.now();
        VideoStream stream{flow.id, cfg_.video.fps, cfg_.video.frame_size_bits,
                           cfg_.video.playout_deadline_ms};
        sim_.start_flow(now, flow, stream.nominal_rate_kbps());
        sim_.start_stream(stream, now, now + cfg_.duration_ms);
        const bool check = cfg_.abort_rule &&
                           (policy_ == Policy::BestEffort || cfg_.abort_applies_to_qos);
        if (check) sim_.enable_abort_check(flow.id, *cfg_.abort_rule);
        sim_.schedule(now + cfg_.duration_ms + stream.playout_deadline_ms, EventKind::Custom,
                      std::nullopt, "end-of-run");
        result_.video_flow = flow.id;
    }

    const ScenarioConfig& cfg_;
    Mode mode_;
    Policy policy_;
    HshWorld world_;
    Controller& ctl_;
    Simulator sim_;
    FlowTransport transport_;
    NodeId controller_node_;
    RunResult result_;

    std::optional<double> fall_at_;
    Subscription patient_app_;
    bool detected_ = false;
    std::normal_distribution<double> noise_{0.0, 0.05};
    std::uint64_t query_ids_ = 0;
    std::ostringstream discovery_csv_;
};

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

Mode parse_mode(std::string_view text) {
    if (text == "normal") return Mode::Normal;
    if (text == "emergency") return Mode::Emergency;
    if (text == "sweep") return Mode::Sweep;
    throw ParseError("unknown mode '" + std::string(text) + "'");
}

PolicyChoice parse_policy(std::string_view text) {
    if (text == "qos") return PolicyChoice::QoSAware;
    if (text == "best-effort") return PolicyChoice::BestEffort;
    if (text == "both") return PolicyChoice::Both;
    throw ParseError("unknown policy '" + std::string(text) + "'");
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Normal: return "normal";
        case Mode::Emergency: return "emergency";
        case Mode::Sweep: return "sweep";
    }
    return "?";
}

std::string_view default_hsh_topology() { return kDefaultTopology; }

ScenarioConfig parse_scenario_config(std::string_view text, const std::string& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed scenario: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("scenario document must be an object");

    ScenarioConfig c;
    try {
        if (doc.contains("topology_file")) {
            std::filesystem::path p = doc["topology_file"].get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
            c.topology_file = p.string();
        }
        if (doc.contains("mode")) c.mode = parse_mode(doc["mode"].get<std::string>());
        if (doc.contains("policy")) c.policy = parse_policy(doc["policy"].get<std::string>());
        c.background_users = doc.value("background_users", c.background_users);
        c.background_rate_kbps = doc.value("background_rate_kbps", c.background_rate_kbps);
        c.background_stagger_ms = doc.value("background_stagger_ms", c.background_stagger_ms);
        c.backbone_capacity_kbps = doc.value("backbone_capacity_kbps", c.backbone_capacity_kbps);
        c.backbone_latency_ms = doc.value("backbone_latency_ms", c.backbone_latency_ms);
        c.reservation_kbps = doc.value("reservation_kbps", c.reservation_kbps);
        c.duration_ms = doc.value("duration_ms", c.duration_ms);
        c.seed = doc.value("seed", c.seed);
        c.backup_rate_kbps = doc.value("backup_rate_kbps", c.backup_rate_kbps);
        c.controller_node = doc.value("controller_node", c.controller_node);
        if (doc.contains("fall_at_ms") && !doc["fall_at_ms"].is_null())
            c.fall_at_ms = doc["fall_at_ms"].get<double>();
        if (doc.contains("video")) {
            const auto& v = doc["video"];
            c.video.fps = v.value("fps", c.video.fps);
            c.video.frame_size_bits = v.value("frame_size_bits", c.video.frame_size_bits);
            c.video.playout_deadline_ms = v.value("playout_deadline_ms", c.video.playout_deadline_ms);
        }
        if (doc.contains("abort")) {
            const auto& a = doc["abort"];
            if (!a.value("enabled", true)) {
                c.abort_rule.reset();
            } else {
                AbortRule r;
                r.window_ms = a.value("window_ms", r.window_ms);
                r.min_rate_kbps = a.value("min_rate_kbps", r.min_rate_kbps);
                c.abort_rule = r;
            }
            c.abort_applies_to_qos = a.value("apply_to_qos", c.abort_applies_to_qos);
        }
        if (doc.contains("sweep_users"))
            c.sweep_users = doc["sweep_users"].get<std::vector<unsigned>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad scenario field: ") + e.what());
    }
    return c;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

HshWorld build_hsh_topology(const ScenarioConfig& config) {
    std::string text;
    if (config.topology_file.empty()) {
        text = std::string(kDefaultTopology);
    } else {
        std::ifstream in(config.topology_file);
        if (!in) throw ParseError("cannot open topology file " + config.topology_file);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed topology: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("links") || !doc["links"].is_array())
        throw ParseError("HSH topology requires a 'links' array");

    bool has_backbone = false;
    for (auto& l : doc["links"]) {
        if (l.value("id", std::string()) != "backbone") continue;
        l["capacity_kbps"] = config.backbone_capacity_kbps;
        l["latency_ms"] = config.backbone_latency_ms;
        has_backbone = true;
    }
    if (!has_backbone) throw ValidationError("HSH topology needs a link with id 'backbone'");

    for (unsigned i = 1; i <= config.background_users; ++i) {
        const std::string name = "user-" + std::to_string(i);
        doc["nodes"].push_back(
            {{"id", name}, {"tier", "edge"}, {"domain", "isp"}, {"compute_capacity", 1}});
        doc["links"].push_back({{"id", name + "-access"},
                                {"a", name},
                                {"b", "backbone"},
                                {"capacity_kbps", 10000},
                                {"latency_ms", 2}});
    }

    Topology topology = load_topology(doc.dump());
    AppCatalog catalog{{"hsh-alerts", {4.0, 0.0}}, {"hsh-backup", {4.0, 0.0}}};

    HshWorld w;
    w.controller = std::make_unique<Controller>(std::move(topology), std::move(catalog));
    Controller& ctl = *w.controller;
    const Topology& t = ctl.topology();
    w.patient_phone = t.node_id("patient-phone");
    w.home_gateway = t.node_id("home-gateway");
    w.backbone = t.node_id("backbone");
    w.cloud = t.node_id("cloud");
    w.owner_phone = t.node_id("owner-phone");
    w.streaming_server = t.node_id("streaming-server");
    w.backbone_link = *t.find_link("backbone");
    for (unsigned i = 1; i <= config.background_users; ++i)
        w.users.push_back(t.node_id("user-" + std::to_string(i)));

    w.accelerometer = ctl.register_service(w.patient_phone, device("accelerometer", 4.8, "imu-0"));
    w.body_sensors = ctl.register_service(w.patient_phone, device("body-sensors", 8.0, "ban-0"));
    w.cctv = ctl.register_service(w.home_gateway,
                                  device("cctv-video", config.reservation_kbps, "cctv-0"));
    w.alarm = ctl.register_service(w.home_gateway, device("alarm", 0.0, "alarm-0"));
    w.hsh_control = ctl.register_service(w.home_gateway, application("hsh-control", 1.0, "hsh-gateway-app"));
    w.hsh_backup = ctl.register_service(w.cloud, application("hsh-backup", 0.0, "hsh-cluster"));
    w.hsh_alerts = ctl.register_service(w.cloud, application("hsh-alerts", 0.0, "hsh-cluster"));
    w.media_server = ctl.register_service(
        w.streaming_server, application("media-stream", config.background_rate_kbps, "media-0"));
    for (std::size_t i = 0; i < w.users.size(); ++i)
        w.media_clients.push_back(ctl.register_service(
            w.users[i], application("media-player", 0.0, "player-" + std::to_string(i + 1))));
    return w;
}

std::vector<std::string> control_milestones(const SimTrace& trace, std::optional<FlowId> video_flow) {
    std::vector<std::string> out;
    for (const auto& r : trace.records) {
        if (r.kind == EventKind::ControlMessage) {
            out.push_back(r.detail);
        } else if (r.kind == EventKind::FrameEmit && video_flow && r.flow == video_flow &&
                   r.detail == "frame 0") {
            out.push_back("first-frame-emitted");
        }
    }
    return out;
}

RunResult run_normal_mode(const ScenarioConfig& config, Policy emergency_policy) {
    return HshRun(config, Mode::Normal, emergency_policy).execute();
}

RunResult run_emergency_mode(const ScenarioConfig& config, Policy policy) {
    return HshRun(config, Mode::Emergency, policy).execute();
}

SweepRow to_row(const RunResult& result) {
    SweepRow row;
    row.users = result.users;
    row.policy = result.policy;
    row.mean_quality = result.metrics.mean_quality;
    row.quality_stddev = result.metrics.quality_stddev;
    row.abort_time_ms = result.metrics.abort_time_ms;
    return row;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& config) {
    std::vector<Policy> policies;
    if (config.policy != PolicyChoice::BestEffort) policies.push_back(Policy::QoSAware);
    if (config.policy != PolicyChoice::QoSAware) policies.push_back(Policy::BestEffort);

    std::vector<std::future<SweepRow>> runs;
    for (unsigned users : config.sweep_users) {
        for (Policy policy : policies) {
            ScenarioConfig c = config;
            c.mode = Mode::Emergency;
            c.background_users = users;
            runs.push_back(std::async(std::launch::async, [c, policy] {
                try {
                    return to_row(run_emergency_mode(c, policy));
                } catch (const Error& e) {
                    SweepRow row;
                    row.users = c.background_users;
                    row.policy = policy;
                    row.failed = true;
                    row.error = e.what();
                    return row;
                }
            }));
        }
    }
    std::vector<SweepRow> rows;
    for (auto& r : runs) rows.push_back(r.get());
    return rows;
}

std::string metrics_csv_header() { return "scenario,N,policy,mean_quality,abort_time_ms\n"; }

std::string metrics_csv_row(std::string_view scenario, const SweepRow& row) {
    std::string out(scenario);
    out += ',' + std::to_string(row.users) + ',' + std::string(to_string(row.policy)) + ',';
    if (row.failed)
        out += "failed";
    else if (!std::isnan(row.mean_quality))
        out += format_number(row.mean_quality);
    out += ',';
    if (row.abort_time_ms) out += format_number(*row.abort_time_ms);
    out += '\n';
    return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = metrics_csv_header();
    for (const auto& r : rows) out += metrics_csv_row("hsh-sweep", r);
    return out;
}

}  // namespace sdfog
