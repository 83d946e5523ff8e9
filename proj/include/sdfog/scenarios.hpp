#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdfog/controller.hpp"
#include "sdfog/netsim.hpp"
#include "sdfog/som.hpp"

namespace sdfog {

enum class Mode { Normal, Emergency, Sweep };
enum class PolicyChoice { QoSAware, BestEffort, Both };

Mode parse_mode(std::string_view text);
PolicyChoice parse_policy(std::string_view text);
std::string_view to_string(Mode mode);

struct VideoParams {
    double fps = 25.0;
    double frame_size_bits = 20000.0;  // 25 fps x 20 000 bits = 500 kbps
    double playout_deadline_ms = 200.0;
};

// Health Smart Home scenario parameters. Unset fields reproduce the
// emulated setup: 1 Mbps / 20 ms backbone, 250 kbps background users,
// 500 kbps reservation for the CCTV stream.
struct ScenarioConfig {
    std::string topology_file;  // empty: built-in HSH topology
    Mode mode = Mode::Emergency;
    unsigned background_users = 0;
    double background_rate_kbps = 250.0;
    double background_stagger_ms = 100.0;
    double backbone_capacity_kbps = 1000.0;
    double backbone_latency_ms = 20.0;
    double reservation_kbps = 500.0;
    PolicyChoice policy = PolicyChoice::Both;
    VideoParams video;
    double duration_ms = 20000.0;
    std::uint64_t seed = 1;

    double backup_rate_kbps = 50.0;
    std::optional<double> fall_at_ms;  // emergency mode defaults to 500 ms
    std::string controller_node = "cloud";

    // Stream abort rule for best-effort video; optionally also for QoS video.
    std::optional<AbortRule> abort_rule = AbortRule{5000.0, 50.0};
    bool abort_applies_to_qos = false;

    std::vector<unsigned> sweep_users = {0, 2, 4, 8, 12, 16, 20};
};

// Parses the JSON scenario document; relative topology paths resolve
// against `base_dir`.
ScenarioConfig parse_scenario_config(std::string_view text, const std::string& base_dir = "");
ScenarioConfig load_scenario_config(const std::string& path);

// The built-in topology document (without background users).
std::string_view default_hsh_topology();

struct HshWorld {
    std::unique_ptr<Controller> controller;

    NodeId patient_phone;
    NodeId home_gateway;
    NodeId backbone;
    NodeId cloud;
    NodeId owner_phone;
    NodeId streaming_server;
    std::vector<NodeId> users;
    LinkId backbone_link;

    ServiceId accelerometer;
    ServiceId body_sensors;
    ServiceId cctv;
    ServiceId alarm;
    ServiceId hsh_control;
    ServiceId hsh_backup;
    ServiceId hsh_alerts;
    ServiceId media_server;
    std::vector<ServiceId> media_clients;
};

HshWorld build_hsh_topology(const ScenarioConfig& config);

// The ordered control milestones of emergency operation.
inline const std::vector<std::string> kEmergencyMilestones = {
    "fall-detect",   "control-notify", "task-submit",        "discovery-complete",
    "flow-created",  "flow-installed", "first-frame-emitted"};

struct RunResult {
    Mode mode = Mode::Emergency;
    Policy policy = Policy::QoSAware;
    unsigned users = 0;

    Metrics metrics;  // of the CCTV stream; mean is NaN when no stream ran
    std::optional<FlowId> video_flow;
    std::optional<FlowId> backup_flow;
    std::vector<FlowId> background_flows;
    std::optional<double> detection_ms;
    double backup_delivered_bytes = 0.0;

    std::vector<std::string> milestones;  // control trace, in order
    SimTrace trace;
    std::string discovery_csv;  // query_id,node,time_ms,messages
    std::string flows_csv;
};

// Milestone names in trace order: ControlMessage details plus
// "first-frame-emitted" for the first frame of `video_flow`.
std::vector<std::string> control_milestones(const SimTrace& trace, std::optional<FlowId> video_flow);

// Backup flow from the patient phone to the cloud; a configured fall hands
// off to emergency operation using `emergency_policy`.
RunResult run_normal_mode(const ScenarioConfig& config, Policy emergency_policy = Policy::QoSAware);

// Fall detection through CCTV streaming under `policy`. Throws
// ScenarioFailure when the stream's flow cannot be admitted.
RunResult run_emergency_mode(const ScenarioConfig& config, Policy policy);

struct SweepRow {
    unsigned users = 0;
    Policy policy = Policy::QoSAware;
    bool failed = false;
    std::string error;
    double mean_quality = 0.0;
    double quality_stddev = 0.0;
    std::optional<double> abort_time_ms;
};

// Every (users, policy) pair; runs in parallel, rows in sweep order.
std::vector<SweepRow> run_sweep(const ScenarioConfig& config);

// scenario,N,policy,mean_quality,abort_time_ms
std::string metrics_csv_header();
std::string metrics_csv_row(std::string_view scenario, const SweepRow& row);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);
SweepRow to_row(const RunResult& result);

}  // namespace sdfog
