#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sdfog/errors.hpp"
#include "sdfog/scenarios.hpp"

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sdfog::Error("cannot write " + path);
    out << text;
}

void print_nested(const std::exception& e, int depth = 0) {
    std::cerr << std::string(2 * depth, ' ') << e.what() << '\n';
    try {
        std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
        print_nested(inner, depth + 1);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Software-defined fog simulator"};
    app.require_subcommand(1);
    CLI::App* run = app.add_subcommand("run", "Run an HSH scenario");

    std::string scenario, mode, policy, out_path, trace_path, flows_path;
    std::optional<unsigned> users;
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
    bool trace_discovery = false;

    run->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode)->check(CLI::IsMember({"normal", "emergency", "sweep"}));
    run->add_option("--users", users, "Background users");
    run->add_option("--policy", policy)->check(CLI::IsMember({"qos", "best-effort", "both"}));
    run->add_option("--duration-ms", duration);
    run->add_option("--seed", seed);
    run->add_option("--out", out_path, "Metrics CSV (default: stdout)");
    run->add_option("--trace", trace_path, "Event trace CSV");
    run->add_option("--flows", flows_path, "Installed flows CSV");
    run->add_flag("--trace-discovery", trace_discovery, "Discovery trace rows on stderr");

    CLI11_PARSE(app, argc, argv);

    try {
        sdfog::ScenarioConfig config = sdfog::load_scenario_config(scenario);
        if (!mode.empty()) config.mode = sdfog::parse_mode(mode);
        if (!policy.empty()) config.policy = sdfog::parse_policy(policy);
        if (users) config.background_users = *users;
        if (duration) config.duration_ms = *duration;
        if (seed) config.seed = *seed;

        std::string metrics;
        std::string trace;
        std::string flows;
        std::string discovery;
        if (config.mode == sdfog::Mode::Sweep) {
            metrics = sdfog::sweep_to_csv(sdfog::run_sweep(config));
        } else {
            std::vector<sdfog::Policy> policies;
            if (config.policy != sdfog::PolicyChoice::BestEffort) policies.push_back(sdfog::Policy::QoSAware);
            if (config.policy != sdfog::PolicyChoice::QoSAware) policies.push_back(sdfog::Policy::BestEffort);
            metrics = sdfog::metrics_csv_header();
            const std::string name = "hsh-" + std::string(sdfog::to_string(config.mode));
            bool header = true;
            for (sdfog::Policy p : policies) {
                sdfog::SweepRow row;
                try {
                    sdfog::RunResult r = config.mode == sdfog::Mode::Normal
                                             ? sdfog::run_normal_mode(config, p)
                                             : sdfog::run_emergency_mode(config, p);
                    row = sdfog::to_row(r);
                    trace += r.trace.to_csv(header);
                    flows += header ? r.flows_csv : r.flows_csv.substr(r.flows_csv.find('\n') + 1);
                    discovery += r.discovery_csv;
                    header = false;
                } catch (const sdfog::ScenarioFailure& e) {
                    row.users = config.background_users;
                    row.policy = p;
                    row.failed = true;
                    std::cerr << "run failed (" << sdfog::to_string(p) << "): " << e.what() << '\n';
                }
                metrics += sdfog::metrics_csv_row(name, row);
                if (config.mode == sdfog::Mode::Normal) break;
            }
        }

        if (out_path.empty())
            std::cout << metrics;
        else
            write_file(out_path, metrics);
        if (!trace_path.empty()) write_file(trace_path, trace);
        if (!flows_path.empty()) write_file(flows_path, flows);
        if (trace_discovery) std::cerr << "query_id,node,time_ms,messages\n" << discovery;
    } catch (const std::exception& e) {
        print_nested(e);
        return 1;
    }
    return 0;
}
