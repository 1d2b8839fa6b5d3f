#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sctflow/design.hpp"

namespace sctflow {

struct TimingOptions {
    double clock_period_ps = 1000;
    double margin_ps = 0;
    double global_delay_mult = 1.0;
    const std::vector<double>* inst_delay_mult = nullptr;  // per netlist instance, optional
    int default_endpoint_ratio = 1;  // capture ratio for primary outputs and ring-cell inputs
    std::function<bool(int)> endpoint_filter;  // keep endpoints owned by these instances
};

struct EndpointTiming {
    std::string name;  // inst/pin
    int inst = -1;
    double arrival = 0;
    double period = 0;  // capture period (clock_period * ratio)
    double slack = 0;
};

struct TimingReport {
    std::vector<std::string> critical_path;  // instance ids, launch to capture
    double critical_delay = 0;
    double clock_period = 0;
    double margin = 0;
    std::map<std::string, double> slack_per_endpoint;
    std::vector<EndpointTiming> endpoints;
    double min_slack() const;
    const EndpointTiming* worst() const;
    json to_json() const;
};

struct CombinationalCycle : ValidationError {
    explicit CombinationalCycle(std::vector<std::string> cyc);
    std::vector<std::string> cycle;
};

TimingReport analyze_timing(const Netlist& n, const TimingOptions& opt);

// Highest clock (MHz) giving non-negative slack everywhere.
double estimate_frequency(const Netlist& n, double margin_ps, const TimingOptions& base = {});

struct Histogram {
    std::vector<double> lower;  // bin lower edges
    std::vector<double> width;
    std::vector<long> counts;
    std::string to_csv(const std::string& value_column) const;  // bin centre, count
    long total() const;
};

Histogram make_histogram(const std::vector<double>& values, int bins);
Histogram slack_histogram(const TimingReport& r, int bins);

}  // namespace sctflow
