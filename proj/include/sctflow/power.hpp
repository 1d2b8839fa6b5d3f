#pragma once

#include <cstdint>
#include <vector>

#include "sctflow/design.hpp"
#include "sctflow/sta.hpp"

namespace sctflow {

struct ProcessModel {
    double sigma_global_leak = 0.10;
    double sigma_global_delay = 0.02;
    double sigma_local_leak = 0.08;
    double sigma_local_delay = 0.02;
    double sigma_wire = 0.15;
    double corr_length_um = 50.0;
    double grid_pitch_um = 10.0;

    static ProcessModel nominal();
    json to_json() const;
    static ProcessModel from_json(const json& j);
};

// One die: global multipliers plus a standard-normal field on a grid with
// exponential spatial correlation (separable AR(1)).
struct ProcessSample {
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    double global_leak = 1.0;
    double global_delay = 1.0;
    double wire = 1.0;
    double sigma_local_leak = 0.0;
    double sigma_local_delay = 0.0;
    double pitch_um = 10.0;
    int nx = 0, ny = 0;
    std::vector<double> z;

    static ProcessSample nominal();
    int node(double x_um, double y_um) const;
    double z_at(double x_um, double y_um) const;
    double local_leak(double x_um, double y_um) const;
    double local_delay(double x_um, double y_um) const;
    // Corner: global delay/leak at k sigma (k>0 fast), no local variation.
    static ProcessSample corner(const ProcessModel& m, double k_sigma);
};

ProcessSample draw_process(const ProcessModel& m, double width_um, double height_um, std::uint64_t seed,
                           std::uint64_t index);

std::vector<double> instance_leak_mults(const PlacedDesign& d, const ProcessSample& p);
std::vector<double> instance_delay_mults(const PlacedDesign& d, const ProcessSample& p);

struct PowerReport {
    double static_uw = 0;
    double dynamic_uw = 0;
    double clock_tree_uw = 0;
    double total() const { return static_uw + dynamic_uw + clock_tree_uw; }
    json to_json() const;
    static PowerReport from_json(const json& j);
};

double static_power(const PlacedDesign& d, const ProcessSample& p = ProcessSample::nominal());
// Per-net switching activity in Hz (index aligned with d.nets).
double dynamic_power(const PlacedDesign& d, const std::vector<double>& activity_hz);
std::vector<double> default_activity(const PlacedDesign& d, double freq_mhz);
double net_load_ff(const PlacedDesign& d, const Net& n);
double clock_tree_power(const PlacedDesign& d, double freq_mhz);
PowerReport power_report(const PlacedDesign& d, double freq_mhz, const ProcessSample& p = ProcessSample::nominal());

struct McSummary {
    double nominal = 0;
    double mean = 0;
    double variance = 0;
    double skewness = 0;
    Histogram histogram;
    std::vector<double> samples;
    json to_json() const;
    std::string samples_csv() const;
};

McSummary monte_carlo_static(const PlacedDesign& d, int n_samples, std::uint64_t seed, const ProcessModel& m,
                             int bins = 50, int threads = 1);

}  // namespace sctflow
