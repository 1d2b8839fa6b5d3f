#pragma once

#include <array>
#include <string>
#include <vector>

#include "sctflow/design.hpp"
#include "sctflow/sct.hpp"
#include "sctflow/sta.hpp"

namespace sctflow {

constexpr int kRouteLayers = 6;  // M2..M7
const std::array<const char*, kRouteLayers>& route_layer_names();

struct PatchPin {
    std::string inst;
    std::string pin;
};

struct PatchNet {
    std::string id;
    PatchPin driver;
    std::vector<PatchPin> sinks;
    int clock_ratio = 0;
};

// Connection of an SCT input pin onto an existing victim net.
struct PatchTap {
    std::string net;
    std::string inst;
    std::string pin;
    std::string role;  // clock, reset, trigger, key_<i>
};

struct RemovedFiller {
    GateInstance inst;   // position and kind as in the original design
    std::string kind;    // kind name
    int index = 0;       // position in the original instance list
};

struct AddedInstance {
    std::string id;
    std::string kind;
    int row = 0;
    int x = 0;
};

struct EcoPatch {
    std::string design_name;
    std::string base_hash;  // sha256 of the original serialized design
    std::vector<AddedInstance> added_instances;
    std::vector<PatchNet> added_nets;
    std::vector<PatchTap> taps;
    std::vector<RemovedFiller> removed_fillers;
    std::array<double, kRouteLayers> added_wirelength_um{};
    double spread_um = 0;
    double ro_spread_um = 0;
    double key_centroid_x_um = 0, key_centroid_y_um = 0;
    json sct;  // blueprint

    json to_json() const;
    static EcoPatch from_json(const json& j);
};

struct PlacementOptions {
    // Force SCT cells away from the key bank (used to sweep the spread metric); 0 = nearest gaps.
    double min_distance_um = 0;
};

struct EcoPlacement {
    std::vector<AddedInstance> cells;  // SCT logic cells (no ports, no fillers)
    std::vector<RemovedFiller> removed;
    std::vector<AddedInstance> refill;  // new fillers in leftover freed sites
    double spread_um = 0;               // RMS distance of SCT cells from their centroid
    double ro_spread_um = 0;            // same over ring cells only
    double key_cx = 0, key_cy = 0;
};

// Greedy nearest-gap placement of the SCT fragment into filler sites.
EcoPlacement plan_placement(const PlacedDesign& d, const Netlist& sct, const std::vector<std::string>& key_registers,
                            const PlacementOptions& opt = {});

struct RouteOptions {
    double lower_congestion_scale = 1.0;  // multiplies pre-existing usage on M2..M4
    double m7_bias = 0.25;
    double short_net_um = 5.0;            // shorter nets stay on M2..M4
    // Pre-existing track occupancy per unit cell density, M2..M7.
    std::array<double, kRouteLayers> occupancy = {0.67, 0.85, 0.55, 0.38, 0.61, 0.0};
};

struct RouteReport {
    std::array<double, kRouteLayers> capacity_um{};
    std::array<double, kRouteLayers> preexisting_um{};
    std::array<double, kRouteLayers> added_um{};
    double overflow_um = 0;
    double upper_fraction() const;  // added share on M5..M7
    double lower_fraction() const;  // added share on M2..M4
    json to_json() const;
};

// Wirelength of each added connection (internal nets by HPWL, taps to the nearest existing pin).
std::vector<double> patch_net_lengths(const PlacedDesign& trojaned, const EcoPatch& p);
RouteReport route_estimate(const PlacedDesign& original, const PlacedDesign& trojaned, const EcoPatch& p,
                           const RouteOptions& opt = {});

struct InsertOptions {
    KeyMode key_mode = KeyMode::heuristic;
    std::string trigger_net;  // default: tags.done, else "done"
    PlacementOptions placement;
    RouteOptions route;
};

// Build the patch: locate key registers, tap nets, place and route.
EcoPatch make_patch(const PlacedDesign& d, SctConfig cfg, const InsertOptions& opt = {});

// Apply; extra_tap_cap_ff adds capacitance on every tapped net (stress knob).
PlacedDesign apply_eco(const PlacedDesign& d, const EcoPatch& p, double extra_tap_cap_ff = 0.0);
PlacedDesign revert_eco(const PlacedDesign& trojaned, const EcoPatch& p);

struct SignoffReport {
    bool ok = false;
    double victim_min_slack = 0;
    double sct_min_slack = 0;
    double victim_critical_delay = 0;
    std::vector<EndpointTiming> violations;
    std::string worst_endpoint;
    std::string remedy;
    TimingReport victim;
    TimingReport sct;
    json to_json() const;
};

SignoffReport signoff(const PlacedDesign& trojaned, double margin_ps = 20.0, double global_delay_mult = 1.0);

// Cell-area density per grid tile, CSV x_um,y_um,density[,sct_density].
std::string density_map_csv(const PlacedDesign& d, double tile_um = 10.0);

// Positions of ring cells (um) and HPWL-based ring wire length of an inserted trojan.
struct RingGeometry {
    std::vector<std::pair<double, double>> cells;
    double ring_hpwl_um = 0;
    int nets = 0;  // nets driven by ring cells
};
RingGeometry ring_geometry(const PlacedDesign& trojaned);

}  // namespace sctflow
