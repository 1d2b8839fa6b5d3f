#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sctflow/common.hpp"

namespace sctflow {

enum class Flavor { LVT = 0, SVT = 1, HVT = 2 };

const char* flavor_name(Flavor f);
Flavor parse_flavor(const std::string& s);

struct CellKind {
    std::string name;
    int width_sites = 0;
    double area = 0;        // um^2
    double leakage = 0;     // uW
    std::map<std::string, double> pin_caps;  // input pin -> fF
    std::string output_pin; // empty when the cell drives nothing
    double intrinsic_ps = 0;
    double slope_ps_per_ff = 0;
    double toggle_energy_fj = 0;
    bool is_filler = false;
    bool is_sequential = false;
    bool is_port = false;
    bool is_ring = false;   // ring-oscillator cell: timing stops at its inputs
    std::string clock_pin;  // sequential only
    std::vector<std::string> async_pins;
    std::string function;   // INV, NAND2, DFF, ... (flavor-free base)
    std::string flavor;     // LVT/SVT/HVT or empty

    bool has_pin(const std::string& p) const { return pin_caps.count(p) > 0; }
};

// Delay/energy constants of one calibrated ring-oscillator class.
struct RoConstants {
    double tau_dcell = 0;    // ps
    double tau_invcell = 0;  // ps
    double tau_nand = 0;     // ps
    double tau_and = 0;      // ps
    double tau_or = 0;       // ps
    double e_dcell = 0;      // fJ per active delay cell per period
    double e_stage = 0;      // fJ per fixed ring stage per period
    std::string flavor = "SVT";

    double control_lump() const { return 7 * tau_and + 3 * tau_or; }
};

struct ClockTreeParams {
    int buffer_fanout = 20;
    double buffer_energy_fj = 8.0;
    double buffer_input_cap_ff = 1.5;
    double wire_cap_per_sink_ff = 0.3;
};

struct CellLibrary {
    std::string name = "sct65";
    double vdd = 1.0;
    double site_width_um = 0.2;
    double row_height_um = 1.8;
    double wire_cap_per_fanout_ff = 2.0;
    double wire_cap_per_um_ff = 0.2;
    ClockTreeParams clock_tree;
    std::vector<CellKind> kinds;
    std::map<std::string, RoConstants> ro_classes;

    int find(const std::string& name) const;  // -1 if absent
    int require(const std::string& name) const;
    const CellKind& kind(int i) const { return kinds[static_cast<size_t>(i)]; }
    const CellKind& kind(const std::string& n) const { return kinds[static_cast<size_t>(require(n))]; }
    const RoConstants& ro(const std::string& cls) const;

    void add(CellKind k);
    void validate() const;

    json to_json() const;
    static CellLibrary from_json(const json& j);

   private:
    std::unordered_map<std::string, int> index_;
};

using LibraryPtr = std::shared_ptr<const CellLibrary>;

// Name of a logic cell in a given flavor, e.g. cell_name("NAND2_X1", SVT).
std::string cell_name(const std::string& base, Flavor f);

// Per-flavor knobs of the default library.
double flavor_delay_mult(Flavor f);
double flavor_leak_density(Flavor f);  // nW / um^2

LibraryPtr default_library();
CellLibrary make_default_library();

}  // namespace sctflow
