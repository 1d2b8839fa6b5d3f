#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "sctflow/design.hpp"
#include "sctflow/power.hpp"
#include "sctflow/presets.hpp"

namespace sctflow {

// Ring oscillator sizing. n_d = (N_D1, N_D2, N_D3, N_D4); n_i inverters in the loop.
struct RoDesign {
    std::array<int, 4> n_d{0, 0, 0, 0};
    int n_i = 2;
    std::string ro_class;      // constants set, e.g. AES_HF
    std::string flavor = "SVT";  // Vt flavor of the ring cells

    int total_delay_cells() const { return n_d[0] + n_d[1] + n_d[2] + n_d[3]; }
    // NAND + delay cells + inverters + 7 AND + 3 OR + 3 control inverters
    int cell_count() const { return total_delay_cells() + n_i + 14; }
    std::string name() const;  // RO_D<total>I<n_i>
    void validate() const;
    json to_json() const;
    static RoDesign from_json(const json& j);
};

struct RoProcess {
    double delay_mult = 1.0;
    double leak_mult = 1.0;
    double wire_delay_ps = 0.0;
};

// Selector pair to/from the 2-bit symbol value v = S1*2 + S0.
inline int symbol_of(int s0, int s1) { return s1 * 2 + s0; }

int active_delay_cells(const RoDesign& ro, int s0, int s1);
double ro_period_ps(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p = {});
double ro_frequency_mhz(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p = {});
// Switching frequency of the ring nets, twice the oscillation frequency.
double ro_switching_frequency_mhz(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p = {});
double ro_leakage_uw(const CellLibrary& lib, const RoDesign& ro);
double ro_power_uw(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p = {});
// Power of symbol v (S1 = v>>1, S0 = v&1).
double ro_symbol_power_uw(const CellLibrary& lib, const RoDesign& ro, int v, const RoProcess& p = {});

double power_budget(const PowerReport& target, double fraction);

struct Budget {
    double power_cap_uw = 0;
    double area_cap_um2 = std::numeric_limits<double>::infinity();
    double step_separation_min_ua = 2.0;
    void validate() const;
};

// ---- calibration ----

struct CalibrationRow {
    RoAnchor anchor;
    double power_uw = 0;
    double freq_mhz = 0;
    double power_err = 0;  // relative
    double freq_err = 0;
};

struct CalibrationResult {
    std::map<std::string, RoConstants> classes;
    std::map<std::string, RoDesign> rings;  // by ring name within class, key "<class>/<ring>"
    std::vector<CalibrationRow> rows;
    double max_residual = 0;
    double tolerance = 0.10;
    bool ok() const { return max_residual <= tolerance; }
    json to_json() const;
    std::string to_include() const;  // frozen-constant source text
};

// Default ring flavor used when calibrating a class.
std::string default_class_flavor(const std::string& ro_class);
// Parse RO_D<d>I<i>.
std::pair<int, int> parse_ro_name(const std::string& name);

CalibrationResult calibrate_ro_constants(const std::vector<RoAnchor>& anchors, const CellLibrary& lib,
                                         double tolerance = 0.10);

// ---- design ----

struct SctConfig {
    RoDesign ro;
    int n_leak = 2;
    int n_key = 128;
    int divider_ratio = 1;
    std::string trigger_net = "done";
    std::vector<std::string> key_register_order;  // filled at insertion
    double target_freq_mhz = 0;
    double budget_uw = 0;
    double area_cap_um2 = std::numeric_limits<double>::infinity();
    double step_separation_ua = 2.0;
    double tc_critical_ps = 0;
    double area_um2 = 0;
    double leakage_uw = 0;
    int cell_count = 0;
    std::vector<double> symbol_power_uw;  // nominal, by symbol value
    std::vector<double> symbol_freq_mhz;
    bool power_violation = false;  // max step above budget_uw

    int steps() const { return n_key / n_leak; }
    int chain_bits() const { return n_key; }
    void validate() const;
    json to_json() const;
    static SctConfig from_json(const json& j);
};

struct SctRequest {
    PowerReport target;
    double target_freq_mhz = 0;
    double target_leakage_uw = 0;  // 0: use target.static_uw
    int n_key = 128;
    int n_leak = 2;
    double fraction = 0.10;
    double competing_leakage_uw = 0;
    double area_cap_um2 = std::numeric_limits<double>::infinity();
    double step_separation_ua = 2.0;
    std::string ro_class;
    std::string flavor;  // empty: choose by the stealth rule
    double margin_ps = 20.0;
    // false: when power is the only binding constraint, return the smallest ring meeting the
    // step separation and flag the violation
    bool enforce_power = true;
};

SctConfig design_sct(const CellLibrary& lib, const SctRequest& req);

// Gate-level SCT fragment. Port instances are PIs named sct/port/<clock|reset|trigger|key_i>.
Netlist build_sct_netlist(const SctConfig& cfg, LibraryPtr lib);
double fragment_area_um2(const Netlist& n);
double fragment_leakage_uw(const Netlist& n);
int fragment_cell_count(const Netlist& n);
// Critical delay of the trojan controller paths at the config's divider.
double controller_critical_ps(const SctConfig& cfg, LibraryPtr lib, double margin_ps = 20.0);
// Smallest power-of-two ratio meeting controller timing.
int minimal_divider(const SctConfig& cfg, LibraryPtr lib, double margin_ps = 20.0);

std::string sct_port_id(const std::string& port);  // sct/port/<port>
std::string sct_key_port(int i);                   // key_<i>

}  // namespace sctflow
