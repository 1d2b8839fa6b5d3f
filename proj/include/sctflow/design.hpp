#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sctflow/library.hpp"

namespace sctflow {

struct PinRef {
    int inst = -1;
    std::string pin;
    bool operator==(const PinRef& o) const { return inst == o.inst && pin == o.pin; }
};

struct GateInstance {
    std::string id;
    int kind = -1;
    int x = 0;    // site index within the row
    int row = 0;  // row index
    bool fixed = true;
    bool operator==(const GateInstance& o) const {
        return id == o.id && kind == o.kind && x == o.x && row == o.row && fixed == o.fixed;
    }
};

struct Net {
    std::string id;
    PinRef driver;
    std::vector<PinRef> sinks;
    double extra_cap_ff = 0;
    int clock_ratio = 0;  // >0 marks a clock net: period = ratio * clock_period
};

struct RowGeometry {
    int count = 0;
    int sites_per_row = 0;
};

// Semantic labels; empty strings / vectors when absent.
struct DesignTags {
    std::string clock;
    std::string reset;
    std::string done;
    std::vector<std::string> key_bits;  // net ids of key register outputs, bit order
    bool empty() const { return clock.empty() && reset.empty() && done.empty() && key_bits.empty(); }
};

struct TargetProfile {
    std::string name;
    std::string family;  // AES or PST
    double frequency_mhz = 0;
    double density = 0;  // fraction
    double leakage_uw = 0;
    double clock_tree_uw = 0;
    double total_uw = 0;
    int n_key = 0;
    int n_state = 0;
    double row_area_um2 = 0;       // calibrated core row area
    double key_region_packing = 0; // extra occupancy near the key bank, [0,1)
    void validate() const;
    json to_json() const;
    static TargetProfile from_json(const json& j);
};

class PlacedDesign {
   public:
    std::string name;
    LibraryPtr library;
    RowGeometry rows;
    double clock_period_ps = 0;
    std::vector<GateInstance> instances;
    std::vector<Net> nets;
    DesignTags tags;
    double activity_factor = 0.1;
    json extra = json::object();  // optional sections (profile, sct blueprint)

    void rebuild_index();
    int inst_index(const std::string& id) const;  // -1 if absent
    int net_index(const std::string& id) const;

    const CellKind& kind_of(int inst) const { return library->kind(instances[static_cast<size_t>(inst)].kind); }
    const CellKind& kind_of(const GateInstance& g) const { return library->kind(g.kind); }

    double row_area() const;
    double cell_area() const;  // non-filler, non-port
    double density() const { return cell_area() / row_area(); }
    double core_width_um() const { return rows.sites_per_row * library->site_width_um; }
    double core_height_um() const { return rows.count * library->row_height_um; }
    // Cell centre in um.
    double x_um(const GateInstance& g) const;
    double y_um(const GateInstance& g) const;

    // Structural checks: resolution of references, site grid, overlaps, density range.
    void validate() const;

    json to_json() const;
    std::string serialize() const;
    static PlacedDesign from_json(const json& j);

   private:
    std::unordered_map<std::string, int> inst_idx_;
    std::unordered_map<std::string, int> net_idx_;
};

PlacedDesign parse_design(const std::string& path);
PlacedDesign parse_design_text(const std::string& text);

// Field-level equality of everything the exchange format stores.
bool same_design(const PlacedDesign& a, const PlacedDesign& b);

// Connectivity view. Instance order follows the design with fillers dropped.
struct Netlist {
    LibraryPtr library;
    struct Inst {
        std::string id;
        int kind;
        std::string source_id;  // original id; empty in attacker mode
    };
    std::vector<Inst> instances;
    std::vector<Net> nets;  // PinRef::inst indexes `instances`
    DesignTags tags;        // empty in attacker mode
    const CellKind& kind_of(int i) const { return library->kind(instances[static_cast<size_t>(i)].kind); }
};

enum class ExtractMode { attacker, oracle };

Netlist extract_netlist(const PlacedDesign& d, ExtractMode mode);
// Netlist keeping original ids and tags (used for sign-off on own designs).
Netlist design_netlist(const PlacedDesign& d);

struct FillerSpan {
    int inst;
    std::string id;
    int row;
    int x;
    int width;
};
struct FillerReport {
    std::vector<FillerSpan> fillers;
    double freed_area_um2 = 0;
};
FillerReport find_fillers(const PlacedDesign& d);
PlacedDesign remove_fillers(const PlacedDesign& d, const std::vector<std::string>& selection);

enum class KeyMode { oracle, heuristic };

struct RegisterGroup {
    std::vector<int> registers;  // netlist instance indices
    int cone_size = 0;
    double confidence = 0;
};

struct KeyRegisterResult {
    std::vector<int> registers;  // netlist instance indices, leak order
    std::vector<std::string> ids;
    std::vector<std::string> q_nets;
    std::vector<RegisterGroup> candidates;  // ranked, heuristic mode
};

// Throws ValidationError with ranked candidates in the message when no exact group exists.
KeyRegisterResult find_key_registers(const Netlist& n, int n_key, KeyMode mode);
// Candidate ranking without throwing.
std::vector<RegisterGroup> rank_register_groups(const Netlist& n, int n_key);

PlacedDesign generate_target(const TargetProfile& profile, std::uint64_t seed, LibraryPtr lib = nullptr);

}  // namespace sctflow
