#include "sctflow/library.hpp"

#include <cmath>

namespace sctflow {

const char* flavor_name(Flavor f) {
    switch (f) {
        case Flavor::LVT: return "LVT";
        case Flavor::SVT: return "SVT";
        case Flavor::HVT: return "HVT";
    }
    return "SVT";
}

Flavor parse_flavor(const std::string& s) {
    if (s == "LVT") return Flavor::LVT;
    if (s == "SVT") return Flavor::SVT;
    if (s == "HVT") return Flavor::HVT;
    throw ValidationError("unknown Vt flavor '" + s + "'");
}

double flavor_delay_mult(Flavor f) {
    static const double m[3] = {1.0, 1.5, 2.4};
    return m[static_cast<int>(f)];
}

double flavor_leak_density(Flavor f) {
    static const double d[3] = {80.0, 15.0, 3.0};
    return d[static_cast<int>(f)];
}

std::string cell_name(const std::string& base, Flavor f) { return base + "_" + flavor_name(f); }

int CellLibrary::find(const std::string& n) const {
    auto it = index_.find(n);
    return it == index_.end() ? -1 : it->second;
}

int CellLibrary::require(const std::string& n) const {
    int i = find(n);
    if (i < 0) throw ValidationError("unknown cell kind '" + n + "'");
    return i;
}

const RoConstants& CellLibrary::ro(const std::string& cls) const {
    auto it = ro_classes.find(cls);
    if (it == ro_classes.end()) throw ValidationError("no calibrated RO class '" + cls + "'");
    return it->second;
}

void CellLibrary::add(CellKind k) {
    if (index_.count(k.name)) throw ValidationError("duplicate cell kind '" + k.name + "'");
    index_[k.name] = static_cast<int>(kinds.size());
    kinds.push_back(std::move(k));
}

void CellLibrary::validate() const {
    for (const auto& k : kinds) {
        if (!k.is_port && !(k.area > 0)) throw ValidationError("cell kind " + k.name + " has non-positive area");
        if (k.leakage < 0) throw ValidationError("cell kind " + k.name + " has negative leakage");
        if (k.is_filler && (!k.pin_caps.empty() || !k.output_pin.empty() || k.intrinsic_ps != 0))
            throw ValidationError("filler " + k.name + " must have no pins and no delay");
    }
    for (const auto& [n, c] : ro_classes) {
        if (!(c.tau_dcell > 0 && c.tau_invcell > 0 && c.tau_nand > 0 && c.tau_and > 0 && c.tau_or > 0))
            throw ValidationError("RO class " + n + " has non-positive delay constant");
    }
    if (!(vdd > 0)) throw ValidationError("V_DD must be positive");
}

json CellLibrary::to_json() const {
    json j;
    j["name"] = name;
    j["vdd"] = vdd;
    j["site_width_um"] = site_width_um;
    j["row_height_um"] = row_height_um;
    j["wire_cap_per_fanout_ff"] = wire_cap_per_fanout_ff;
    j["wire_cap_per_um_ff"] = wire_cap_per_um_ff;
    j["clock_tree"] = {{"buffer_fanout", clock_tree.buffer_fanout},
                       {"buffer_energy_fj", clock_tree.buffer_energy_fj},
                       {"buffer_input_cap_ff", clock_tree.buffer_input_cap_ff},
                       {"wire_cap_per_sink_ff", clock_tree.wire_cap_per_sink_ff}};
    json ks = json::array();
    for (const auto& k : kinds) {
        json e;
        e["name"] = k.name;
        e["width_sites"] = k.width_sites;
        e["area"] = k.area;
        e["leakage"] = k.leakage;
        e["pin_caps"] = json::object();
        for (const auto& [p, c] : k.pin_caps) e["pin_caps"][p] = c;
        e["output_pin"] = k.output_pin;
        e["intrinsic_ps"] = k.intrinsic_ps;
        e["slope_ps_per_ff"] = k.slope_ps_per_ff;
        e["toggle_energy_fj"] = k.toggle_energy_fj;
        e["is_filler"] = k.is_filler;
        e["is_sequential"] = k.is_sequential;
        e["is_port"] = k.is_port;
        e["is_ring"] = k.is_ring;
        e["clock_pin"] = k.clock_pin;
        e["async_pins"] = k.async_pins;
        e["function"] = k.function;
        e["flavor"] = k.flavor;
        ks.push_back(std::move(e));
    }
    j["kinds"] = std::move(ks);
    json ro = json::object();
    for (const auto& [n, c] : ro_classes) {
        ro[n] = {{"tau_dcell", c.tau_dcell}, {"tau_invcell", c.tau_invcell}, {"tau_nand", c.tau_nand},
                 {"tau_and", c.tau_and},     {"tau_or", c.tau_or},           {"e_dcell", c.e_dcell},
                 {"e_stage", c.e_stage},     {"flavor", c.flavor}};
    }
    j["ro_classes"] = std::move(ro);
    return j;
}

CellLibrary CellLibrary::from_json(const json& j) {
    try {
        CellLibrary lib;
        lib.name = j.at("name").get<std::string>();
        lib.vdd = j.at("vdd").get<double>();
        lib.site_width_um = j.at("site_width_um").get<double>();
        lib.row_height_um = j.at("row_height_um").get<double>();
        lib.wire_cap_per_fanout_ff = j.at("wire_cap_per_fanout_ff").get<double>();
        lib.wire_cap_per_um_ff = j.at("wire_cap_per_um_ff").get<double>();
        const auto& ct = j.at("clock_tree");
        lib.clock_tree.buffer_fanout = ct.at("buffer_fanout").get<int>();
        lib.clock_tree.buffer_energy_fj = ct.at("buffer_energy_fj").get<double>();
        lib.clock_tree.buffer_input_cap_ff = ct.at("buffer_input_cap_ff").get<double>();
        lib.clock_tree.wire_cap_per_sink_ff = ct.at("wire_cap_per_sink_ff").get<double>();
        for (const auto& e : j.at("kinds")) {
            CellKind k;
            k.name = e.at("name").get<std::string>();
            k.width_sites = e.at("width_sites").get<int>();
            k.area = e.at("area").get<double>();
            k.leakage = e.at("leakage").get<double>();
            for (auto it = e.at("pin_caps").begin(); it != e.at("pin_caps").end(); ++it)
                k.pin_caps[it.key()] = it.value().get<double>();
            k.output_pin = e.at("output_pin").get<std::string>();
            k.intrinsic_ps = e.at("intrinsic_ps").get<double>();
            k.slope_ps_per_ff = e.at("slope_ps_per_ff").get<double>();
            k.toggle_energy_fj = e.at("toggle_energy_fj").get<double>();
            k.is_filler = e.at("is_filler").get<bool>();
            k.is_sequential = e.at("is_sequential").get<bool>();
            k.is_port = e.at("is_port").get<bool>();
            k.is_ring = e.at("is_ring").get<bool>();
            k.clock_pin = e.at("clock_pin").get<std::string>();
            k.async_pins = e.at("async_pins").get<std::vector<std::string>>();
            k.function = e.at("function").get<std::string>();
            k.flavor = e.at("flavor").get<std::string>();
            lib.add(std::move(k));
        }
        for (auto it = j.at("ro_classes").begin(); it != j.at("ro_classes").end(); ++it) {
            const auto& e = it.value();
            RoConstants c;
            c.tau_dcell = e.at("tau_dcell").get<double>();
            c.tau_invcell = e.at("tau_invcell").get<double>();
            c.tau_nand = e.at("tau_nand").get<double>();
            c.tau_and = e.at("tau_and").get<double>();
            c.tau_or = e.at("tau_or").get<double>();
            c.e_dcell = e.at("e_dcell").get<double>();
            c.e_stage = e.at("e_stage").get<double>();
            c.flavor = e.at("flavor").get<std::string>();
            lib.ro_classes[it.key()] = c;
        }
        lib.validate();
        return lib;
    } catch (const json::exception& e) {
        throw ParseError(std::string("library section: ") + e.what());
    }
}

namespace {

struct LogicSpec {
    const char* base;
    const char* function;
    int sites;
    std::vector<std::pair<std::string, double>> pins;
    const char* out;
    double intrinsic, slope, energy;
    bool seq;
};

}  // namespace

CellLibrary make_default_library() {
    CellLibrary lib;
    const double site_area = lib.site_width_um * lib.row_height_um;
    const std::vector<LogicSpec> logic = {
        {"INV_X1", "INV", 2, {{"A", 1.5}}, "Y", 10, 4, 0.8, false},
        {"BUF_X1", "BUF", 3, {{"A", 1.4}}, "Y", 22, 3, 1.2, false},
        {"NAND2_X1", "NAND2", 3, {{"A", 1.6}, {"B", 1.6}}, "Y", 14, 5, 1.0, false},
        {"NOR2_X1", "NOR2", 3, {{"A", 1.7}, {"B", 1.7}}, "Y", 18, 6, 1.1, false},
        {"AND2_X1", "AND2", 4, {{"A", 1.5}, {"B", 1.5}}, "Y", 28, 4, 1.4, false},
        {"OR2_X1", "OR2", 4, {{"A", 1.5}, {"B", 1.5}}, "Y", 32, 4, 1.5, false},
        {"XOR2_X1", "XOR2", 6, {{"A", 2.2}, {"B", 2.2}}, "Y", 35, 6, 2.5, false},
        {"MUX2_X1", "MUX2", 6, {{"A", 1.8}, {"B", 1.8}, {"S", 2.4}}, "Y", 40, 5, 2.2, false},
        {"DLY4_X1", "DLY4", 4, {{"A", 1.2}}, "Y", 300, 6, 3.0, false},
        {"DFFR_X2", "DFF", 10, {{"D", 1.6}, {"CK", 1.4}, {"RN", 1.2}}, "Q", 55, 4, 5.0, true},
        {"DFFR_X1", "DFF", 9, {{"D", 1.5}, {"CK", 1.4}, {"RN", 1.1}}, "Q", 60, 18, 4.0, true},
    };
    const std::vector<LogicSpec> ring = {
        {"RO_DLY", "RO_DLY", 6, {{"A", 1.2}}, "Y", 300, 6, 3.0, false},
        {"RO_INV", "RO_INV", 2, {{"A", 1.5}}, "Y", 10, 4, 0.8, false},
        {"RO_NAND2", "RO_NAND2", 3, {{"A", 1.6}, {"B", 1.6}}, "Y", 14, 5, 1.0, false},
        {"RO_AND2", "RO_AND2", 4, {{"A", 1.5}, {"B", 1.5}}, "Y", 28, 4, 1.4, false},
        {"RO_OR2", "RO_OR2", 4, {{"A", 1.5}, {"B", 1.5}}, "Y", 32, 4, 1.5, false},
    };
    for (Flavor f : {Flavor::LVT, Flavor::SVT, Flavor::HVT}) {
        const double dm = flavor_delay_mult(f);
        const double ld = flavor_leak_density(f) * 1e-3;  // uW / um^2
        for (bool is_ring : {false, true}) {
            for (const auto& s : is_ring ? ring : logic) {
                CellKind k;
                k.name = cell_name(s.base, f);
                k.width_sites = s.sites;
                k.area = round6(s.sites * site_area);
                k.leakage = round6(k.area * ld);
                for (const auto& [p, c] : s.pins) k.pin_caps[p] = c;
                k.output_pin = s.out;
                k.intrinsic_ps = round6(s.intrinsic * dm);
                k.slope_ps_per_ff = round6(s.slope * dm);
                k.toggle_energy_fj = s.energy;
                k.is_sequential = s.seq;
                k.is_ring = is_ring;
                if (s.seq) {
                    k.clock_pin = "CK";
                    k.async_pins = {"RN"};
                }
                k.function = s.function;
                k.flavor = flavor_name(f);
                lib.add(std::move(k));
            }
        }
    }
    for (int w : {1, 2, 4, 8, 16}) {
        CellKind k;
        k.name = "FILL" + std::to_string(w);
        k.width_sites = w;
        k.area = round6(w * site_area);
        k.is_filler = true;
        k.function = "FILL";
        lib.add(std::move(k));
    }
    {
        CellKind k;
        k.name = "ANTENNA";
        k.width_sites = 1;
        k.area = round6(site_area);
        k.pin_caps["A"] = 0.5;
        k.function = "ANTENNA";
        lib.add(std::move(k));
    }
    {
        CellKind k;
        k.name = "PI";
        k.output_pin = "Y";
        k.is_port = true;
        k.intrinsic_ps = 0;
        k.slope_ps_per_ff = 0;
        k.function = "PI";
        lib.add(std::move(k));
        CellKind o;
        o.name = "PO";
        o.pin_caps["A"] = 1.0;
        o.is_port = true;
        o.function = "PO";
        lib.add(std::move(o));
    }
    // Ring-oscillator classes fitted against the measured RO table; see calibrate_ro_constants.
    auto rc = [](double td, double tg, double ed, double eg, const char* fl) {
        RoConstants c;
        c.tau_dcell = td;
        c.tau_invcell = c.tau_nand = c.tau_and = c.tau_or = tg;
        c.e_dcell = ed;
        c.e_stage = eg;
        c.flavor = fl;
        return c;
    };
#include "ro_classes.inc"
    lib.validate();
    return lib;
}

LibraryPtr default_library() {
    static const LibraryPtr lib = std::make_shared<const CellLibrary>(make_default_library());
    return lib;
}

}  // namespace sctflow
