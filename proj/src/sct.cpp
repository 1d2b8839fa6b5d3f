#include "sctflow/sct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

#include "sctflow/sta.hpp"

namespace sctflow {

// ---------------------------------------------------------------- ring model

std::string RoDesign::name() const {
    return "RO_D" + std::to_string(total_delay_cells()) + "I" + std::to_string(n_i);
}

void RoDesign::validate() const {
    for (int c : n_d)
        if (c < 0) throw ValidationError("RO delay-cell counts must be non-negative");
    if (n_i < 0) throw ValidationError("RO inverter count must be non-negative");
    if (n_d[0] + n_i < 1) throw ValidationError("RO ring must contain delay (N_D1 + N_i >= 1)");
    if (n_i % 2 != 0) throw ValidationError("RO inverter count must be even so the NAND closes an inverting loop");
    parse_flavor(flavor);
}

json RoDesign::to_json() const {
    return {{"n_d", {n_d[0], n_d[1], n_d[2], n_d[3]}}, {"n_i", n_i}, {"ro_class", ro_class}, {"flavor", flavor},
            {"name", name()}};
}

RoDesign RoDesign::from_json(const json& j) {
    RoDesign r;
    for (size_t i = 0; i < 4; ++i) r.n_d[i] = j.at("n_d").at(i).get<int>();
    r.n_i = j.at("n_i").get<int>();
    r.ro_class = j.value("ro_class", "");
    r.flavor = j.value("flavor", "SVT");
    r.validate();
    return r;
}

int active_delay_cells(const RoDesign& ro, int s0, int s1) {
    if (s0 == 0 && s1 == 0) return ro.n_d[0];
    if (s0 == 1 && s1 == 0) return ro.n_d[0] + ro.n_d[1];
    if (s0 == 0 && s1 == 1) return ro.n_d[0] + ro.n_d[2];
    return ro.n_d[0] + ro.n_d[1] + ro.n_d[2] + ro.n_d[3];
}

double ro_period_ps(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p) {
    const RoConstants& c = lib.ro(ro.ro_class);
    double tau = active_delay_cells(ro, s0, s1) * c.tau_dcell + ro.n_i * c.tau_invcell + c.tau_nand + c.control_lump();
    return tau * p.delay_mult + p.wire_delay_ps;
}

double ro_frequency_mhz(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p) {
    return 1e6 / (2.0 * ro_period_ps(lib, ro, s0, s1, p));
}

double ro_switching_frequency_mhz(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p) {
    return 2.0 * ro_frequency_mhz(lib, ro, s0, s1, p);
}

double ro_leakage_uw(const CellLibrary& lib, const RoDesign& ro) {
    Flavor f = parse_flavor(ro.flavor);
    auto leak = [&](const char* base) { return lib.kind(cell_name(base, f)).leakage; };
    return leak("RO_NAND2") + ro.total_delay_cells() * leak("RO_DLY") + (ro.n_i + 3) * leak("RO_INV") +
           7 * leak("RO_AND2") + 3 * leak("RO_OR2");
}

double ro_power_uw(const CellLibrary& lib, const RoDesign& ro, int s0, int s1, const RoProcess& p) {
    const RoConstants& c = lib.ro(ro.ro_class);
    double energy_fj = (ro.n_i + 11) * c.e_stage + active_delay_cells(ro, s0, s1) * c.e_dcell;
    double f_sa_mhz = ro_switching_frequency_mhz(lib, ro, s0, s1, p);
    // energy is spent once per ring transition; fJ * MHz = 1e-3 uW
    return energy_fj * f_sa_mhz * 1e-3 + ro_leakage_uw(lib, ro) * p.leak_mult;
}

double ro_symbol_power_uw(const CellLibrary& lib, const RoDesign& ro, int v, const RoProcess& p) {
    return ro_power_uw(lib, ro, v & 1, (v >> 1) & 1, p);
}

double power_budget(const PowerReport& target, double fraction) {
    if (!(fraction > 0 && fraction <= 1)) throw ValidationError("budget fraction must be in (0, 1]");
    return fraction * (target.static_uw + target.clock_tree_uw);
}

void Budget::validate() const {
    if (!(power_cap_uw > 0) || !(area_cap_um2 > 0) || !(step_separation_min_ua > 0))
        throw ValidationError("budget values must be positive");
}

// ---------------------------------------------------------------- calibration

std::string default_class_flavor(const std::string& ro_class) {
    if (ro_class == "AES_HF") return "LVT";
    if (ro_class == "AES_LF") return "SVT";
    return "HVT";
}

std::pair<int, int> parse_ro_name(const std::string& name) {
    static const std::regex re("RO_D([0-9]+)I([0-9]+)");
    std::smatch m;
    if (!std::regex_match(name, m, re)) throw ValidationError("bad ring name '" + name + "' (expected RO_D<n>I<m>)");
    return {std::stoi(m[1]), std::stoi(m[2])};
}

namespace {

// Branch splits (N_D1..N_D4) for a delay total with strictly decreasing frequency over the symbols.
std::vector<std::array<int, 4>> ordered_splits(int total) {
    std::vector<std::array<int, 4>> v;
    for (int n1 = 0; n1 <= total; ++n1)
        for (int n2 = 1; n1 + n2 <= total; ++n2)
            for (int n3 = n2 + 1; n1 + n2 + n3 <= total; ++n3) v.push_back({n1, n2, n3, total - n1 - n2 - n3});
    return v;
}

// Weighted 2-parameter least squares: minimise sum ((a_k x + b_k y) - t_k)^2.
bool solve2(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& t, double& x,
            double& y) {
    double saa = 0, sab = 0, sbb = 0, sat = 0, sbt = 0;
    for (size_t k = 0; k < a.size(); ++k) {
        saa += a[k] * a[k];
        sab += a[k] * b[k];
        sbb += b[k] * b[k];
        sat += a[k] * t[k];
        sbt += b[k] * t[k];
    }
    double det = saa * sbb - sab * sab;
    if (std::abs(det) < 1e-300 * std::max(1.0, saa * sbb)) return false;
    x = (sat * sbb - sbt * sab) / det;
    y = (saa * sbt - sab * sat) / det;
    return true;
}

struct RingAnchors {
    std::string name;
    int d = 0, n_i = 0;
    std::vector<const RoAnchor*> rows;
};

struct ClassFit {
    RoConstants c;
    std::vector<std::array<int, 4>> splits;  // per ring
    double max_res = std::numeric_limits<double>::infinity();
};

// Fit constants of one class for fixed splits; returns the max relative residual.
ClassFit fit_class(const std::vector<RingAnchors>& rings, const std::vector<std::array<int, 4>>& splits,
                   const CellLibrary& lib, const std::string& cls, const std::string& flavor) {
    ClassFit out;
    out.splits = splits;
    std::vector<double> a, b, t;
    for (size_t r = 0; r < rings.size(); ++r)
        for (const RoAnchor* an : rings[r].rows) {
            RoDesign ro{splits[r], rings[r].n_i, cls, flavor};
            double tau_obs = 1e6 / (2.0 * an->freq_mhz);
            a.push_back(active_delay_cells(ro, an->symbol & 1, an->symbol >> 1) / tau_obs);
            b.push_back((rings[r].n_i + 11) / tau_obs);
            t.push_back(1.0);
        }
    double td, tg;
    if (!solve2(a, b, t, td, tg) || !(td > 0) || !(tg > 0)) return out;
    std::vector<double> pa, pb, pt, taus, leaks;
    for (size_t r = 0; r < rings.size(); ++r) {
        RoDesign ro{splits[r], rings[r].n_i, cls, flavor};
        double leak = ro_leakage_uw(lib, ro);
        for (const RoAnchor* an : rings[r].rows) {
            int act = active_delay_cells(ro, an->symbol & 1, an->symbol >> 1);
            double tau = act * td + (rings[r].n_i + 11) * tg;
            // P = leak + 1e3 * (A e_d + G e_g) / tau, relative residual weighting
            pa.push_back(1e3 * act / (tau * an->power_uw));
            pb.push_back(1e3 * (rings[r].n_i + 11) / (tau * an->power_uw));
            pt.push_back((an->power_uw - leak) / an->power_uw);
        }
    }
    double ed, eg;
    if (!solve2(pa, pb, pt, ed, eg) || !(ed > 0) || !(eg > 0)) return out;
    RoConstants c;
    c.tau_dcell = td;
    c.tau_invcell = c.tau_nand = c.tau_and = c.tau_or = tg;
    c.e_dcell = ed;
    c.e_stage = eg;
    c.flavor = flavor;
    out.c = c;
    double worst = 0;
    size_t k = 0;
    for (size_t r = 0; r < rings.size(); ++r)
        for (const RoAnchor* an : rings[r].rows) {
            double tau_obs = 1e6 / (2.0 * an->freq_mhz);
            double tau = (a[k] * td + b[k] * tg) * tau_obs;
            double pm = an->power_uw * (pa[k] * ed + pb[k] * eg) + an->power_uw * (1 - pt[k]);
            worst = std::max({worst, std::abs(tau_obs / tau - 1.0), std::abs(pm / an->power_uw - 1.0)});
            ++k;
        }
    out.max_res = worst;
    return out;
}

}  // namespace

CalibrationResult calibrate_ro_constants(const std::vector<RoAnchor>& anchors, const CellLibrary& lib,
                                         double tolerance) {
    if (anchors.size() < 8)
        throw InfeasibleError("anchors", "calibration needs at least 8 anchor rows, got " +
                                             std::to_string(anchors.size()) + " (underdetermined)");
    std::map<std::string, std::vector<RingAnchors>> by_class;
    for (const auto& a : anchors) {
        if (!(a.power_uw > 0) || !(a.freq_mhz > 0) || a.symbol < 0 || a.symbol > 3)
            throw ValidationError("invalid anchor row for " + a.ro_name);
        auto& rings = by_class[a.ro_class];
        auto it = std::find_if(rings.begin(), rings.end(), [&](const RingAnchors& r) { return r.name == a.ro_name; });
        if (it == rings.end()) {
            RingAnchors r;
            r.name = a.ro_name;
            std::tie(r.d, r.n_i) = parse_ro_name(a.ro_name);
            rings.push_back(r);
            it = rings.end() - 1;
        }
        it->rows.push_back(&a);
    }
    CalibrationResult res;
    res.tolerance = tolerance;
    for (const auto& [cls, rings] : by_class) {
        size_t rows = 0;
        for (const auto& r : rings) rows += r.rows.size();
        if (rows < 4) throw InfeasibleError("anchors", "class " + cls + " has fewer than 4 anchors (underdetermined)");
        const std::string flavor = default_class_flavor(cls);
        std::vector<std::vector<std::array<int, 4>>> options;
        for (const auto& r : rings) options.push_back(ordered_splits(r.d));
        ClassFit best;
        std::vector<size_t> idx(rings.size(), 0);
        for (;;) {
            std::vector<std::array<int, 4>> sp;
            for (size_t r = 0; r < rings.size(); ++r) sp.push_back(options[r][idx[r]]);
            ClassFit f = fit_class(rings, sp, lib, cls, flavor);
            if (f.max_res < best.max_res - 1e-12) best = f;
            size_t r = 0;
            while (r < rings.size() && ++idx[r] == options[r].size()) idx[r++] = 0;
            if (r == rings.size()) break;
            if (options.empty()) break;
        }
        if (!std::isfinite(best.max_res))
            throw InfeasibleError("fit", "class " + cls + ": no positive constant set fits the anchors");
        res.classes[cls] = best.c;
        for (size_t r = 0; r < rings.size(); ++r)
            res.rings[cls + "/" + rings[r].name] = RoDesign{best.splits[r], rings[r].n_i, cls, flavor};
    }
    // Residuals through the public model.
    CellLibrary fitted = lib;
    for (const auto& [cls, c] : res.classes) fitted.ro_classes[cls] = c;
    for (const auto& a : anchors) {
        const RoDesign& ro = res.rings.at(a.ro_class + "/" + a.ro_name);
        CalibrationRow row;
        row.anchor = a;
        row.freq_mhz = ro_frequency_mhz(fitted, ro, a.symbol & 1, a.symbol >> 1);
        row.power_uw = ro_power_uw(fitted, ro, a.symbol & 1, a.symbol >> 1);
        row.freq_err = row.freq_mhz / a.freq_mhz - 1.0;
        row.power_err = row.power_uw / a.power_uw - 1.0;
        res.max_residual = std::max({res.max_residual, std::abs(row.freq_err), std::abs(row.power_err)});
        res.rows.push_back(row);
    }
    if (!res.ok()) {
        std::string msg = "calibration residual above tolerance:";
        for (const auto& r : res.rows)
            if (std::abs(r.freq_err) > tolerance || std::abs(r.power_err) > tolerance) {
                char buf[200];
                std::snprintf(buf, sizeof buf, " [%s %s S=%d: power %+.1f%%, freq %+.1f%%]", r.anchor.ro_class.c_str(),
                              r.anchor.ro_name.c_str(), r.anchor.symbol, 100 * r.power_err, 100 * r.freq_err);
                msg += buf;
            }
        throw InfeasibleError("fit", msg);
    }
    return res;
}

json CalibrationResult::to_json() const {
    json j;
    json cl = json::object();
    for (const auto& [n, c] : classes)
        cl[n] = {{"tau_dcell_ps", c.tau_dcell}, {"tau_invcell_ps", c.tau_invcell}, {"tau_nand_ps", c.tau_nand},
                 {"tau_control_lump_ps", c.control_lump()}, {"e_dcell_fj", c.e_dcell}, {"e_stage_fj", c.e_stage},
                 {"flavor", c.flavor}};
    j["classes"] = cl;
    json rg = json::object();
    for (const auto& [n, r] : rings) rg[n] = r.to_json();
    j["rings"] = rg;
    json rows_j = json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"ro_class", r.anchor.ro_class},
                          {"ro_name", r.anchor.ro_name},
                          {"symbol", r.anchor.symbol},
                          {"power_uw_anchor", r.anchor.power_uw},
                          {"freq_mhz_anchor", r.anchor.freq_mhz},
                          {"power_uw_model", r.power_uw},
                          {"freq_mhz_model", r.freq_mhz},
                          {"power_residual", r.power_err},
                          {"freq_residual", r.freq_err}});
    j["residuals"] = rows_j;
    j["max_residual"] = max_residual;
    j["tolerance"] = tolerance;
    return j;
}

std::string CalibrationResult::to_include() const {
    std::string s;
    char buf[256];
    for (const auto& [n, c] : classes) {
        std::snprintf(buf, sizeof buf, "    lib.ro_classes[\"%s\"] = rc(%.12g, %.12g, %.12g, %.12g, \"%s\");\n", n.c_str(),
                      c.tau_dcell, c.tau_invcell, c.e_dcell, c.e_stage, c.flavor.c_str());
        s += buf;
    }
    return s;
}

// ---------------------------------------------------------------- config

void SctConfig::validate() const {
    ro.validate();
    if (n_leak < 1 || n_leak > 2) throw ValidationError("n_leak must be 1 or 2 (two ring selectors)");
    if (n_key <= 0 || n_key % n_leak != 0) throw ValidationError("n_key must be a positive multiple of n_leak");
    if (divider_ratio < 1 || (divider_ratio & (divider_ratio - 1)) != 0)
        throw ValidationError("divider_ratio must be a power of two");
    if (!key_register_order.empty() && static_cast<int>(key_register_order.size()) != n_key)
        throw ValidationError("key_register_order length differs from n_key");
}

json SctConfig::to_json() const {
    json j;
    j["format"] = "sctflow-sct";
    j["ro"] = ro.to_json();
    j["n_leak"] = n_leak;
    j["n_key"] = n_key;
    j["steps"] = steps();
    j["divider_ratio"] = divider_ratio;
    j["trigger_net"] = trigger_net;
    j["key_register_order"] = key_register_order;
    j["target_freq_mhz"] = target_freq_mhz;
    j["budget_uw"] = budget_uw;
    j["area_cap_um2"] = std::isfinite(area_cap_um2) ? json(area_cap_um2) : json(nullptr);
    j["step_separation_ua"] = step_separation_ua;
    j["tc_critical_ps"] = tc_critical_ps;
    j["area_um2"] = area_um2;
    j["leakage_uw"] = leakage_uw;
    j["cell_count"] = cell_count;
    j["symbol_power_uw"] = symbol_power_uw;
    j["symbol_freq_mhz"] = symbol_freq_mhz;
    j["power_violation"] = power_violation;
    return j;
}

SctConfig SctConfig::from_json(const json& j) {
    try {
        SctConfig c;
        c.ro = RoDesign::from_json(j.at("ro"));
        c.n_leak = j.at("n_leak").get<int>();
        c.n_key = j.at("n_key").get<int>();
        c.divider_ratio = j.at("divider_ratio").get<int>();
        c.trigger_net = j.value("trigger_net", "done");
        c.key_register_order = j.value("key_register_order", std::vector<std::string>{});
        c.target_freq_mhz = j.value("target_freq_mhz", 0.0);
        c.budget_uw = j.value("budget_uw", 0.0);
        if (j.contains("area_cap_um2") && !j["area_cap_um2"].is_null()) c.area_cap_um2 = j["area_cap_um2"].get<double>();
        c.step_separation_ua = j.value("step_separation_ua", 2.0);
        c.tc_critical_ps = j.value("tc_critical_ps", 0.0);
        c.area_um2 = j.value("area_um2", 0.0);
        c.leakage_uw = j.value("leakage_uw", 0.0);
        c.cell_count = j.value("cell_count", 0);
        c.symbol_power_uw = j.value("symbol_power_uw", std::vector<double>{});
        c.symbol_freq_mhz = j.value("symbol_freq_mhz", std::vector<double>{});
        c.power_violation = j.value("power_violation", false);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("SCT blueprint: ") + e.what());
    }
}

// ---------------------------------------------------------------- netlist

std::string sct_port_id(const std::string& port) { return "sct/port/" + port; }
std::string sct_key_port(int i) { return "key_" + std::to_string(i); }

namespace {

struct Frag {
    Netlist n;
    Flavor f;
    int add(const std::string& id, const std::string& kind) {
        n.instances.push_back({id, n.library->require(kind), ""});
        return static_cast<int>(n.instances.size()) - 1;
    }
    int cell(const std::string& id, const std::string& base) { return add("sct/" + id, cell_name(base, f)); }
    int net(const std::string& id, int driver) {
        Net x;
        x.id = "sct/" + id;
        x.driver = {driver, n.kind_of(driver).output_pin};
        n.nets.push_back(std::move(x));
        return static_cast<int>(n.nets.size()) - 1;
    }
    void sink(int net_i, int inst, const std::string& pin) { n.nets[static_cast<size_t>(net_i)].sinks.push_back({inst, pin}); }
    int gate1(const std::string& id, const std::string& base, int a) {
        int g = cell(id, base);
        sink(a, g, "A");
        return net(id, g);
    }
    int gate2(const std::string& id, const std::string& base, int a, int b) {
        int g = cell(id, base);
        sink(a, g, "A");
        sink(b, g, "B");
        return net(id, g);
    }
    int mux(const std::string& id, int a, int b, int s) {
        int g = cell(id, "MUX2_X1");
        sink(a, g, "A");
        sink(b, g, "B");
        sink(s, g, "S");
        return net(id, g);
    }
};

int ceil_log2(int v) {
    int b = 0;
    while ((1 << b) < v) ++b;
    return b;
}

}  // namespace

Netlist build_sct_netlist(const SctConfig& cfg, LibraryPtr lib) {
    cfg.validate();
    Frag F;
    F.n.library = lib;
    F.f = parse_flavor(cfg.ro.flavor);
    auto port = [&](const std::string& name) {
        int p = F.add(sct_port_id(name), "PI");
        return F.net(name, p);
    };
    int clk_in = port("clock");
    F.n.nets[static_cast<size_t>(clk_in)].clock_ratio = 1;
    int clk = F.gate1("ck_buf", "BUF_X1", clk_in);
    F.n.nets[static_cast<size_t>(clk)].clock_ratio = 1;
    int rst = F.gate1("rst_buf", "BUF_X1", port("reset"));
    int trig = port("trigger");
    std::vector<int> key(static_cast<size_t>(cfg.n_key));
    for (int i = 0; i < cfg.n_key; ++i) key[static_cast<size_t>(i)] = port(sct_key_port(i));

    auto flop = [&](const std::string& id, const std::string& base, int d, int ck) {
        int g = F.cell(id, base);
        F.sink(d, g, "D");
        F.sink(ck, g, "CK");
        F.sink(rst, g, "RN");
        return g;
    };

    // Clock divider: one toggle flip-flop per halving.
    int dclk = clk;
    int stages = ceil_log2(cfg.divider_ratio);
    for (int k = 0; k < stages; ++k) {
        std::string id = "dv_ff" + std::to_string(k);
        int g = F.cell(id, "DFFR_X2");
        F.sink(dclk, g, "CK");
        F.sink(rst, g, "RN");
        int q = F.net(id, g);
        F.n.nets[static_cast<size_t>(q)].clock_ratio = 1 << (k + 1);
        int nq = F.gate1("dv_inv" + std::to_string(k), "INV_X1", q);
        F.sink(nq, g, "D");
        dclk = q;
    }

    // Controller: trigger synchroniser, start pulse, run flag.
    const std::string FF = "DFFR_X1";
    int sync_ff = flop("tc_sync", FF, trig, dclk);
    int sync = F.net("tc_sync", sync_ff);
    int sync2_ff = flop("tc_sync_d", FF, sync, dclk);
    int sync2 = F.net("tc_sync_d", sync2_ff);
    int nsync2 = F.gate1("tc_sync_n", "INV_X1", sync2);
    int start = F.gate2("tc_start", "AND2_X1", sync, nsync2);
    int run_ff = F.cell("tc_run", FF);
    F.sink(dclk, run_ff, "CK");
    F.sink(rst, run_ff, "RN");
    int run = F.net("tc_run", run_ff);

    // Step counter.
    const int steps = cfg.steps();
    const int bits = std::max(1, ceil_log2(steps));
    std::vector<int> cnt_ff(static_cast<size_t>(bits)), cnt(static_cast<size_t>(bits));
    for (int i = 0; i < bits; ++i) {
        cnt_ff[static_cast<size_t>(i)] = F.cell("tc_cnt" + std::to_string(i), FF);
        F.sink(dclk, cnt_ff[static_cast<size_t>(i)], "CK");
        F.sink(rst, cnt_ff[static_cast<size_t>(i)], "RN");
        cnt[static_cast<size_t>(i)] = F.net("tc_cnt" + std::to_string(i), cnt_ff[static_cast<size_t>(i)]);
    }
    // terminal count: counter == steps-1 while running
    std::vector<int> lits{run};
    for (int i = 0; i < bits; ++i) {
        bool one = ((steps - 1) >> i) & 1;
        lits.push_back(one ? cnt[static_cast<size_t>(i)]
                           : F.gate1("tc_cnt_n" + std::to_string(i), "INV_X1", cnt[static_cast<size_t>(i)]));
    }
    int level = 0;
    while (lits.size() > 1) {
        std::vector<int> next;
        for (size_t k = 0; k + 1 < lits.size(); k += 2)
            next.push_back(F.gate2("tc_tc" + std::to_string(level) + "_" + std::to_string(k / 2), "AND2_X1", lits[k], lits[k + 1]));
        if (lits.size() % 2) next.push_back(lits.back());
        lits = next;
        ++level;
    }
    int tc = lits[0];
    int ntc = F.gate1("tc_tc_n", "INV_X1", tc);
    int hold = F.gate2("tc_hold", "AND2_X1", run, ntc);
    int run_d = F.gate2("tc_run_d", "OR2_X1", start, hold);
    F.sink(run_d, run_ff, "D");
    int carry = run;
    for (int i = 0; i < bits; ++i) {
        std::string s = std::to_string(i);
        int nx = F.gate2("tc_inc" + s, "XOR2_X1", cnt[static_cast<size_t>(i)], carry);
        int d = F.gate2("tc_clr" + s, "AND2_X1", nx, ntc);
        F.sink(d, cnt_ff[static_cast<size_t>(i)], "D");
        if (i + 1 < bits) carry = F.gate2("tc_cy" + s, "AND2_X1", carry, cnt[static_cast<size_t>(i)]);
    }

    // Key selection: one mux tree per lane over the step index.
    std::vector<int> lane_out;
    for (int lane = 0; lane < cfg.n_leak; ++lane) {
        std::vector<int> cur;
        for (int t = 0; t < steps; ++t) cur.push_back(key[static_cast<size_t>(cfg.n_leak * t + lane)]);
        int lv = 0;
        while (cur.size() > 1) {
            std::vector<int> next;
            for (size_t k = 0; k + 1 < cur.size(); k += 2)
                next.push_back(F.mux("tc_l" + std::to_string(lane) + "_m" + std::to_string(lv) + "_" + std::to_string(k / 2),
                                     cur[k], cur[k + 1], cnt[static_cast<size_t>(std::min(lv, bits - 1))]));
            if (cur.size() % 2) next.push_back(cur.back());
            cur = next;
            ++lv;
        }
        lane_out.push_back(F.gate2("tc_lane" + std::to_string(lane), "AND2_X1", cur[0], run));
    }
    int s1 = lane_out[0];
    int s0 = cfg.n_leak == 2 ? lane_out[1] : lane_out[0];

    // Ring oscillator with the three-stage selector path.
    Frag& R = F;  // ring cells use the ring kinds
    const Flavor rf = parse_flavor(cfg.ro.flavor);
    auto rcell = [&](const std::string& id, const char* base) { return R.add("sct/" + id, cell_name(base, rf)); };
    auto r1 = [&](const std::string& id, const char* base, int a) {
        int g = rcell(id, base);
        R.sink(a, g, "A");
        return R.net(id, g);
    };
    auto r2 = [&](const std::string& id, const char* base, int a, int b) {
        int g = rcell(id, base);
        R.sink(a, g, "A");
        R.sink(b, g, "B");
        return R.net(id, g);
    };
    auto chain = [&](const std::string& prefix, int in, int count) {
        for (int k = 0; k < count; ++k) in = r1(prefix + std::to_string(k), "RO_DLY", in);
        return in;
    };
    int nand = rcell("ro_nand", "RO_NAND2");
    R.sink(run, nand, "A");
    int x0 = R.net("ro_nand", nand);
    int x = chain("ro_d1_", x0, cfg.ro.n_d[0]);
    int ns0 = r1("ro_ns0", "RO_INV", s0);
    int s01 = r2("ro_s01", "RO_AND2", s0, s1);
    int ns1 = r1("ro_ns1", "RO_INV", s1);
    int ns01 = r1("ro_ns01", "RO_INV", s01);
    int a_pass = r2("ro_a0", "RO_AND2", x, ns0);
    int a_dly = r2("ro_a1", "RO_AND2", chain("ro_d2_", x, cfg.ro.n_d[1]), s0);
    int a = r2("ro_a", "RO_OR2", a_pass, a_dly);
    int b_pass = r2("ro_b0", "RO_AND2", a, ns1);
    int b_dly = r2("ro_b1", "RO_AND2", chain("ro_d3_", a, cfg.ro.n_d[2]), s1);
    int bb = r2("ro_b", "RO_OR2", b_pass, b_dly);
    int c_pass = r2("ro_c0", "RO_AND2", bb, ns01);
    int c_dly = r2("ro_c1", "RO_AND2", chain("ro_d4_", bb, cfg.ro.n_d[3]), s01);
    int c = r2("ro_c", "RO_OR2", c_pass, c_dly);
    int fb = c;
    for (int k = 0; k < cfg.ro.n_i; ++k) fb = r1("ro_inv" + std::to_string(k), "RO_INV", fb);
    R.sink(fb, nand, "B");
    return std::move(F.n);
}

double fragment_area_um2(const Netlist& n) {
    double a = 0;
    for (size_t i = 0; i < n.instances.size(); ++i) {
        const auto& k = n.kind_of(static_cast<int>(i));
        if (!k.is_port) a += k.area;
    }
    return a;
}

double fragment_leakage_uw(const Netlist& n) {
    double a = 0;
    for (size_t i = 0; i < n.instances.size(); ++i) a += n.kind_of(static_cast<int>(i)).leakage;
    return a;
}

int fragment_cell_count(const Netlist& n) {
    int c = 0;
    for (size_t i = 0; i < n.instances.size(); ++i) c += !n.kind_of(static_cast<int>(i)).is_port;
    return c;
}

double controller_critical_ps(const SctConfig& cfg, LibraryPtr lib, double margin_ps) {
    Netlist n = build_sct_netlist(cfg, lib);
    TimingOptions o;
    o.clock_period_ps = 1e6 / cfg.target_freq_mhz;
    o.margin_ps = margin_ps;
    o.default_endpoint_ratio = cfg.divider_ratio;
    return analyze_timing(n, o).critical_delay;
}

int minimal_divider(const SctConfig& cfg, LibraryPtr lib, double margin_ps) {
    if (!(cfg.target_freq_mhz > 0)) throw ValidationError("target frequency must be positive");
    const double period = 1e6 / cfg.target_freq_mhz;
    for (int ratio = 1; ratio <= 1 << 12; ratio *= 2) {
        SctConfig c = cfg;
        c.divider_ratio = ratio;
        Netlist n = build_sct_netlist(c, lib);
        TimingOptions o;
        o.clock_period_ps = period;
        o.margin_ps = margin_ps;
        o.default_endpoint_ratio = ratio;
        if (analyze_timing(n, o).min_slack() >= 0) return ratio;
    }
    throw InfeasibleError("timing", "trojan controller cannot meet timing at any divider up to 4096");
}

// ---------------------------------------------------------------- search

namespace {

struct SearchOutcome {
    bool found = false;
    RoDesign ro;
    bool any_separation_ok = false;  // some candidate met separation/order (power was binding)
    bool any_area_ok = false;
};

SearchOutcome search_ring(const CellLibrary& lib, const std::string& cls, const std::string& flavor, int n_leak,
                          double cap_uw, double sep_ua, double area_left_um2) {
    SearchOutcome out;
    const Flavor f = parse_flavor(flavor);
    const RoConstants& c = lib.ro(cls);
    auto kind = [&](const char* b) -> const CellKind& { return lib.kind(cell_name(b, f)); };
    const double fixed_area = kind("RO_NAND2").area + 3 * kind("RO_INV").area + 7 * kind("RO_AND2").area + 3 * kind("RO_OR2").area;
    const double fixed_leak = kind("RO_NAND2").leakage + 3 * kind("RO_INV").leakage + 7 * kind("RO_AND2").leakage +
                              3 * kind("RO_OR2").leakage;
    const double d_area = kind("RO_DLY").area, i_area = kind("RO_INV").area;
    const double d_leak = kind("RO_DLY").leakage, i_leak = kind("RO_INV").leakage;
    const double tg_fixed = c.tau_nand + c.control_lump();
    // must agree with ro_power_uw / ro_period_ps
    auto power = [&](int active, int n_i, double leak) {
        double tau = active * c.tau_dcell + n_i * c.tau_invcell + tg_fixed;
        double e = (n_i + 11) * c.e_stage + active * c.e_dcell;
        return e * (1e6 / tau) * 1e-3 + leak;
    };
    const double sep = sep_ua * lib.vdd;
    for (int cells = 2 + 2 + 14; cells <= 64 + 32 + 14; ++cells) {
        for (int n_i = 2; n_i <= 32; n_i += 2) {
            const int d = cells - 14 - n_i;
            if (d < 2 || d > 64) continue;
            if (fixed_area + d * d_area + n_i * i_area > area_left_um2) continue;
            out.any_area_ok = true;
            const double leak = fixed_leak + d * d_leak + n_i * i_leak;
            for (int n1 = 1; n1 <= d; ++n1) {
                const double p0 = power(n1, n_i, leak);
                for (int n2 = 1; n1 + n2 <= d; ++n2) {
                    const double p1 = power(n1 + n2, n_i, leak);
                    for (int n3 = n2 + 1; n1 + n2 + n3 <= d; ++n3) {
                        const double p2 = power(n1 + n3, n_i, leak);
                        const double p3 = power(d, n_i, leak);
                        bool sep_ok = n_leak == 2 ? (p0 - p1 >= sep && p1 - p2 >= sep && p2 - p3 >= sep) : (p0 - p3 >= sep);
                        if (!sep_ok) continue;
                        out.any_separation_ok = true;
                        if (p0 > cap_uw) continue;
                        out.found = true;
                        out.ro = RoDesign{{n1, n2, n3, d - n1 - n2 - n3}, n_i, cls, flavor};
                        return out;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

SctConfig design_sct(const CellLibrary& lib_ref, const SctRequest& req) {
    if (!(req.target_freq_mhz > 0)) throw ValidationError("target frequency must be positive");
    if (req.n_leak < 1 || req.n_leak > 2) throw ValidationError("n_leak must be 1 or 2");
    if (req.n_key <= 0 || req.n_key % req.n_leak) throw ValidationError("n_key must be a positive multiple of n_leak");
    if (!(req.step_separation_ua > 0)) throw ValidationError("step separation must be positive");
    if (!(req.area_cap_um2 > 0)) throw ValidationError("area cap must be positive");
    lib_ref.ro(req.ro_class);
    LibraryPtr lib = std::make_shared<const CellLibrary>(lib_ref);

    PowerReport eff = req.target;
    eff.static_uw += req.competing_leakage_uw;
    const double cap = power_budget(eff, req.fraction);
    const double target_leak = req.target_leakage_uw > 0 ? req.target_leakage_uw : req.target.static_uw;

    std::vector<std::string> flavors;
    if (!req.flavor.empty()) {
        parse_flavor(req.flavor);
        flavors = {req.flavor};
    } else {
        flavors = {"LVT", "SVT", "HVT"};
    }

    std::string last_error;
    std::string last_constraint;
    for (size_t fi = 0; fi < flavors.size(); ++fi) {
        SctConfig cfg;
        cfg.n_leak = req.n_leak;
        cfg.n_key = req.n_key;
        cfg.target_freq_mhz = req.target_freq_mhz;
        cfg.budget_uw = cap;
        cfg.area_cap_um2 = req.area_cap_um2;
        cfg.step_separation_ua = req.step_separation_ua;
        cfg.ro = RoDesign{{0, 1, 2, 0}, 2, req.ro_class, flavors[fi]};
        cfg.divider_ratio = minimal_divider(cfg, lib, req.margin_ps);
        cfg.tc_critical_ps = controller_critical_ps(cfg, lib, req.margin_ps);

        // Area of controller + divider alone (ring-free fragment minus the placeholder ring).
        Netlist probe = build_sct_netlist(cfg, lib);
        double fixed_area = fragment_area_um2(probe);
        for (size_t i = 0; i < probe.instances.size(); ++i)
            if (probe.kind_of(static_cast<int>(i)).is_ring) fixed_area -= probe.kind_of(static_cast<int>(i)).area;
        double fixed_leak = fragment_leakage_uw(probe);
        for (size_t i = 0; i < probe.instances.size(); ++i)
            if (probe.kind_of(static_cast<int>(i)).is_ring) fixed_leak -= probe.kind_of(static_cast<int>(i)).leakage;
        if (fi + 1 < flavors.size() && fixed_leak > 0.10 * target_leak) {
            last_constraint = "stealth";
            last_error = "stealth: trojan leakage above 10 % of the target leakage";
            continue;
        }
        if (fixed_area > req.area_cap_um2) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "area: controller and divider need %.2f um^2, cap is %.2f um^2", fixed_area,
                          req.area_cap_um2);
            throw InfeasibleError("area", buf);
        }
        const double search_cap = req.enforce_power ? cap : std::numeric_limits<double>::infinity();
        SearchOutcome s = search_ring(*lib, req.ro_class, flavors[fi], req.n_leak, search_cap, req.step_separation_ua,
                                      req.area_cap_um2 - fixed_area);
        if (!s.found) {
            char buf[300];
            if (!s.any_area_ok) {
                last_constraint = "area";
                std::snprintf(buf, sizeof buf, "area: no ring fits in the %.2f um^2 left under the area cap",
                              req.area_cap_um2 - fixed_area);
            } else if (s.any_separation_ok) {
                last_constraint = "power";
                std::snprintf(buf, sizeof buf,
                              "power: every ring with %.2f uA steps exceeds the %.3f uW budget (the power constraint "
                              "is violated)",
                              req.step_separation_ua, cap);
            } else {
                last_constraint = "separation";
                std::snprintf(buf, sizeof buf, "separation: no ring reaches %.2f uA between adjacent steps",
                              req.step_separation_ua);
            }
            last_error = buf;
            continue;
        }
        cfg.ro = s.ro;
        Netlist frag = build_sct_netlist(cfg, lib);
        cfg.area_um2 = fragment_area_um2(frag);
        cfg.leakage_uw = fragment_leakage_uw(frag);
        cfg.cell_count = fragment_cell_count(frag);
        cfg.symbol_power_uw.clear();
        cfg.symbol_freq_mhz.clear();
        for (int v = 0; v < 4; ++v) {
            cfg.symbol_power_uw.push_back(ro_symbol_power_uw(*lib, cfg.ro, v));
            cfg.symbol_freq_mhz.push_back(ro_frequency_mhz(*lib, cfg.ro, v & 1, v >> 1));
        }
        cfg.power_violation = cfg.symbol_power_uw[0] > cap;
        // Stealth rule: fastest flavor whose trojan leakage stays within 10 % of the target's.
        if (fi + 1 < flavors.size() && cfg.leakage_uw > 0.10 * target_leak) {
            last_constraint = "stealth";
            last_error = "stealth: trojan leakage above 10 % of the target leakage";
            continue;
        }
        return cfg;
    }
    throw InfeasibleError(last_constraint, last_error);
}

}  // namespace sctflow
