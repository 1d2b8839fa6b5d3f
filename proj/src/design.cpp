#include "sctflow/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

namespace sctflow {

void TargetProfile::validate() const {
    if (name.empty()) throw ValidationError("profile needs a name");
    if (family != "AES" && family != "PST") throw ValidationError("profile family must be AES or PST");
    if (!(frequency_mhz > 0 && density > 0 && density <= 1 && leakage_uw > 0 && clock_tree_uw > 0 &&
          total_uw > 0 && n_key > 0 && n_state > 0 && row_area_um2 > 0))
        throw ValidationError("profile " + name + ": all quantities must be positive and density in (0,1]");
    if (key_region_packing < 0 || key_region_packing >= 1)
        throw ValidationError("profile " + name + ": key_region_packing must be in [0,1)");
}

json TargetProfile::to_json() const {
    return {{"name", name},
            {"family", family},
            {"frequency_mhz", frequency_mhz},
            {"density", density},
            {"leakage_uw", leakage_uw},
            {"clock_tree_uw", clock_tree_uw},
            {"total_uw", total_uw},
            {"n_key", n_key},
            {"n_state", n_state},
            {"row_area_um2", row_area_um2},
            {"key_region_packing", key_region_packing}};
}

TargetProfile TargetProfile::from_json(const json& j) {
    TargetProfile p;
    p.name = j.at("name").get<std::string>();
    p.family = j.at("family").get<std::string>();
    p.frequency_mhz = j.at("frequency_mhz").get<double>();
    p.density = j.at("density").get<double>();
    p.leakage_uw = j.at("leakage_uw").get<double>();
    p.clock_tree_uw = j.at("clock_tree_uw").get<double>();
    p.total_uw = j.at("total_uw").get<double>();
    p.n_key = j.at("n_key").get<int>();
    p.n_state = j.at("n_state").get<int>();
    p.row_area_um2 = j.at("row_area_um2").get<double>();
    p.key_region_packing = j.value("key_region_packing", 0.0);
    return p;
}

void PlacedDesign::rebuild_index() {
    inst_idx_.clear();
    net_idx_.clear();
    inst_idx_.reserve(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
        if (!inst_idx_.emplace(instances[i].id, static_cast<int>(i)).second)
            throw ValidationError("duplicate instance id '" + instances[i].id + "'");
    }
    net_idx_.reserve(nets.size());
    for (size_t i = 0; i < nets.size(); ++i) {
        if (!net_idx_.emplace(nets[i].id, static_cast<int>(i)).second)
            throw ValidationError("duplicate net id '" + nets[i].id + "'");
    }
}

int PlacedDesign::inst_index(const std::string& id) const {
    auto it = inst_idx_.find(id);
    return it == inst_idx_.end() ? -1 : it->second;
}

int PlacedDesign::net_index(const std::string& id) const {
    auto it = net_idx_.find(id);
    return it == net_idx_.end() ? -1 : it->second;
}

double PlacedDesign::row_area() const {
    return rows.count * library->row_height_um * rows.sites_per_row * library->site_width_um;
}

double PlacedDesign::cell_area() const {
    double a = 0;
    for (const auto& g : instances) {
        const auto& k = kind_of(g);
        if (!k.is_filler && !k.is_port) a += k.area;
    }
    return a;
}

double PlacedDesign::x_um(const GateInstance& g) const {
    return (g.x + 0.5 * kind_of(g).width_sites) * library->site_width_um;
}

double PlacedDesign::y_um(const GateInstance& g) const { return (g.row + 0.5) * library->row_height_um; }

void PlacedDesign::validate() const {
    if (!library) throw ValidationError("design has no library");
    if (rows.count <= 0 || rows.sites_per_row <= 0) throw ValidationError("row geometry must be positive");
    std::vector<std::vector<std::pair<int, int>>> occ(static_cast<size_t>(rows.count));
    for (size_t i = 0; i < instances.size(); ++i) {
        const auto& g = instances[i];
        if (g.kind < 0 || g.kind >= static_cast<int>(library->kinds.size()))
            throw ValidationError("instance " + g.id + " has invalid kind");
        const auto& k = kind_of(g);
        if (k.is_port) continue;
        if (g.row < 0 || g.row >= rows.count || g.x < 0 || g.x + k.width_sites > rows.sites_per_row)
            throw ValidationError("instance " + g.id + " is off the site grid");
        occ[static_cast<size_t>(g.row)].push_back({g.x, static_cast<int>(i)});
    }
    for (auto& r : occ) {
        std::sort(r.begin(), r.end());
        for (size_t i = 1; i < r.size(); ++i) {
            const auto& prev = instances[static_cast<size_t>(r[i - 1].second)];
            if (prev.x + kind_of(prev).width_sites > r[i].first)
                throw ValidationError("overlapping placement: " + prev.id + " and " +
                                      instances[static_cast<size_t>(r[i].second)].id);
        }
    }
    auto check_pin = [&](const Net& n, const PinRef& p, bool driver) {
        if (p.inst < 0 || p.inst >= static_cast<int>(instances.size()))
            throw ValidationError("net " + n.id + " has a dangling reference");
        const auto& k = kind_of(p.inst);
        bool ok = driver ? (k.output_pin == p.pin) : k.has_pin(p.pin);
        if (!ok)
            throw ValidationError("net " + n.id + " references missing pin " + instances[static_cast<size_t>(p.inst)].id +
                                  "/" + p.pin);
    };
    for (const auto& n : nets) {
        check_pin(n, n.driver, true);
        for (const auto& s : n.sinks) check_pin(n, s, false);
    }
    double d = density();
    if (!(d > 0 && d <= 1 + 1e-9)) throw ValidationError("density out of (0,1]");
    auto need_net = [&](const std::string& id, const char* what) {
        if (!id.empty() && net_index(id) < 0) throw ValidationError(std::string("tag ") + what + " names unknown net " + id);
    };
    need_net(tags.clock, "clock");
    need_net(tags.reset, "reset");
    need_net(tags.done, "done");
    for (const auto& k : tags.key_bits) need_net(k, "key_bit");
}

namespace {

json pin_json(const PlacedDesign& d, const PinRef& p) {
    return json::array({d.instances[static_cast<size_t>(p.inst)].id, p.pin});
}

}  // namespace

json PlacedDesign::to_json() const {
    json j;
    j["format"] = "sctflow-design";
    j["version"] = 1;
    j["name"] = name;
    j["clock_period_ps"] = static_cast<double>(clock_period_ps);
    j["library"] = library->to_json();
    j["rows"] = {{"count", rows.count}, {"sites_per_row", rows.sites_per_row}};
    json insts = json::array();
    for (const auto& g : instances)
        insts.push_back({{"id", g.id}, {"kind", library->kind(g.kind).name}, {"x", g.x}, {"row", g.row}, {"fixed", g.fixed}});
    j["instances"] = std::move(insts);
    json ns = json::array();
    for (const auto& n : nets) {
        json e;
        e["id"] = n.id;
        e["driver"] = pin_json(*this, n.driver);
        json s = json::array();
        for (const auto& p : n.sinks) s.push_back(pin_json(*this, p));
        e["sinks"] = std::move(s);
        e["extra_cap_ff"] = static_cast<double>(n.extra_cap_ff);
        e["clock_ratio"] = n.clock_ratio;
        ns.push_back(std::move(e));
    }
    j["nets"] = std::move(ns);
    j["tags"] = {{"clock", tags.clock}, {"reset", tags.reset}, {"done", tags.done}, {"key_bits", tags.key_bits}};
    j["activity"] = {{"default_factor", static_cast<double>(activity_factor)}};
    j["extra"] = extra;
    return j;
}

std::string PlacedDesign::serialize() const { return dump_json(to_json(), 1); }

PlacedDesign PlacedDesign::from_json(const json& j) {
    PlacedDesign d;
    try {
        if (j.value("format", std::string()) != "sctflow-design") throw ParseError("not an sctflow design file");
        if (j.value("version", 0) != 1) throw ParseError("unsupported design format version");
        d.name = j.at("name").get<std::string>();
        d.clock_period_ps = j.at("clock_period_ps").get<double>();
        d.library = std::make_shared<const CellLibrary>(CellLibrary::from_json(j.at("library")));
        d.rows.count = j.at("rows").at("count").get<int>();
        d.rows.sites_per_row = j.at("rows").at("sites_per_row").get<int>();
        for (const auto& e : j.at("instances")) {
            GateInstance g;
            g.id = e.at("id").get<std::string>();
            const std::string kn = e.at("kind").get<std::string>();
            g.kind = d.library->find(kn);
            if (g.kind < 0) throw ParseError("instance " + g.id + " uses unknown kind " + kn);
            g.x = e.at("x").get<int>();
            g.row = e.at("row").get<int>();
            g.fixed = e.at("fixed").get<bool>();
            d.instances.push_back(std::move(g));
        }
        for (const auto& e : j.at("nets")) {
            Net n;
            n.id = e.at("id").get<std::string>();
            n.extra_cap_ff = e.at("extra_cap_ff").get<double>();
            n.clock_ratio = e.at("clock_ratio").get<int>();
            d.nets.push_back(std::move(n));
        }
        d.rebuild_index();
        size_t ni = 0;
        for (const auto& e : j.at("nets")) {
            Net& n = d.nets[ni++];
            auto resolve = [&](const json& p) {
                const std::string id = p.at(0).get<std::string>();
                int idx = d.inst_index(id);
                if (idx < 0) throw ParseError("dangling reference: net " + n.id + " names missing instance " + id);
                return PinRef{idx, p.at(1).get<std::string>()};
            };
            n.driver = resolve(e.at("driver"));
            for (const auto& s : e.at("sinks")) n.sinks.push_back(resolve(s));
        }
        const auto& t = j.at("tags");
        d.tags.clock = t.value("clock", std::string());
        d.tags.reset = t.value("reset", std::string());
        d.tags.done = t.value("done", std::string());
        d.tags.key_bits = t.value("key_bits", std::vector<std::string>());
        d.activity_factor = j.at("activity").at("default_factor").get<double>();
        d.extra = j.value("extra", json::object());
    } catch (const json::exception& e) {
        throw ParseError(std::string("design schema: ") + e.what());
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    try {
        d.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return d;
}

PlacedDesign parse_design_text(const std::string& text) { return PlacedDesign::from_json(parse_json_text(text)); }

PlacedDesign parse_design(const std::string& path) { return parse_design_text(read_text_file(path)); }

bool same_design(const PlacedDesign& a, const PlacedDesign& b) { return a.serialize() == b.serialize(); }

namespace {

Netlist build_netlist(const PlacedDesign& d, bool attacker) {
    Netlist n;
    n.library = d.library;
    std::vector<int> map(d.instances.size(), -1);
    for (size_t i = 0; i < d.instances.size(); ++i) {
        const auto& g = d.instances[i];
        if (d.kind_of(g).is_filler) continue;
        map[i] = static_cast<int>(n.instances.size());
        Netlist::Inst ni;
        ni.kind = g.kind;
        if (attacker) {
            ni.id = "g" + std::to_string(n.instances.size());
        } else {
            ni.id = g.id;
            ni.source_id = g.id;
        }
        n.instances.push_back(std::move(ni));
    }
    n.nets.reserve(d.nets.size());
    for (size_t i = 0; i < d.nets.size(); ++i) {
        Net e = d.nets[i];
        if (attacker) e.id = "n" + std::to_string(i);
        e.driver.inst = map[static_cast<size_t>(e.driver.inst)];
        for (auto& s : e.sinks) s.inst = map[static_cast<size_t>(s.inst)];
        n.nets.push_back(std::move(e));
    }
    if (!attacker) n.tags = d.tags;
    return n;
}

}  // namespace

Netlist extract_netlist(const PlacedDesign& d, ExtractMode mode) { return build_netlist(d, mode == ExtractMode::attacker); }

Netlist design_netlist(const PlacedDesign& d) { return build_netlist(d, false); }

FillerReport find_fillers(const PlacedDesign& d) {
    FillerReport r;
    for (size_t i = 0; i < d.instances.size(); ++i) {
        const auto& g = d.instances[i];
        const auto& k = d.kind_of(g);
        if (!k.is_filler) continue;
        r.fillers.push_back({static_cast<int>(i), g.id, g.row, g.x, k.width_sites});
        r.freed_area_um2 += k.area;
    }
    return r;
}

PlacedDesign remove_fillers(const PlacedDesign& d, const std::vector<std::string>& selection) {
    std::set<std::string> sel(selection.begin(), selection.end());
    for (const auto& id : sel) {
        int i = d.inst_index(id);
        if (i < 0) throw ValidationError("remove_fillers: unknown instance " + id);
        if (!d.kind_of(i).is_filler) throw ValidationError("remove_fillers: " + id + " is not a filler");
    }
    PlacedDesign out = d;
    if (sel.empty()) return out;
    // Fillers have no pins, so no net refers to them; only indices shift.
    std::vector<int> map(d.instances.size(), -1);
    out.instances.clear();
    for (size_t i = 0; i < d.instances.size(); ++i) {
        if (sel.count(d.instances[i].id)) continue;
        map[i] = static_cast<int>(out.instances.size());
        out.instances.push_back(d.instances[i]);
    }
    for (auto& n : out.nets) {
        n.driver.inst = map[static_cast<size_t>(n.driver.inst)];
        for (auto& s : n.sinks) s.inst = map[static_cast<size_t>(s.inst)];
    }
    out.rebuild_index();
    return out;
}

namespace {

// Net index driven by each instance output (or -1).
std::vector<int> output_nets(const Netlist& n) {
    std::vector<int> out(n.instances.size(), -1);
    for (size_t i = 0; i < n.nets.size(); ++i)
        if (n.nets[i].driver.inst >= 0) out[static_cast<size_t>(n.nets[i].driver.inst)] = static_cast<int>(i);
    return out;
}

int cone_size(const Netlist& n, const std::vector<int>& regs, const std::vector<int>& out_net) {
    std::vector<char> seen(n.instances.size(), 0);
    std::queue<int> q;
    for (int r : regs) {
        int net = out_net[static_cast<size_t>(r)];
        if (net >= 0) q.push(net);
    }
    int count = 0;
    std::vector<char> net_seen(n.nets.size(), 0);
    while (!q.empty()) {
        int ni = q.front();
        q.pop();
        if (net_seen[static_cast<size_t>(ni)]) continue;
        net_seen[static_cast<size_t>(ni)] = 1;
        for (const auto& s : n.nets[static_cast<size_t>(ni)].sinks) {
            if (s.inst < 0 || seen[static_cast<size_t>(s.inst)]) continue;
            const auto& k = n.kind_of(s.inst);
            if (k.is_sequential || k.is_port || k.is_ring || k.output_pin.empty()) continue;
            seen[static_cast<size_t>(s.inst)] = 1;
            ++count;
            int o = out_net[static_cast<size_t>(s.inst)];
            if (o >= 0) q.push(o);
        }
    }
    return count;
}

struct RawGroup {
    std::vector<int> regs;
};

std::vector<RawGroup> register_groups(const Netlist& n) {
    // Registers whose D input comes from a MUX2 are grouped by the mux select net; others stand alone.
    std::vector<int> driver_of_pin_net;  // per instance: net on D pin
    std::vector<int> d_net(n.instances.size(), -1);
    std::vector<std::map<std::string, int>> in_nets(n.instances.size());
    for (size_t i = 0; i < n.nets.size(); ++i)
        for (const auto& s : n.nets[i].sinks)
            if (s.inst >= 0) in_nets[static_cast<size_t>(s.inst)][s.pin] = static_cast<int>(i);
    std::map<int, RawGroup> by_select;
    std::vector<RawGroup> singles;
    for (size_t i = 0; i < n.instances.size(); ++i) {
        const auto& k = n.kind_of(static_cast<int>(i));
        if (!k.is_sequential) continue;
        auto it = in_nets[i].find("D");
        int sel = -1;
        if (it != in_nets[i].end()) {
            const auto& dn = n.nets[static_cast<size_t>(it->second)];
            int drv = dn.driver.inst;
            if (drv >= 0 && n.kind_of(drv).function == "MUX2") {
                auto s = in_nets[static_cast<size_t>(drv)].find("S");
                if (s != in_nets[static_cast<size_t>(drv)].end()) sel = s->second;
            }
        }
        if (sel >= 0)
            by_select[sel].regs.push_back(static_cast<int>(i));
        else
            singles.push_back({{static_cast<int>(i)}});
    }
    std::vector<RawGroup> out;
    for (auto& [s, g] : by_select) out.push_back(std::move(g));
    for (auto& g : singles) out.push_back(std::move(g));
    return out;
}

long long aggregate_id(const std::vector<int>& regs) {
    return std::accumulate(regs.begin(), regs.end(), 0LL);
}

}  // namespace

std::vector<RegisterGroup> rank_register_groups(const Netlist& n, int n_key) {
    auto groups = register_groups(n);
    auto out_net = output_nets(n);
    // Only groups of exact width compete on cone size; otherwise the closest widths are ranked.
    std::vector<RegisterGroup> exact, near;
    for (auto& g : groups) {
        int w = static_cast<int>(g.regs.size());
        if (w == n_key) exact.push_back({g.regs, 0, 0});
    }
    if (!exact.empty()) {
        int best = 0;
        for (auto& g : exact) {
            g.cone_size = cone_size(n, g.registers, out_net);
            best = std::max(best, g.cone_size);
        }
        std::sort(exact.begin(), exact.end(), [](const RegisterGroup& a, const RegisterGroup& b) {
            if (a.cone_size != b.cone_size) return a.cone_size > b.cone_size;
            return aggregate_id(a.registers) < aggregate_id(b.registers);
        });
        for (auto& g : exact) g.confidence = best > 0 ? static_cast<double>(g.cone_size) / best / exact.size() : 0;
        if (exact.size() == 1) exact[0].confidence = 1.0;
        return exact;
    }
    std::sort(groups.begin(), groups.end(), [&](const RawGroup& a, const RawGroup& b) {
        int da = std::abs(static_cast<int>(a.regs.size()) - n_key), db = std::abs(static_cast<int>(b.regs.size()) - n_key);
        if (da != db) return da < db;
        return aggregate_id(a.regs) < aggregate_id(b.regs);
    });
    for (size_t i = 0; i < groups.size() && i < 5; ++i) {
        RegisterGroup g{groups[i].regs, cone_size(n, groups[i].regs, out_net), 0};
        double w = static_cast<double>(g.registers.size());
        g.confidence = std::min(w, static_cast<double>(n_key)) / std::max(w, static_cast<double>(n_key));
        near.push_back(std::move(g));
    }
    return near;
}

KeyRegisterResult find_key_registers(const Netlist& n, int n_key, KeyMode mode) {
    if (n_key <= 0) throw ValidationError("n_key must be positive");
    auto out_net = output_nets(n);
    int n_seq = 0;
    for (size_t i = 0; i < n.instances.size(); ++i)
        if (n.kind_of(static_cast<int>(i)).is_sequential) ++n_seq;
    KeyRegisterResult r;
    auto finish = [&]() {
        for (int i : r.registers) {
            r.ids.push_back(n.instances[static_cast<size_t>(i)].id);
            int o = out_net[static_cast<size_t>(i)];
            r.q_nets.push_back(o >= 0 ? n.nets[static_cast<size_t>(o)].id : std::string());
        }
        return r;
    };
    if (mode == KeyMode::oracle) {
        if (static_cast<int>(n.tags.key_bits.size()) != n_key)
            throw ValidationError("oracle mode needs " + std::to_string(n_key) + " key_bit tags, found " +
                                  std::to_string(n.tags.key_bits.size()));
        std::unordered_map<std::string, int> net_by_id;
        for (size_t i = 0; i < n.nets.size(); ++i) net_by_id[n.nets[i].id] = static_cast<int>(i);
        for (const auto& id : n.tags.key_bits) {
            auto it = net_by_id.find(id);
            if (it == net_by_id.end()) throw ValidationError("key_bit tag names unknown net " + id);
            int drv = n.nets[static_cast<size_t>(it->second)].driver.inst;
            if (drv < 0 || !n.kind_of(drv).is_sequential) throw ValidationError("key_bit net " + id + " is not a register output");
            r.registers.push_back(drv);
        }
        return finish();
    }
    if (n_seq < n_key)
        throw ValidationError("netlist has " + std::to_string(n_seq) + " sequential cells, fewer than n_key = " +
                              std::to_string(n_key) + "; no candidates");
    r.candidates = rank_register_groups(n, n_key);
    if (r.candidates.empty() || static_cast<int>(r.candidates.front().registers.size()) != n_key) {
        std::string msg = "no register group of width " + std::to_string(n_key) + "; candidates:";
        for (const auto& c : r.candidates)
            msg += " [width " + std::to_string(c.registers.size()) + ", cone " + std::to_string(c.cone_size) +
                   ", confidence " + std::to_string(c.confidence) + "]";
        throw ValidationError(msg);
    }
    r.registers = r.candidates.front().registers;
    std::sort(r.registers.begin(), r.registers.end());
    return finish();
}

}  // namespace sctflow
