#include "sctflow/eco.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace sctflow {

const std::array<const char*, kRouteLayers>& route_layer_names() {
    static const std::array<const char*, kRouteLayers> n = {"M2", "M3", "M4", "M5", "M6", "M7"};
    return n;
}

// ---------------------------------------------------------------- patch json

namespace {

json pin_j(const PatchPin& p) { return json::array({p.inst, p.pin}); }
PatchPin pin_from(const json& j) { return {j.at(0).get<std::string>(), j.at(1).get<std::string>()}; }

bool is_sct_id(const std::string& id) { return id.rfind("sct/", 0) == 0; }

}  // namespace

json EcoPatch::to_json() const {
    json j;
    j["format"] = "sctflow-patch";
    j["design"] = design_name;
    j["base_hash"] = base_hash;
    json ai = json::array();
    for (const auto& a : added_instances) ai.push_back({{"id", a.id}, {"kind", a.kind}, {"row", a.row}, {"x", a.x}});
    j["added_instances"] = ai;
    json an = json::array();
    for (const auto& n : added_nets) {
        json s = json::array();
        for (const auto& p : n.sinks) s.push_back(pin_j(p));
        an.push_back({{"id", n.id}, {"driver", pin_j(n.driver)}, {"sinks", s}, {"clock_ratio", n.clock_ratio}});
    }
    j["added_nets"] = an;
    json tp = json::array();
    for (const auto& t : taps) tp.push_back({{"net", t.net}, {"inst", t.inst}, {"pin", t.pin}, {"role", t.role}});
    j["taps"] = tp;
    json rf = json::array();
    for (const auto& r : removed_fillers)
        rf.push_back({{"id", r.inst.id}, {"kind", r.kind}, {"row", r.inst.row}, {"x", r.inst.x}, {"fixed", r.inst.fixed},
                      {"index", r.index}});
    j["removed_fillers"] = rf;
    json wl = json::object();
    for (int l = 0; l < kRouteLayers; ++l) wl[route_layer_names()[static_cast<size_t>(l)]] = added_wirelength_um[static_cast<size_t>(l)];
    j["added_wirelength_um"] = wl;
    j["spread_um"] = spread_um;
    j["ro_spread_um"] = ro_spread_um;
    j["key_centroid_um"] = {key_centroid_x_um, key_centroid_y_um};
    j["sct"] = sct;
    return j;
}

EcoPatch EcoPatch::from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "sctflow-patch") throw ParseError("not an sctflow patch file");
        EcoPatch p;
        p.design_name = j.at("design").get<std::string>();
        p.base_hash = j.at("base_hash").get<std::string>();
        for (const auto& a : j.at("added_instances"))
            p.added_instances.push_back({a.at("id").get<std::string>(), a.at("kind").get<std::string>(), a.at("row").get<int>(),
                                         a.at("x").get<int>()});
        for (const auto& n : j.at("added_nets")) {
            PatchNet pn;
            pn.id = n.at("id").get<std::string>();
            pn.driver = pin_from(n.at("driver"));
            for (const auto& s : n.at("sinks")) pn.sinks.push_back(pin_from(s));
            pn.clock_ratio = n.value("clock_ratio", 0);
            p.added_nets.push_back(pn);
        }
        for (const auto& t : j.at("taps"))
            p.taps.push_back({t.at("net").get<std::string>(), t.at("inst").get<std::string>(), t.at("pin").get<std::string>(),
                              t.value("role", "")});
        for (const auto& r : j.at("removed_fillers")) {
            RemovedFiller f;
            f.inst.id = r.at("id").get<std::string>();
            f.kind = r.at("kind").get<std::string>();
            f.inst.row = r.at("row").get<int>();
            f.inst.x = r.at("x").get<int>();
            f.inst.fixed = r.value("fixed", false);
            f.index = r.at("index").get<int>();
            p.removed_fillers.push_back(f);
        }
        const auto& wl = j.at("added_wirelength_um");
        for (int l = 0; l < kRouteLayers; ++l)
            p.added_wirelength_um[static_cast<size_t>(l)] = wl.value(route_layer_names()[static_cast<size_t>(l)], 0.0);
        p.spread_um = j.value("spread_um", 0.0);
        p.ro_spread_um = j.value("ro_spread_um", 0.0);
        if (j.contains("key_centroid_um")) {
            p.key_centroid_x_um = j["key_centroid_um"].at(0).get<double>();
            p.key_centroid_y_um = j["key_centroid_um"].at(1).get<double>();
        }
        p.sct = j.value("sct", json::object());
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("patch: ") + e.what());
    }
}

// ---------------------------------------------------------------- placement

EcoPlacement plan_placement(const PlacedDesign& d, const Netlist& sct, const std::vector<std::string>& key_registers,
                            const PlacementOptions& opt) {
    const auto& lib = *d.library;
    const double sw = lib.site_width_um, rh = lib.row_height_um;
    const int spr = d.rows.sites_per_row;
    EcoPlacement out;

    // Key-bank centroid.
    if (key_registers.empty()) throw ValidationError("plan_placement: no key registers given");
    for (const auto& id : key_registers) {
        int i = d.inst_index(id);
        if (i < 0) throw ValidationError("plan_placement: unknown key register " + id);
        out.key_cx += d.x_um(d.instances[static_cast<size_t>(i)]);
        out.key_cy += d.y_um(d.instances[static_cast<size_t>(i)]);
    }
    out.key_cx /= key_registers.size();
    out.key_cy /= key_registers.size();

    // Filler occupancy per site and free runs.
    std::vector<int> filler_at(static_cast<size_t>(d.rows.count) * spr, -1);
    long free_sites = 0;
    for (size_t i = 0; i < d.instances.size(); ++i) {
        const auto& g = d.instances[i];
        const auto& k = d.kind_of(g);
        if (!k.is_filler) continue;
        for (int s = 0; s < k.width_sites; ++s) filler_at[static_cast<size_t>(g.row) * spr + g.x + s] = static_cast<int>(i);
        free_sites += k.width_sites;
    }
    struct Gap {
        int row, x0, x1;
    };
    std::vector<Gap> gaps;
    for (int r = 0; r < d.rows.count; ++r) {
        int x = 0;
        while (x < spr) {
            if (filler_at[static_cast<size_t>(r) * spr + x] < 0) {
                ++x;
                continue;
            }
            int x0 = x;
            while (x < spr && filler_at[static_cast<size_t>(r) * spr + x] >= 0) ++x;
            gaps.push_back({r, x0, x});
        }
    }

    // TC and divider first, ring cells last.
    std::vector<int> order;
    for (int pass = 0; pass < 2; ++pass)
        for (size_t i = 0; i < sct.instances.size(); ++i) {
            const auto& k = sct.kind_of(static_cast<int>(i));
            if (k.is_port) continue;
            if (k.is_ring == (pass == 1)) order.push_back(static_cast<int>(i));
        }
    long need = 0;
    for (int i : order) need += sct.kind_of(i).width_sites;
    if (need > free_sites) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "insufficient free area: trojan needs %ld sites, %ld filler sites available (shortfall %ld sites)",
                      need, free_sites, need - free_sites);
        throw InfeasibleError("area", buf);
    }

    const double cx_sites = out.key_cx / sw;
    for (int i : order) {
        const auto& k = sct.kind_of(i);
        const int w = k.width_sites;
        double best = std::numeric_limits<double>::infinity();
        long best_key = 0;
        int bg = -1, bx = 0;
        for (size_t gi = 0; gi < gaps.size(); ++gi) {
            const Gap& g = gaps[gi];
            if (g.x1 - g.x0 < w) continue;
            double yc = (g.row + 0.5) * rh;
            double dy = yc - out.key_cy;
            auto dist_at = [&](int x) {
                double dx = (x + 0.5 * w) * sw - out.key_cx;
                return std::sqrt(dx * dx + dy * dy);
            };
            int x = static_cast<int>(std::lround(cx_sites - 0.5 * w));
            x = std::clamp(x, g.x0, g.x1 - w);
            double dist = dist_at(x);
            if (opt.min_distance_um > 0 && dist < opt.min_distance_um) {
                // slide to the gap end farthest from the centre, keep only if outside the exclusion radius
                int xa = g.x0, xb = g.x1 - w;
                double da = dist_at(xa), db = dist_at(xb);
                if (da >= opt.min_distance_um && (db < opt.min_distance_um || da <= db)) {
                    x = xa;
                    dist = da;
                } else if (db >= opt.min_distance_um) {
                    x = xb;
                    dist = db;
                } else {
                    continue;
                }
            }
            long key = static_cast<long>(g.row) * spr + x;
            if (dist < best - 1e-9 || (std::abs(dist - best) <= 1e-9 && key < best_key)) {
                best = dist;
                best_key = key;
                bg = static_cast<int>(gi);
                bx = x;
            }
        }
        if (bg < 0) {
            throw InfeasibleError("area", "insufficient contiguous free area for " + sct.instances[static_cast<size_t>(i)].id +
                                              " (" + std::to_string(w) + " sites)");
        }
        Gap g = gaps[static_cast<size_t>(bg)];
        out.cells.push_back({sct.instances[static_cast<size_t>(i)].id, k.name, g.row, bx});
        gaps[static_cast<size_t>(bg)] = {g.row, g.x0, bx};
        gaps.push_back({g.row, bx + w, g.x1});
    }

    // Fillers touched by SCT cells are removed; their leftover sites are refilled.
    std::vector<char> used(filler_at.size(), 0);
    std::set<int> touched;
    for (const auto& c : out.cells) {
        int w = lib.kind(c.kind).width_sites;
        for (int s = 0; s < w; ++s) {
            size_t site = static_cast<size_t>(c.row) * spr + c.x + s;
            used[site] = 1;
            touched.insert(filler_at[site]);
        }
    }
    int refill_n = 0;
    for (int fi : touched) {
        const auto& g = d.instances[static_cast<size_t>(fi)];
        const auto& k = d.kind_of(g);
        out.removed.push_back({g, k.name, fi});
        int x = g.x, end = g.x + k.width_sites;
        while (x < end) {
            if (used[static_cast<size_t>(g.row) * spr + x]) {
                ++x;
                continue;
            }
            int run = 0;
            while (x + run < end && !used[static_cast<size_t>(g.row) * spr + x + run]) ++run;
            for (int sz : {16, 8, 4, 2, 1})
                while (run >= sz) {
                    out.refill.push_back({"sct/fill_" + std::to_string(refill_n++), "FILL" + std::to_string(sz), g.row, x});
                    x += sz;
                    run -= sz;
                }
        }
    }

    auto rms = [&](bool ring_only) {
        double sx = 0, sy = 0;
        int n = 0;
        std::vector<std::pair<double, double>> pts;
        for (const auto& c : out.cells) {
            if (ring_only && !lib.kind(c.kind).is_ring) continue;
            double x = (c.x + 0.5 * lib.kind(c.kind).width_sites) * sw, y = (c.row + 0.5) * rh;
            pts.push_back({x, y});
            sx += x;
            sy += y;
            ++n;
        }
        if (n == 0) return 0.0;
        sx /= n;
        sy /= n;
        double s = 0;
        for (auto [x, y] : pts) s += (x - sx) * (x - sx) + (y - sy) * (y - sy);
        return std::sqrt(s / n);
    };
    out.spread_um = rms(false);
    out.ro_spread_um = rms(true);
    return out;
}

// ---------------------------------------------------------------- patch build / apply

namespace {

// Replace the instance list, remapping every pin reference by instance id.
void reset_instances(PlacedDesign& d, std::vector<GateInstance> insts) {
    std::vector<std::string> old_ids;
    old_ids.reserve(d.instances.size());
    for (const auto& g : d.instances) old_ids.push_back(g.id);
    std::unordered_map<std::string, int> idx;
    for (size_t i = 0; i < insts.size(); ++i) idx[insts[i].id] = static_cast<int>(i);
    auto map = [&](int old) {
        auto it = idx.find(old_ids[static_cast<size_t>(old)]);
        return it == idx.end() ? -1 : it->second;
    };
    for (auto& n : d.nets) {
        n.driver.inst = map(n.driver.inst);
        for (auto& s : n.sinks) s.inst = map(s.inst);
    }
    d.instances = std::move(insts);
    d.rebuild_index();
}

}  // namespace

EcoPatch make_patch(const PlacedDesign& d, SctConfig cfg, const InsertOptions& opt) {
    LibraryPtr lib = d.library;
    Netlist n = design_netlist(d);
    Netlist search = opt.key_mode == KeyMode::oracle ? extract_netlist(d, ExtractMode::oracle)
                                                     : extract_netlist(d, ExtractMode::attacker);
    KeyRegisterResult kr = find_key_registers(search, cfg.n_key, opt.key_mode);
    // extracted netlists keep the design's non-filler order, so indices map through design_netlist
    std::vector<std::string> key_ids;
    for (int r : kr.registers) key_ids.push_back(n.instances[static_cast<size_t>(r)].id);
    cfg.key_register_order = key_ids;
    if (!opt.trigger_net.empty()) cfg.trigger_net = opt.trigger_net;
    else if (!d.tags.done.empty()) cfg.trigger_net = d.tags.done;
    if (d.net_index(cfg.trigger_net) < 0) throw ValidationError("trigger net '" + cfg.trigger_net + "' not found");
    cfg.validate();

    // Victim nets to tap: clock and reset of the key bank, key Q nets.
    auto pin_net = [&](const std::string& inst, const std::string& pin) -> std::string {
        int ii = d.inst_index(inst);
        for (const auto& net : d.nets) {
            if (net.driver.inst == ii && net.driver.pin == pin) return net.id;
            for (const auto& s : net.sinks)
                if (s.inst == ii && s.pin == pin) return net.id;
        }
        throw ValidationError("no net on " + inst + "/" + pin);
    };
    const auto& k0 = d.kind_of(d.inst_index(key_ids[0]));
    std::map<std::string, std::string> port_net;
    port_net["clock"] = pin_net(key_ids[0], k0.clock_pin);
    port_net["reset"] = k0.async_pins.empty() ? "" : pin_net(key_ids[0], k0.async_pins[0]);
    port_net["trigger"] = cfg.trigger_net;
    for (int i = 0; i < cfg.n_key; ++i) {
        const auto& kk = d.kind_of(d.inst_index(key_ids[static_cast<size_t>(i)]));
        port_net[sct_key_port(i)] = pin_net(key_ids[static_cast<size_t>(i)], kk.output_pin);
    }

    Netlist frag = build_sct_netlist(cfg, lib);
    for (const auto& g : frag.instances)
        if (d.inst_index(g.id) >= 0) throw ValidationError("design already contains " + g.id);
    EcoPlacement pl = plan_placement(d, frag, key_ids, opt.placement);

    EcoPatch p;
    p.design_name = d.name;
    p.base_hash = sha256_hex(d.serialize());
    p.added_instances = pl.cells;
    p.added_instances.insert(p.added_instances.end(), pl.refill.begin(), pl.refill.end());
    p.removed_fillers = pl.removed;
    p.spread_um = pl.spread_um;
    p.ro_spread_um = pl.ro_spread_um;
    p.key_centroid_x_um = pl.key_cx;
    p.key_centroid_y_um = pl.key_cy;
    for (const auto& net : frag.nets) {
        const auto& drv = frag.instances[static_cast<size_t>(net.driver.inst)];
        if (frag.kind_of(net.driver.inst).is_port) {
            std::string port = drv.id.substr(std::string("sct/port/").size());
            const std::string& target = port_net.at(port);
            if (target.empty()) continue;
            for (const auto& s : net.sinks) p.taps.push_back({target, frag.instances[static_cast<size_t>(s.inst)].id, s.pin, port});
            continue;
        }
        PatchNet pn;
        pn.id = net.id;
        pn.driver = {drv.id, net.driver.pin};
        for (const auto& s : net.sinks) pn.sinks.push_back({frag.instances[static_cast<size_t>(s.inst)].id, s.pin});
        pn.clock_ratio = net.clock_ratio;
        p.added_nets.push_back(pn);
    }
    p.sct = cfg.to_json();
    // Route estimate on the applied design.
    PlacedDesign t = apply_eco(d, p);
    RouteReport rr = route_estimate(d, t, p, opt.route);
    p.added_wirelength_um = rr.added_um;
    return p;
}

PlacedDesign apply_eco(const PlacedDesign& d, const EcoPatch& p, double extra_tap_cap_ff) {
    if (p.design_name != d.name) throw ValidationError("patch is for design '" + p.design_name + "', not '" + d.name + "'");
    if (!p.base_hash.empty() && sha256_hex(d.serialize()) != p.base_hash)
        throw ValidationError("patch/design mismatch: design content differs from the patch base");
    const auto& lib = *d.library;
    std::set<std::string> removed;
    for (const auto& r : p.removed_fillers) {
        int i = d.inst_index(r.inst.id);
        if (i < 0) throw ValidationError("patch/design mismatch: missing filler " + r.inst.id);
        const auto& g = d.instances[static_cast<size_t>(i)];
        if (!d.kind_of(i).is_filler || g.x != r.inst.x || g.row != r.inst.row || d.kind_of(i).name != r.kind)
            throw ValidationError("patch/design mismatch: filler " + r.inst.id + " differs");
        removed.insert(r.inst.id);
    }
    PlacedDesign out = remove_fillers(d, std::vector<std::string>(removed.begin(), removed.end()));
    for (const auto& a : p.added_instances) {
        if (out.inst_index(a.id) >= 0) throw ValidationError("patch/design mismatch: " + a.id + " already present");
        GateInstance g;
        g.id = a.id;
        g.kind = lib.require(a.kind);
        g.row = a.row;
        g.x = a.x;
        out.instances.push_back(g);
    }
    out.rebuild_index();
    auto resolve = [&](const PatchPin& pp) {
        int i = out.inst_index(pp.inst);
        if (i < 0) throw ValidationError("patch references unknown instance " + pp.inst);
        return PinRef{i, pp.pin};
    };
    for (const auto& pn : p.added_nets) {
        if (out.net_index(pn.id) >= 0) throw ValidationError("patch/design mismatch: net " + pn.id + " already present");
        Net n;
        n.id = pn.id;
        n.driver = resolve(pn.driver);
        for (const auto& s : pn.sinks) n.sinks.push_back(resolve(s));
        n.clock_ratio = pn.clock_ratio;
        out.nets.push_back(n);
    }
    out.rebuild_index();
    std::set<std::string> tapped;
    for (const auto& t : p.taps) {
        int ni = out.net_index(t.net);
        if (ni < 0) throw ValidationError("patch references unknown net " + t.net);
        out.nets[static_cast<size_t>(ni)].sinks.push_back(resolve({t.inst, t.pin}));
        tapped.insert(t.net);
    }
    if (extra_tap_cap_ff != 0)
        for (const auto& id : tapped) out.nets[static_cast<size_t>(out.net_index(id))].extra_cap_ff += extra_tap_cap_ff;
    out.extra["sct"] = p.sct;
    out.extra["eco"] = {{"spread_um", p.spread_um}, {"ro_spread_um", p.ro_spread_um}};
    out.validate();
    return out;
}

PlacedDesign revert_eco(const PlacedDesign& t, const EcoPatch& p) {
    std::set<std::string> added;
    for (const auto& a : p.added_instances) added.insert(a.id);
    for (const auto& a : p.added_instances)
        if (t.inst_index(a.id) < 0) throw ValidationError("patch/design mismatch: " + a.id + " not in design");
    PlacedDesign out = t;
    // nets: drop added nets and tap sinks
    std::set<std::string> added_nets;
    for (const auto& n : p.added_nets) added_nets.insert(n.id);
    std::vector<Net> nets;
    for (auto n : out.nets) {
        if (added_nets.count(n.id)) continue;
        n.sinks.erase(std::remove_if(n.sinks.begin(), n.sinks.end(),
                                     [&](const PinRef& s) { return added.count(t.instances[static_cast<size_t>(s.inst)].id) > 0; }),
                      n.sinks.end());
        nets.push_back(std::move(n));
    }
    out.nets = std::move(nets);
    std::vector<GateInstance> insts;
    for (const auto& g : t.instances)
        if (!added.count(g.id)) insts.push_back(g);
    std::vector<RemovedFiller> rf = p.removed_fillers;
    std::sort(rf.begin(), rf.end(), [](const RemovedFiller& a, const RemovedFiller& b) { return a.index < b.index; });
    for (const auto& r : rf) {
        GateInstance g = r.inst;
        g.kind = t.library->require(r.kind);
        if (r.index < 0 || r.index > static_cast<int>(insts.size())) throw ValidationError("patch filler index out of range");
        insts.insert(insts.begin() + r.index, g);
    }
    reset_instances(out, std::move(insts));
    // tapped nets: remove extra capacitance added at apply time is not recorded; stress taps are not reverted
    out.extra.erase("sct");
    out.extra.erase("eco");
    return out;
}

// ---------------------------------------------------------------- routing

namespace {

struct Pt {
    double x, y;
};

Pt pin_pos(const PlacedDesign& d, int inst) {
    const auto& g = d.instances[static_cast<size_t>(inst)];
    if (d.kind_of(g).is_port) return {-1, -1};
    return {d.x_um(g), d.y_um(g)};
}

double hpwl(const std::vector<Pt>& pts) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    int n = 0;
    for (const auto& p : pts) {
        if (p.x < 0) continue;
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
        ++n;
    }
    return n < 2 ? 0.0 : (x1 - x0) + (y1 - y0);
}

}  // namespace

std::vector<double> patch_net_lengths(const PlacedDesign& t, const EcoPatch& p) {
    std::vector<double> len;
    for (const auto& pn : p.added_nets) {
        std::vector<Pt> pts{pin_pos(t, t.inst_index(pn.driver.inst))};
        for (const auto& s : pn.sinks) pts.push_back(pin_pos(t, t.inst_index(s.inst)));
        len.push_back(hpwl(pts));
    }
    std::set<std::string> added;
    for (const auto& a : p.added_instances) added.insert(a.id);
    for (const auto& tap : p.taps) {
        Pt me = pin_pos(t, t.inst_index(tap.inst));
        const Net& n = t.nets[static_cast<size_t>(t.net_index(tap.net))];
        double best = std::numeric_limits<double>::infinity();
        auto consider = [&](int inst) {
            if (added.count(t.instances[static_cast<size_t>(inst)].id)) return;
            Pt q = pin_pos(t, inst);
            if (q.x < 0) return;
            best = std::min(best, std::abs(q.x - me.x) + std::abs(q.y - me.y));
        };
        consider(n.driver.inst);
        for (const auto& s : n.sinks) consider(s.inst);
        len.push_back(std::isfinite(best) ? best : 0.0);
    }
    return len;
}

double RouteReport::upper_fraction() const {
    double tot = 0, up = 0;
    for (int l = 0; l < kRouteLayers; ++l) {
        tot += added_um[static_cast<size_t>(l)];
        if (l >= 3) up += added_um[static_cast<size_t>(l)];
    }
    return tot > 0 ? up / tot : 0.0;
}

double RouteReport::lower_fraction() const {
    double tot = 0, lo = 0;
    for (int l = 0; l < kRouteLayers; ++l) {
        tot += added_um[static_cast<size_t>(l)];
        if (l < 3) lo += added_um[static_cast<size_t>(l)];
    }
    return tot > 0 ? lo / tot : 0.0;
}

json RouteReport::to_json() const {
    json layers = json::array();
    for (int l = 0; l < kRouteLayers; ++l)
        layers.push_back({{"layer", route_layer_names()[static_cast<size_t>(l)]},
                          {"capacity_um", capacity_um[static_cast<size_t>(l)]},
                          {"preexisting_um", preexisting_um[static_cast<size_t>(l)]},
                          {"added_um", added_um[static_cast<size_t>(l)]}});
    return {{"layers", layers},
            {"overflow_um", overflow_um},
            {"added_fraction_m2_m4", lower_fraction()},
            {"added_fraction_m5_m7", upper_fraction()}};
}

RouteReport route_estimate(const PlacedDesign& original, const PlacedDesign& t, const EcoPatch& p, const RouteOptions& opt) {
    RouteReport r;
    const double area = original.core_width_um() * original.core_height_um();
    const std::array<double, kRouteLayers> pitch = {0.2, 0.2, 0.2, 0.2, 0.4, 0.4};
    for (int l = 0; l < kRouteLayers; ++l) r.capacity_um[static_cast<size_t>(l)] = area / pitch[static_cast<size_t>(l)];
    // Pre-existing usage follows the cell density of the untouched layout.
    const double dens = original.density();
    for (int l = 0; l < kRouteLayers; ++l)
        r.preexisting_um[static_cast<size_t>(l)] =
            r.capacity_um[static_cast<size_t>(l)] * std::min(1.0, dens * opt.occupancy[static_cast<size_t>(l)]);
    for (int l = 0; l < 3; ++l) r.preexisting_um[static_cast<size_t>(l)] *= opt.lower_congestion_scale;
    std::vector<double> lens = patch_net_lengths(t, p);
    // longest first, each to the least utilised eligible layer
    std::sort(lens.begin(), lens.end(), std::greater<double>());
    for (double L : lens) {
        if (L <= 0) continue;
        int hi = L < opt.short_net_um ? 3 : kRouteLayers;
        int best = 0;
        double best_u = std::numeric_limits<double>::infinity();
        for (int l = 0; l < hi; ++l) {
            double u = (r.preexisting_um[static_cast<size_t>(l)] + r.added_um[static_cast<size_t>(l)] + L) /
                       r.capacity_um[static_cast<size_t>(l)];
            if (l == kRouteLayers - 1) u += opt.m7_bias;
            if (u < best_u) {
                best_u = u;
                best = l;
            }
        }
        r.added_um[static_cast<size_t>(best)] += L;
    }
    for (int l = 0; l < kRouteLayers; ++l) {
        double over = r.preexisting_um[static_cast<size_t>(l)] + r.added_um[static_cast<size_t>(l)] - r.capacity_um[static_cast<size_t>(l)];
        if (over > 0) r.overflow_um += over;
    }
    return r;
}

// ---------------------------------------------------------------- signoff

json SignoffReport::to_json() const {
    json v = json::array();
    for (const auto& e : violations) v.push_back({{"endpoint", e.name}, {"slack_ps", e.slack}});
    return {{"ok", ok},
            {"victim_min_slack_ps", victim_min_slack},
            {"sct_min_slack_ps", sct_min_slack},
            {"victim_critical_delay_ps", victim_critical_delay},
            {"violations", v},
            {"worst_endpoint", worst_endpoint},
            {"remedy", remedy}};
}

SignoffReport signoff(const PlacedDesign& t, double margin_ps, double global_delay_mult) {
    Netlist n = design_netlist(t);
    int ratio = 1;
    if (t.extra.contains("sct")) ratio = t.extra["sct"].value("divider_ratio", 1);
    TimingOptions o;
    o.clock_period_ps = t.clock_period_ps;
    o.margin_ps = margin_ps;
    o.global_delay_mult = global_delay_mult;
    o.endpoint_filter = [&](int i) { return !is_sct_id(n.instances[static_cast<size_t>(i)].id); };
    SignoffReport r;
    r.victim = analyze_timing(n, o);
    o.endpoint_filter = [&](int i) { return is_sct_id(n.instances[static_cast<size_t>(i)].id); };
    o.default_endpoint_ratio = ratio;
    r.sct = analyze_timing(n, o);
    r.victim_min_slack = r.victim.min_slack();
    r.sct_min_slack = r.sct.endpoints.empty() ? 0.0 : r.sct.min_slack();
    r.victim_critical_delay = r.victim.critical_delay;
    for (const auto* rep : {&r.victim, &r.sct})
        for (const auto& e : rep->endpoints)
            if (e.slack < 0) r.violations.push_back(e);
    std::sort(r.violations.begin(), r.violations.end(),
              [](const EndpointTiming& a, const EndpointTiming& b) { return a.slack < b.slack; });
    r.ok = r.violations.empty();
    if (!r.ok) {
        const auto& w = r.violations.front();
        r.worst_endpoint = w.name;
        char buf[400];
        if (is_sct_id(w.name))
            std::snprintf(buf, sizeof buf,
                          "trojan path %s misses the divided clock by %.1f ps: increase the clock divider (x%d -> x%d)",
                          w.name.c_str(), -w.slack, ratio, ratio * 2);
        else
            std::snprintf(buf, sizeof buf,
                          "victim endpoint %s violates by %.1f ps: pick a different value and leak less bits per clock "
                          "cycle (tap fewer or lighter key nets), or increase the clock divider",
                          w.name.c_str(), -w.slack);
        r.remedy = buf;
    }
    return r;
}

// ---------------------------------------------------------------- reports

std::string density_map_csv(const PlacedDesign& d, double tile_um) {
    const double W = d.core_width_um(), H = d.core_height_um();
    const int nx = std::max(1, static_cast<int>(std::ceil(W / tile_um)));
    const int ny = std::max(1, static_cast<int>(std::ceil(H / tile_um)));
    std::vector<double> area(static_cast<size_t>(nx * ny), 0.0), sct(area.size(), 0.0);
    const auto& lib = *d.library;
    for (const auto& g : d.instances) {
        const auto& k = d.kind_of(g);
        if (k.is_filler || k.is_port) continue;
        // distribute the cell over the tiles it spans horizontally
        double x0 = g.x * lib.site_width_um, x1 = x0 + k.width_sites * lib.site_width_um;
        int ty = std::min(ny - 1, static_cast<int>(d.y_um(g) / tile_um));
        for (int tx = static_cast<int>(x0 / tile_um); tx <= std::min(nx - 1, static_cast<int>(x1 / tile_um)); ++tx) {
            double ov = std::min(x1, (tx + 1) * tile_um) - std::max(x0, tx * tile_um);
            if (ov <= 0) continue;
            double a = ov * lib.row_height_um;
            area[static_cast<size_t>(ty * nx + tx)] += a;
            if (is_sct_id(g.id)) sct[static_cast<size_t>(ty * nx + tx)] += a;
        }
    }
    std::string s = "x_um,y_um,density,sct_density\n";
    char buf[128];
    for (int ty = 0; ty < ny; ++ty)
        for (int tx = 0; tx < nx; ++tx) {
            double tw = std::min(tile_um, W - tx * tile_um), th = std::min(tile_um, H - ty * tile_um);
            double ta = tw * th;
            std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f\n", (tx + 0.5) * tile_um, (ty + 0.5) * tile_um,
                          round6(area[static_cast<size_t>(ty * nx + tx)] / ta), round6(sct[static_cast<size_t>(ty * nx + tx)] / ta));
            s += buf;
        }
    return s;
}

RingGeometry ring_geometry(const PlacedDesign& t) {
    RingGeometry g;
    std::vector<char> ring(t.instances.size(), 0);
    for (size_t i = 0; i < t.instances.size(); ++i) {
        const auto& gi = t.instances[i];
        if (!is_sct_id(gi.id) || !t.kind_of(gi).is_ring) continue;
        ring[i] = 1;
        g.cells.push_back({t.x_um(gi), t.y_um(gi)});
    }
    for (const auto& n : t.nets) {
        if (n.driver.inst < 0 || !ring[static_cast<size_t>(n.driver.inst)]) continue;
        std::vector<Pt> pts{pin_pos(t, n.driver.inst)};
        for (const auto& s : n.sinks) pts.push_back(pin_pos(t, s.inst));
        g.ring_hpwl_um += hpwl(pts);
        ++g.nets;
    }
    return g;
}

}  // namespace sctflow
