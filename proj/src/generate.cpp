#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "sctflow/design.hpp"
#include "sctflow/power.hpp"
#include "sctflow/sta.hpp"

namespace sctflow {

namespace {

std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct Builder {
    PlacedDesign d;
    const CellLibrary* lib;
    std::vector<std::string> base;  // flavor-free cell name, empty for fixed kinds

    int add(const std::string& id, const std::string& base_name, Flavor f) {
        GateInstance g;
        g.id = id;
        g.kind = lib->require(cell_name(base_name, f));
        d.instances.push_back(g);
        base.push_back(base_name);
        return static_cast<int>(d.instances.size()) - 1;
    }
    int add_fixed(const std::string& id, const std::string& kind) {
        GateInstance g;
        g.id = id;
        g.kind = lib->require(kind);
        d.instances.push_back(g);
        base.push_back("");
        return static_cast<int>(d.instances.size()) - 1;
    }
    int net(const std::string& id, int driver) {
        Net n;
        n.id = id;
        n.driver = {driver, lib->kind(d.instances[static_cast<size_t>(driver)].kind).output_pin};
        d.nets.push_back(std::move(n));
        return static_cast<int>(d.nets.size()) - 1;
    }
    void connect(int net_i, int inst, const std::string& pin) { d.nets[static_cast<size_t>(net_i)].sinks.push_back({inst, pin}); }
    void set_flavor(int inst, Flavor f) {
        d.instances[static_cast<size_t>(inst)].kind = lib->require(cell_name(base[static_cast<size_t>(inst)], f));
    }
    int sites(int inst) const { return lib->kind(d.instances[static_cast<size_t>(inst)].kind).width_sites; }
};

struct GateSpec {
    const char* base;
    int inputs;
    double weight;
};

const std::vector<GateSpec>& gate_mix() {
    static const std::vector<GateSpec> m = {{"INV_X1", 1, 0.10},   {"BUF_X1", 1, 0.05}, {"NAND2_X1", 2, 0.25},
                                            {"NOR2_X1", 2, 0.15},  {"AND2_X1", 2, 0.10}, {"OR2_X1", 2, 0.10},
                                            {"XOR2_X1", 2, 0.15},  {"MUX2_X1", 3, 0.10}};
    return m;
}

const char* input_pin(int k, int inputs) {
    static const char* two[] = {"A", "B", "S"};
    return inputs == 1 ? "A" : two[k];
}

constexpr double kMargin = 20.0;

// Logic depth and fanout cap for a fabric of `gates` cells fed by `sources` nets,
// deepest structure whose estimated path fits `budget_ps`.
struct FabricPlan {
    int depth = 2;
    int cap = 3;
};

FabricPlan plan_fabric(double gates, double sources, double budget_ps, double wire_cap, double mult) {
    FabricPlan best;
    bool found = false;
    for (int L = 2; L <= 40; ++L) {
        int cap = std::max(3, static_cast<int>(std::ceil(2.0 * std::pow(gates / (0.8 * sources), 1.0 / L))));
        double load = cap * (1.8 + wire_cap);
        double est = (55 + 4 * load) * mult + L * (30 + 5 * load) * mult;
        if (est <= budget_ps) {
            best = {L, cap};
            found = true;
        }
    }
    if (!found) {
        int cap = std::max(3, static_cast<int>(std::ceil(2.0 * std::pow(gates / (0.8 * sources), 0.5))));
        best = {2, cap};
    }
    return best;
}

struct Attempt {
    PlacedDesign design;
    double crit = 0;
};

}  // namespace

PlacedDesign generate_target(const TargetProfile& prof, std::uint64_t seed, LibraryPtr libp) {
    prof.validate();
    if (!libp) libp = default_library();
    const CellLibrary& lib = *libp;
    const double period = 1e6 / prof.frequency_mhz;
    const double crit_target = 0.975 * period - kMargin;

    // Vt pair bracketing the target leakage density (nW/um^2).
    const double leak_density = prof.leakage_uw * 1e3 / (prof.density * prof.row_area_um2);
    Flavor slow, fast;
    if (leak_density >= flavor_leak_density(Flavor::HVT) && leak_density <= flavor_leak_density(Flavor::SVT)) {
        slow = Flavor::HVT;
        fast = Flavor::SVT;
    } else if (leak_density > flavor_leak_density(Flavor::SVT) && leak_density <= flavor_leak_density(Flavor::LVT)) {
        slow = Flavor::SVT;
        fast = Flavor::LVT;
    } else {
        throw InfeasibleError("leakage", "profile " + prof.name + ": leakage density " + std::to_string(leak_density) +
                                             " nW/um^2 is outside the library range");
    }

    // Flip-flop count reproducing the clock-tree power.
    const auto& ct = lib.clock_tree;
    const double ck_cap = lib.kind(cell_name("DFFR_X2", Flavor::SVT)).pin_caps.at("CK");
    const double v2 = lib.vdd * lib.vdd;
    auto clk_power = [&](int n) {
        int nb = (n + ct.buffer_fanout - 1) / ct.buffer_fanout;
        double e = v2 * (n * (ck_cap + ct.wire_cap_per_sink_ff) + nb * ct.buffer_input_cap_ff) + nb * ct.buffer_energy_fj;
        return prof.frequency_mhz * e * 1e-3;
    };
    const int min_ff = prof.n_key + prof.n_state + 2;
    int n_ff = min_ff;
    for (int n = min_ff; n < 200000; ++n) {
        if (std::abs(clk_power(n) - prof.clock_tree_uw) < std::abs(clk_power(n_ff) - prof.clock_tree_uw)) n_ff = n;
        if (clk_power(n) > prof.clock_tree_uw) break;
    }
    if (std::abs(clk_power(n_ff) - prof.clock_tree_uw) > 0.02 * prof.clock_tree_uw)
        throw InfeasibleError("clock_tree_power", "profile " + prof.name + ": clock-tree power " +
                                                      std::to_string(prof.clock_tree_uw) + " uW needs fewer than " +
                                                      std::to_string(min_ff) + " flip-flops");
    const int n_misc = n_ff - prof.n_key - prof.n_state;

    // Row geometry.
    const int n_rows = std::max(1, static_cast<int>(std::lround(std::sqrt(prof.row_area_um2) / lib.row_height_um)));
    const int spr = std::max(1, static_cast<int>(std::lround(prof.row_area_um2 / (n_rows * lib.row_height_um * lib.site_width_um))));
    const long total_sites = static_cast<long>(n_rows) * spr;
    const long target_sites = std::lround(prof.density * total_sites);
    const bool full = prof.density >= 0.999;

    const int dff_sites = lib.kind(cell_name("DFFR_X2", fast)).width_sites;
    const int mux_sites = lib.kind(cell_name("MUX2_X1", fast)).width_sites;
    const double dly_delay = lib.kind(cell_name("DLY4_X1", fast)).intrinsic_ps +
                             lib.kind(cell_name("DLY4_X1", fast)).slope_ps_per_ff * (1.2 + lib.wire_cap_per_fanout_ff);
    const long spine_est = static_cast<long>(crit_target / dly_delay) * 4 + 12;
    const long fixed_sites = static_cast<long>(n_ff) * dff_sites + static_cast<long>(prof.n_key) * mux_sites + spine_est;
    long fabric_sites = static_cast<long>(target_sites * (full ? 0.97 : 1.0)) - fixed_sites;
    if (fabric_sites < 3L * (prof.n_state + n_misc))
        throw InfeasibleError("density", "profile " + prof.name + ": row area too small for the register set");

    const int n_din = prof.n_state;
    const double n_sources = prof.n_key + prof.n_state + n_misc + n_din;

    for (int attempt = 0; attempt < 8; ++attempt) {
        const FabricPlan plan = plan_fabric(fabric_sites / 3.8, n_sources, (0.9 - 0.05 * attempt) * crit_target,
                                            lib.wire_cap_per_fanout_ff, flavor_delay_mult(slow));
        const int depth = plan.depth;
        const int kFanoutCap = plan.cap;
        std::mt19937_64 rng(mix_seed(seed, name_hash(prof.name), static_cast<std::uint64_t>(attempt)));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        Builder b;
        b.lib = &lib;
        b.d.name = prof.name;
        b.d.library = libp;
        b.d.clock_period_ps = round6(period);
        b.d.rows = {n_rows, spr};

        int p_clk = b.add_fixed("p_clk", "PI");
        int p_rst = b.add_fixed("p_rst", "PI");
        int p_load = b.add_fixed("p_load_key", "PI");
        int clk = b.net("clk", p_clk);
        b.d.nets[static_cast<size_t>(clk)].clock_ratio = 1;
        int rst = b.net("rst_n", p_rst);
        int load = b.net("n_load_key", p_load);
        std::vector<int> din;
        for (int j = 0; j < n_din; ++j) din.push_back(b.net("n_din_" + std::to_string(j), b.add_fixed("p_din_" + std::to_string(j), "PI")));

        auto add_reg = [&](const std::string& id) {
            int r = b.add(id, "DFFR_X2", fast);
            b.connect(clk, r, "CK");
            b.connect(rst, r, "RN");
            return r;
        };
        std::vector<int> key_regs, key_q, key_mux;
        for (int i = 0; i < prof.n_key; ++i) {
            std::string s = std::to_string(i);
            int r = add_reg("key_reg_" + s);
            int q = b.net("n_key_" + s, r);
            int pk = b.add_fixed("p_key_" + s, "PI");
            int kin = b.net("n_key_in_" + s, pk);
            int m = b.add("key_mux_" + s, "MUX2_X1", fast);
            b.connect(q, m, "A");
            b.connect(kin, m, "B");
            b.connect(load, m, "S");
            int mo = b.net("n_key_mux_" + s, m);
            b.connect(mo, r, "D");
            key_regs.push_back(r);
            key_q.push_back(q);
            key_mux.push_back(m);
        }
        std::vector<int> st_regs, st_q, mx_regs, mx_q;
        for (int i = 0; i < prof.n_state; ++i) {
            int r = add_reg("st_reg_" + std::to_string(i));
            st_regs.push_back(r);
            st_q.push_back(b.net("n_st_" + std::to_string(i), r));
        }
        for (int i = 0; i < n_misc; ++i) {
            int r = add_reg("mx_reg_" + std::to_string(i));
            mx_regs.push_back(r);
            mx_q.push_back(b.net(i == 0 ? "done" : "n_mx_" + std::to_string(i), r));
        }
        int p_done = b.add_fixed("p_done", "PO");
        b.connect(mx_q[0], p_done, "A");

        // Random layered fabric: key-schedule part fed by key registers, datapath fed by state and schedule.
        double wsum = 0;
        for (const auto& g : gate_mix()) wsum += g.weight;
        auto pick_spec = [&](bool allow_mux) -> const GateSpec& {
            for (;;) {
                double u = U(rng) * wsum;
                for (const auto& g : gate_mix()) {
                    u -= g.weight;
                    if (u <= 0) {
                        if (!allow_mux && g.inputs == 3) break;
                        return g;
                    }
                }
            }
        };
        auto fanout = [&](int net) { return static_cast<int>(b.d.nets[static_cast<size_t>(net)].sinks.size()); };
        std::vector<int> fabric;
        // Layer sizes grow geometrically from what the sources can feed within the fanout cap.
        auto build_part = [&](const std::string& prefix, const std::vector<int>& sources, long sites_budget, int layers) {
            const double gate_sites = 3.8, inputs_per_gate = 2.0;
            double s0 = std::min(static_cast<double>(sites_budget) / layers,
                                 sources.size() * kFanoutCap / inputs_per_gate * gate_sites);
            double glo = 0.1, ghi = 8.0;
            for (int it = 0; it < 80; ++it) {
                double g = 0.5 * (glo + ghi), tot = 0, s = s0;
                for (int l = 0; l < layers; ++l, s *= g) tot += s;
                (tot < sites_budget ? glo : ghi) = g;
            }
            std::vector<int> avail = sources;  // nets below the fanout cap
            std::vector<int> prev = sources;
            std::vector<int> all_nets;
            long used = 0;
            int count = 0;
            double layer_target = s0;
            for (int l = 0; l < layers && used < sites_budget; ++l, layer_target *= ghi) {
                std::deque<int> unconsumed;
                for (int n : prev)
                    if (fanout(n) == 0) unconsumed.push_back(n);
                if (l > 0) std::shuffle(unconsumed.begin(), unconsumed.end(), rng);
                std::vector<int> cur;
                long layer_budget = (l == layers - 1) ? sites_budget - used : std::lround(layer_target);
                long lu = 0;
                while (lu < layer_budget) {
                    const GateSpec& g = pick_spec(l < layers - 1);
                    int inst = b.add(prefix + std::to_string(count++), g.base, fast);
                    std::vector<int> picked;
                    for (int k = 0; k < g.inputs; ++k) {
                        int net = -1;
                        if (!unconsumed.empty()) {
                            net = unconsumed.front();
                            unconsumed.pop_front();
                        } else {
                            for (int t = 0; t < 6 && net < 0 && !prev.empty(); ++t) {
                                int c = prev[static_cast<size_t>(rng() % prev.size())];
                                if (fanout(c) < kFanoutCap) net = c;
                            }
                            while (net < 0 && !avail.empty()) {
                                size_t j = static_cast<size_t>(rng() % avail.size());
                                int c = avail[j];
                                if (fanout(c) < kFanoutCap) {
                                    net = c;
                                } else {
                                    avail[j] = avail.back();
                                    avail.pop_back();
                                }
                            }
                            if (net < 0) net = all_nets.empty() ? sources[static_cast<size_t>(rng() % sources.size())]
                                                                : all_nets[static_cast<size_t>(rng() % all_nets.size())];
                        }
                        b.connect(net, inst, input_pin(k, g.inputs));
                    }
                    int on = b.net("n_" + b.d.instances[static_cast<size_t>(inst)].id, inst);
                    cur.push_back(on);
                    all_nets.push_back(on);
                    fabric.push_back(inst);
                    int s = b.sites(inst);
                    lu += s;
                    used += s;
                }
                avail.insert(avail.end(), cur.begin(), cur.end());
                prev = cur;
            }
            return all_nets;
        };
        // Sources ordered so the key bank is consumed first by the leading layer.
        std::vector<int> src = key_q;
        for (size_t i = 1; i < mx_q.size(); ++i) src.push_back(mx_q[i]);
        src.insert(src.end(), st_q.begin(), st_q.end());
        src.insert(src.end(), din.begin(), din.end());
        auto dp_nets = build_part("g_", src, fabric_sites, depth);

        // Register inputs from datapath outputs, unconsumed nets first.
        std::vector<int> outs;
        for (auto it = dp_nets.rbegin(); it != dp_nets.rend(); ++it)
            if (fanout(*it) == 0) outs.push_back(*it);
        for (auto it = dp_nets.rbegin(); it != dp_nets.rend(); ++it)
            if (fanout(*it) > 0 && fanout(*it) < kFanoutCap) outs.push_back(*it);
        if (outs.empty()) outs = dp_nets;
        size_t oi = 0;
        auto next_out = [&]() { return outs[(oi++) % outs.size()]; };
        for (int r : st_regs) b.connect(next_out(), r, "D");
        for (size_t i = 0; i < mx_regs.size(); ++i)
            if (i != 1) b.connect(next_out(), mx_regs[i], "D");

        // Critical spine from key register 0 to misc register 1, tuned by STA.
        std::vector<int> spine;
        int spine_tail_net = key_q[0];
        auto spine_arrival = [&](int extra_net) -> double {
            // temporarily terminate the spine into mx_reg_1
            Net& tail = b.d.nets[static_cast<size_t>(extra_net)];
            tail.sinks.push_back({mx_regs[1], "D"});
            PlacedDesign tmp = b.d;
            tail.sinks.pop_back();
            tmp.rebuild_index();
            Netlist nl = design_netlist(tmp);
            TimingOptions o;
            o.clock_period_ps = period;
            o.margin_ps = kMargin;
            const std::string end_id = "mx_reg_1";
            o.endpoint_filter = [&](int i) { return nl.instances[static_cast<size_t>(i)].id == end_id; };
            return analyze_timing(nl, o).critical_delay;
        };
        auto append_spine = [&](const std::string& base_name, Flavor f) {
            int inst = b.add("sp_" + std::to_string(spine.size()), base_name, f);
            b.connect(spine_tail_net, inst, "A");
            spine_tail_net = b.net("n_sp_" + std::to_string(spine.size()), inst);
            spine.push_back(inst);
        };
        auto remove_last_spine = [&]() {
            int inst = spine.back();
            spine.pop_back();
            b.d.nets.pop_back();
            b.d.instances.pop_back();
            b.base.pop_back();
            spine_tail_net = spine.empty() ? key_q[0] : static_cast<int>(b.d.nets.size()) - 1;
            auto& sinks = b.d.nets[static_cast<size_t>(spine_tail_net)].sinks;
            sinks.erase(std::remove_if(sinks.begin(), sinks.end(), [&](const PinRef& p) { return p.inst == inst; }), sinks.end());
        };
        double arr = spine_arrival(spine_tail_net);
        {
            long bulk = static_cast<long>((crit_target - arr) / dly_delay) - 2;
            for (long k = 0; k < bulk; ++k) append_spine("DLY4_X1", fast);
            if (bulk > 0) arr = spine_arrival(spine_tail_net);
        }
        for (const char* cell : {"DLY4_X1", "BUF_X1"}) {
            for (;;) {
                append_spine(cell, fast);
                double a = spine_arrival(spine_tail_net);
                if (a > crit_target) {
                    remove_last_spine();
                    break;
                }
                arr = a;
            }
        }
        // Fine steps: swap spine buffers to the slow flavor.
        for (auto it = spine.rbegin(); it != spine.rend(); ++it) {
            if (b.base[static_cast<size_t>(*it)] != "BUF_X1") continue;
            b.set_flavor(*it, slow);
            double a = spine_arrival(spine_tail_net);
            if (a > crit_target + 0.005 * period) {
                b.set_flavor(*it, fast);
                break;
            }
            arr = a;
        }
        b.connect(spine_tail_net, mx_regs[1], "D");

        // Leakage fit: assign the fast flavor to a random subset of the free cells.
        std::vector<int> vars;
        double fixed_leak = 0, var_area = 0;
        std::vector<char> is_spine(b.d.instances.size(), 0);
        for (int s : spine) is_spine[static_cast<size_t>(s)] = 1;
        for (size_t i = 0; i < b.d.instances.size(); ++i) {
            const auto& k = lib.kind(b.d.instances[i].kind);
            if (k.is_port) continue;
            if (is_spine[i] || static_cast<int>(i) == key_regs[0] || b.base[i].empty()) {
                fixed_leak += k.leakage;
            } else {
                vars.push_back(static_cast<int>(i));
                var_area += k.area;
            }
        }
        const double rs = flavor_leak_density(slow) * 1e-3, rf = flavor_leak_density(fast) * 1e-3;
        double fast_area = (prof.leakage_uw - fixed_leak - var_area * rs) / (rf - rs);
        fast_area = std::clamp(fast_area, 0.0, var_area);
        std::shuffle(vars.begin(), vars.end(), rng);
        double acc = 0;
        for (int v : vars) {
            double a = lib.kind(b.d.instances[static_cast<size_t>(v)].kind).area;
            if (acc + 0.5 * a <= fast_area) {
                b.set_flavor(v, fast);
                acc += a;
            } else {
                b.set_flavor(v, slow);
            }
        }

        // Full timing check: the spine must stay critical.
        b.d.rebuild_index();
        {
            Netlist nl = design_netlist(b.d);
            TimingOptions o;
            o.clock_period_ps = period;
            o.margin_ps = kMargin;
            double crit = analyze_timing(nl, o).critical_delay;
            if (crit > crit_target + 0.006 * period) continue;  // fabric too deep, retry shallower
        }

        // Placement: breadth-first order from the key bank, laid centre-out over serpentine rows.
        const size_t ni = b.d.instances.size();
        std::vector<std::vector<int>> adj(ni);
        for (const auto& n : b.d.nets) {
            if (n.clock_ratio > 0 || n.id == "rst_n" || n.id == "n_load_key") continue;
            std::vector<int> pins{n.driver.inst};
            for (const auto& s : n.sinks) pins.push_back(s.inst);
            for (size_t i = 1; i < pins.size(); ++i) {
                adj[static_cast<size_t>(pins[0])].push_back(pins[i]);
                adj[static_cast<size_t>(pins[i])].push_back(pins[0]);
            }
        }
        std::vector<int> bfs;
        std::vector<char> seen(ni, 0);
        std::deque<int> q;
        auto push = [&](int i) {
            if (!seen[static_cast<size_t>(i)]) {
                seen[static_cast<size_t>(i)] = 1;
                q.push_back(i);
            }
        };
        for (size_t k = 0; k < key_regs.size(); ++k) {
            push(key_regs[k]);
            push(key_mux[k]);
        }
        auto drain = [&]() {
            while (!q.empty()) {
                int c = q.front();
                q.pop_front();
                if (!lib.kind(b.d.instances[static_cast<size_t>(c)].kind).is_port) bfs.push_back(c);
                for (int nb : adj[static_cast<size_t>(c)]) push(nb);
            }
        };
        drain();
        for (size_t i = 0; i < ni; ++i)
            if (!seen[i]) {
                push(static_cast<int>(i));
                drain();
            }
        std::vector<int> seq(bfs.size());
        {
            // centre-out: element k goes alternately below and above the middle
            std::vector<int> lo, hi;
            for (size_t k = 0; k < bfs.size(); ++k) (k % 2 ? lo : hi).push_back(bfs[k]);
            std::reverse(lo.begin(), lo.end());
            seq = lo;
            seq.insert(seq.end(), hi.begin(), hi.end());
        }
        long cell_sites = 0;
        for (int i : seq) cell_sites += b.sites(i);
        // Row occupancy targets, boosted near the key bank when packing > 0.
        const double r_key = n_rows / 2.0;
        const double r0 = std::max(2.0, n_rows * 0.08);
        std::vector<double> boost(static_cast<size_t>(n_rows));
        for (int r = 0; r < n_rows; ++r)
            boost[static_cast<size_t>(r)] = prof.key_region_packing * (1 - prof.density) * std::exp(-std::abs(r + 0.5 - r_key) / r0);
        double lo_d = 0, hi_d = 1;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo_d + hi_d), s = 0;
            for (double bo : boost) s += std::min(1.0, mid + bo) * spr;
            (s < cell_sites ? lo_d : hi_d) = mid;
        }
        std::vector<std::vector<int>> row_cells(static_cast<size_t>(n_rows));
        std::vector<long> row_occ(static_cast<size_t>(n_rows), 0);
        size_t cur = 0;
        double carry = 0;
        for (int r = 0; r < n_rows; ++r) {
            double want = std::min(1.0, hi_d + boost[static_cast<size_t>(r)]) * spr + carry;
            long cap = std::min<long>(spr, std::lround(want));
            while (cur < seq.size() && row_occ[static_cast<size_t>(r)] + b.sites(seq[cur]) <= cap) {
                row_cells[static_cast<size_t>(r)].push_back(seq[cur]);
                row_occ[static_cast<size_t>(r)] += b.sites(seq[cur]);
                ++cur;
            }
            carry = want - row_occ[static_cast<size_t>(r)];
        }
        for (; cur < seq.size(); ++cur) {
            int w = b.sites(seq[cur]);
            int best = -1;
            for (int r = 0; r < n_rows; ++r)
                if (row_occ[static_cast<size_t>(r)] + w <= spr &&
                    (best < 0 || row_occ[static_cast<size_t>(r)] < row_occ[static_cast<size_t>(best)]))
                    best = r;
            if (best < 0) throw InfeasibleError("density", "profile " + prof.name + ": cells do not fit the rows");
            row_cells[static_cast<size_t>(best)].push_back(seq[cur]);
            row_occ[static_cast<size_t>(best)] += w;
        }
        int filler_count = 0;
        std::vector<GateInstance> fillers;
        auto add_gap = [&](int row, int x, int w) {
            static const int sizes[] = {16, 8, 4, 2, 1};
            while (w > 0) {
                if (full) {
                    GateInstance g;
                    g.id = "ant_" + std::to_string(filler_count++);
                    g.kind = lib.require("ANTENNA");
                    g.x = x;
                    g.row = row;
                    fillers.push_back(g);
                    x += 1;
                    w -= 1;
                    continue;
                }
                for (int s : sizes)
                    if (s <= w) {
                        GateInstance g;
                        g.id = "fill_" + std::to_string(filler_count++);
                        g.kind = lib.require("FILL" + std::to_string(s));
                        g.x = x;
                        g.row = row;
                        fillers.push_back(g);
                        x += s;
                        w -= s;
                        break;
                    }
            }
        };
        for (int r = 0; r < n_rows; ++r) {
            auto& cells = row_cells[static_cast<size_t>(r)];
            if (r % 2) std::reverse(cells.begin(), cells.end());
            long free_sites = spr - row_occ[static_cast<size_t>(r)];
            std::vector<int> gaps(cells.size() + 1, 0);
            // whitespace comes in 16-site islands plus a scattered remainder
            for (long s = 0; s + 16 <= free_sites; s += 16) gaps[static_cast<size_t>(rng() % gaps.size())] += 16;
            for (long s = 0; s < free_sites % 16; ++s) ++gaps[static_cast<size_t>(rng() % gaps.size())];
            int x = 0;
            for (size_t k = 0; k < cells.size(); ++k) {
                if (gaps[k]) add_gap(r, x, gaps[k]);
                x += gaps[k];
                auto& g = b.d.instances[static_cast<size_t>(cells[k])];
                g.x = x;
                g.row = r;
                x += b.sites(cells[k]);
            }
            if (gaps.back()) add_gap(r, x, gaps.back());
        }
        for (auto& f : fillers) b.d.instances.push_back(f);
        b.d.rebuild_index();

        b.d.tags.clock = "clk";
        b.d.tags.reset = "rst_n";
        b.d.tags.done = "done";
        for (int q_net : key_q) b.d.tags.key_bits.push_back(b.d.nets[static_cast<size_t>(q_net)].id);

        // Activity factor fitted to the profile's total power.
        b.d.activity_factor = 1.0;
        double dyn_unit = dynamic_power(b.d, default_activity(b.d, prof.frequency_mhz));
        double st = static_power(b.d);
        double ckp = clock_tree_power(b.d, prof.frequency_mhz);
        double alpha = (prof.total_uw - st - ckp) / dyn_unit;
        if (!(alpha > 0 && alpha <= 4))
            throw InfeasibleError("total_power", "profile " + prof.name + ": total power needs activity factor " +
                                                     std::to_string(alpha));
        b.d.activity_factor = round6(alpha);
        b.d.extra["profile"] = prof.to_json();
        b.d.extra["generator"] = {{"seed", seed}, {"fabric_depth", depth}, {"flip_flops", n_ff}};
        b.d.validate();

        auto off = [](double v, double ref) { return std::abs(v - ref) / ref; };
        Netlist nl = extract_netlist(b.d, ExtractMode::attacker);
        double fest = estimate_frequency(nl, kMargin);
        if (off(fest, prof.frequency_mhz) > 0.05) continue;
        if (off(static_power(b.d), prof.leakage_uw) > 0.05)
            throw InfeasibleError("leakage", "profile " + prof.name + ": leakage unreachable with the library");
        if (off(b.d.density(), prof.density) > 0.05)
            throw InfeasibleError("density", "profile " + prof.name + ": density unreachable");
        return b.d;
    }
    throw InfeasibleError("frequency", "profile " + prof.name + ": could not meet the target frequency");
}

}  // namespace sctflow
