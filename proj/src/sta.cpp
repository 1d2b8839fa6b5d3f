#include "sctflow/sta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sctflow {

namespace {

std::string join_ids(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? " -> " : "") + v[i];
    return s;
}

}  // namespace

CombinationalCycle::CombinationalCycle(std::vector<std::string> cyc)
    : ValidationError("combinational cycle: " + join_ids(cyc)), cycle(std::move(cyc)) {}

double TimingReport::min_slack() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : endpoints) m = std::min(m, e.slack);
    return endpoints.empty() ? 0.0 : m;
}

const EndpointTiming* TimingReport::worst() const {
    const EndpointTiming* w = nullptr;
    for (const auto& e : endpoints)
        if (!w || e.slack < w->slack) w = &e;
    return w;
}

json TimingReport::to_json() const {
    json j;
    j["critical_path"] = critical_path;
    j["critical_delay_ps"] = critical_delay;
    j["clock_period_ps"] = clock_period;
    j["margin_ps"] = margin;
    j["min_slack_ps"] = min_slack();
    j["endpoint_count"] = endpoints.size();
    json s = json::object();
    for (const auto& [k, v] : slack_per_endpoint) s[k] = v;
    j["slack_per_endpoint"] = std::move(s);
    return j;
}

TimingReport analyze_timing(const Netlist& n, const TimingOptions& opt) {
    const auto& lib = *n.library;
    const size_t ni = n.instances.size();
    std::vector<int> out_net(ni, -1);
    std::vector<std::vector<std::pair<int, std::string>>> in_nets(ni);
    for (size_t i = 0; i < n.nets.size(); ++i) {
        const auto& net = n.nets[i];
        if (net.driver.inst >= 0) out_net[static_cast<size_t>(net.driver.inst)] = static_cast<int>(i);
        for (const auto& s : net.sinks)
            if (s.inst >= 0) in_nets[static_cast<size_t>(s.inst)].push_back({static_cast<int>(i), s.pin});
    }
    std::vector<double> load(n.nets.size(), 0.0);
    for (size_t i = 0; i < n.nets.size(); ++i) {
        const auto& net = n.nets[i];
        double c = net.extra_cap_ff;
        for (const auto& s : net.sinks) {
            if (s.inst < 0) continue;
            const auto& k = n.kind_of(s.inst);
            auto it = k.pin_caps.find(s.pin);
            if (it != k.pin_caps.end()) c += it->second;
            c += lib.wire_cap_per_fanout_ff;
        }
        load[i] = c;
    }
    auto mult = [&](int inst) {
        double m = opt.global_delay_mult;
        if (opt.inst_delay_mult) m *= (*opt.inst_delay_mult)[static_cast<size_t>(inst)];
        return m;
    };
    auto cell_delay = [&](int inst) {
        const auto& k = n.kind_of(inst);
        int on = out_net[static_cast<size_t>(inst)];
        double c = on >= 0 ? load[static_cast<size_t>(on)] : 0.0;
        return (k.intrinsic_ps + k.slope_ps_per_ff * c) * mult(inst);
    };
    auto is_timing_pin = [](const CellKind& k, const std::string& pin) {
        if (k.is_sequential) return pin != k.clock_pin &&
                                    std::find(k.async_pins.begin(), k.async_pins.end(), pin) == k.async_pins.end();
        return true;
    };

    const double NEG = -std::numeric_limits<double>::infinity();
    std::vector<double> net_arr(n.nets.size(), NEG);
    std::vector<int> net_pred(n.nets.size(), -1);  // best input net of the driver (combinational)
    // Launch points.
    std::vector<int> comb;
    std::vector<int> indeg(ni, 0);
    for (size_t i = 0; i < ni; ++i) {
        const auto& k = n.kind_of(static_cast<int>(i));
        int on = out_net[i];
        if (k.is_sequential) {
            if (on >= 0) net_arr[static_cast<size_t>(on)] = cell_delay(static_cast<int>(i));
        } else if (k.is_port || k.is_ring) {
            if (on >= 0) net_arr[static_cast<size_t>(on)] = 0.0;
        } else if (!k.output_pin.empty() && !k.is_filler) {
            comb.push_back(static_cast<int>(i));
        }
    }
    // Nets driven by a clock source carry no data arrival.
    for (size_t i = 0; i < n.nets.size(); ++i) {
        const auto& net = n.nets[i];
        if (net.clock_ratio > 0 && net.driver.inst >= 0 && n.kind_of(net.driver.inst).is_port) net_arr[i] = NEG;
    }
    std::vector<char> is_comb(ni, 0);
    for (int c : comb) is_comb[static_cast<size_t>(c)] = 1;
    for (int c : comb)
        for (const auto& [net, pin] : in_nets[static_cast<size_t>(c)]) {
            int d = n.nets[static_cast<size_t>(net)].driver.inst;
            if (d >= 0 && is_comb[static_cast<size_t>(d)]) ++indeg[static_cast<size_t>(c)];
        }
    std::vector<int> order;
    order.reserve(comb.size());
    std::vector<int> stack;
    for (int c : comb)
        if (indeg[static_cast<size_t>(c)] == 0) stack.push_back(c);
    while (!stack.empty()) {
        int c = stack.back();
        stack.pop_back();
        order.push_back(c);
        int on = out_net[static_cast<size_t>(c)];
        if (on < 0) continue;
        for (const auto& s : n.nets[static_cast<size_t>(on)].sinks) {
            if (s.inst < 0 || !is_comb[static_cast<size_t>(s.inst)]) continue;
            if (--indeg[static_cast<size_t>(s.inst)] == 0) stack.push_back(s.inst);
        }
    }
    if (order.size() != comb.size()) {
        // Walk predecessors inside the unresolved set until a node repeats.
        std::vector<char> left(ni, 0);
        for (int c : comb)
            if (indeg[static_cast<size_t>(c)] > 0) left[static_cast<size_t>(c)] = 1;
        int start = -1;
        for (int c : comb)
            if (left[static_cast<size_t>(c)]) {
                start = c;
                break;
            }
        std::vector<int> pos(ni, -1), path;
        int cur = start;
        while (pos[static_cast<size_t>(cur)] < 0) {
            pos[static_cast<size_t>(cur)] = static_cast<int>(path.size());
            path.push_back(cur);
            int next = -1;
            for (const auto& [net, pin] : in_nets[static_cast<size_t>(cur)]) {
                int d = n.nets[static_cast<size_t>(net)].driver.inst;
                if (d >= 0 && left[static_cast<size_t>(d)]) {
                    next = d;
                    break;
                }
            }
            cur = next;
        }
        std::vector<std::string> cyc;
        for (size_t i = static_cast<size_t>(pos[static_cast<size_t>(cur)]); i < path.size(); ++i)
            cyc.push_back(n.instances[static_cast<size_t>(path[i])].id);
        std::reverse(cyc.begin(), cyc.end());
        throw CombinationalCycle(cyc);
    }
    for (int c : order) {
        double a = NEG;
        int best = -1;
        for (const auto& [net, pin] : in_nets[static_cast<size_t>(c)]) {
            if (net_arr[static_cast<size_t>(net)] > a) {
                a = net_arr[static_cast<size_t>(net)];
                best = net;
            }
        }
        int on = out_net[static_cast<size_t>(c)];
        if (on < 0) continue;
        if (a == NEG) continue;  // undriven cone (e.g. only tied to clocks)
        net_arr[static_cast<size_t>(on)] = a + cell_delay(c);
        net_pred[static_cast<size_t>(on)] = best;
    }

    TimingReport r;
    r.clock_period = opt.clock_period_ps;
    r.margin = opt.margin_ps;
    std::vector<int> ck_ratio(ni, 1);
    for (size_t i = 0; i < ni; ++i) {
        const auto& k = n.kind_of(static_cast<int>(i));
        if (!k.is_sequential) continue;
        for (const auto& [net, pin] : in_nets[i])
            if (pin == k.clock_pin && n.nets[static_cast<size_t>(net)].clock_ratio > 0)
                ck_ratio[i] = n.nets[static_cast<size_t>(net)].clock_ratio;
    }
    int worst_net = -1, worst_inst = -1;
    double worst_arr = NEG;
    for (size_t i = 0; i < ni; ++i) {
        const auto& k = n.kind_of(static_cast<int>(i));
        bool endpoint_kind = k.is_sequential || (k.is_port && k.output_pin.empty()) || k.is_ring;
        if (!endpoint_kind) continue;
        if (opt.endpoint_filter && !opt.endpoint_filter(static_cast<int>(i))) continue;
        for (const auto& [net, pin] : in_nets[i]) {
            if (!is_timing_pin(k, pin)) continue;
            double a = net_arr[static_cast<size_t>(net)];
            if (a == NEG) a = 0.0;
            int ratio = k.is_sequential ? ck_ratio[i] : opt.default_endpoint_ratio;
            EndpointTiming e;
            e.name = n.instances[i].id + "/" + pin;
            e.inst = static_cast<int>(i);
            e.arrival = a;
            e.period = opt.clock_period_ps * ratio;
            e.slack = e.period - opt.margin_ps - a;
            r.slack_per_endpoint[e.name] = e.slack;
            r.endpoints.push_back(e);
            if (a > worst_arr) {
                worst_arr = a;
                worst_net = net;
                worst_inst = static_cast<int>(i);
            }
        }
    }
    r.critical_delay = worst_arr == NEG ? 0.0 : worst_arr;
    if (worst_inst >= 0) {
        std::vector<std::string> path{n.instances[static_cast<size_t>(worst_inst)].id};
        int net = worst_net;
        while (net >= 0) {
            int d = n.nets[static_cast<size_t>(net)].driver.inst;
            if (d < 0) break;
            path.push_back(n.instances[static_cast<size_t>(d)].id);
            net = net_pred[static_cast<size_t>(net)];
        }
        std::reverse(path.begin(), path.end());
        r.critical_path = std::move(path);
    }
    return r;
}

double estimate_frequency(const Netlist& n, double margin_ps, const TimingOptions& base) {
    TimingOptions o = base;
    o.clock_period_ps = 1.0;
    o.margin_ps = margin_ps;
    auto r = analyze_timing(n, o);
    double need = 0;
    for (const auto& e : r.endpoints) need = std::max(need, (e.arrival + margin_ps) / e.period);
    if (!(need > 0)) throw ValidationError("design has no timed endpoints");
    return 1e6 / need;
}

std::string Histogram::to_csv(const std::string& value_column) const {
    std::string s = value_column + ",count\n";
    char buf[96];
    for (size_t i = 0; i < counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f,%ld\n", round6(lower[i] + 0.5 * width[i]), counts[i]);
        s += buf;
    }
    return s;
}

long Histogram::total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
    Histogram h;
    if (values.empty() || bins <= 0) return h;
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (hi <= lo) {
        h.lower = {lo};
        h.width = {0.0};
        h.counts = {static_cast<long>(values.size())};
        return h;
    }
    double w = (hi - lo) / bins;
    h.lower.resize(static_cast<size_t>(bins));
    h.width.assign(static_cast<size_t>(bins), w);
    h.counts.assign(static_cast<size_t>(bins), 0);
    for (int b = 0; b < bins; ++b) h.lower[static_cast<size_t>(b)] = lo + b * w;
    for (double v : values) {
        int b = static_cast<int>((v - lo) / w);
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<size_t>(b)];
    }
    return h;
}

Histogram slack_histogram(const TimingReport& r, int bins) {
    std::vector<double> v;
    v.reserve(r.endpoints.size());
    for (const auto& e : r.endpoints) v.push_back(e.slack);
    return make_histogram(v, bins);
}

}  // namespace sctflow
