#include "sctflow/power.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

namespace sctflow {

ProcessModel ProcessModel::nominal() {
    ProcessModel m;
    m.sigma_global_leak = m.sigma_global_delay = m.sigma_local_leak = m.sigma_local_delay = m.sigma_wire = 0;
    return m;
}

json ProcessModel::to_json() const {
    return {{"sigma_global_leak", sigma_global_leak}, {"sigma_global_delay", sigma_global_delay},
            {"sigma_local_leak", sigma_local_leak},   {"sigma_local_delay", sigma_local_delay},
            {"sigma_wire", sigma_wire},               {"corr_length_um", corr_length_um},
            {"grid_pitch_um", grid_pitch_um}};
}

ProcessModel ProcessModel::from_json(const json& j) {
    ProcessModel m;
    m.sigma_global_leak = j.value("sigma_global_leak", m.sigma_global_leak);
    m.sigma_global_delay = j.value("sigma_global_delay", m.sigma_global_delay);
    m.sigma_local_leak = j.value("sigma_local_leak", m.sigma_local_leak);
    m.sigma_local_delay = j.value("sigma_local_delay", m.sigma_local_delay);
    m.sigma_wire = j.value("sigma_wire", m.sigma_wire);
    m.corr_length_um = j.value("corr_length_um", m.corr_length_um);
    m.grid_pitch_um = j.value("grid_pitch_um", m.grid_pitch_um);
    if (m.corr_length_um <= 0 || m.grid_pitch_um <= 0) throw ValidationError("correlation length and grid pitch must be positive");
    return m;
}

ProcessSample ProcessSample::nominal() { return ProcessSample{}; }

ProcessSample ProcessSample::corner(const ProcessModel& m, double k) {
    ProcessSample p;
    p.global_leak = std::exp(m.sigma_global_leak * k);
    p.global_delay = std::exp(-m.sigma_global_delay * k);
    return p;
}

int ProcessSample::node(double x_um, double y_um) const {
    if (z.empty()) return -1;
    int ix = std::clamp(static_cast<int>(std::lround(x_um / pitch_um)), 0, nx - 1);
    int iy = std::clamp(static_cast<int>(std::lround(y_um / pitch_um)), 0, ny - 1);
    return iy * nx + ix;
}

double ProcessSample::z_at(double x_um, double y_um) const {
    int n = node(x_um, y_um);
    return n < 0 ? 0.0 : z[static_cast<size_t>(n)];
}

double ProcessSample::local_leak(double x_um, double y_um) const {
    if (sigma_local_leak == 0) return 1.0;
    return std::exp(sigma_local_leak * z_at(x_um, y_um) - 0.5 * sigma_local_leak * sigma_local_leak);
}

double ProcessSample::local_delay(double x_um, double y_um) const {
    if (sigma_local_delay == 0) return 1.0;
    return std::exp(-sigma_local_delay * z_at(x_um, y_um));
}

ProcessSample draw_process(const ProcessModel& m, double width_um, double height_um, std::uint64_t seed,
                           std::uint64_t index) {
    ProcessSample p;
    p.seed = seed;
    p.index = index;
    std::mt19937_64 rng(mix_seed(seed, index, 0x5eed));
    std::normal_distribution<double> nd(0.0, 1.0);
    double zg = nd(rng);
    double zw = nd(rng);
    p.global_leak = std::exp(m.sigma_global_leak * zg - 0.5 * m.sigma_global_leak * m.sigma_global_leak);
    p.global_delay = std::exp(-m.sigma_global_delay * zg);
    p.wire = std::exp(m.sigma_wire * zw - 0.5 * m.sigma_wire * m.sigma_wire);
    p.sigma_local_leak = m.sigma_local_leak;
    p.sigma_local_delay = m.sigma_local_delay;
    if (m.sigma_local_leak == 0 && m.sigma_local_delay == 0) return p;
    p.pitch_um = m.grid_pitch_um;
    p.nx = static_cast<int>(std::ceil(width_um / p.pitch_um)) + 1;
    p.ny = static_cast<int>(std::ceil(height_um / p.pitch_um)) + 1;
    const double rho = std::exp(-p.pitch_um / m.corr_length_um);
    const double s = std::sqrt(1 - rho * rho);
    std::vector<double> u(static_cast<size_t>(p.nx * p.ny));
    for (int iy = 0; iy < p.ny; ++iy)
        for (int ix = 0; ix < p.nx; ++ix) {
            double w = nd(rng);
            size_t k = static_cast<size_t>(iy * p.nx + ix);
            u[k] = ix == 0 ? w : rho * u[k - 1] + s * w;
        }
    p.z.resize(u.size());
    for (int iy = 0; iy < p.ny; ++iy)
        for (int ix = 0; ix < p.nx; ++ix) {
            size_t k = static_cast<size_t>(iy * p.nx + ix);
            p.z[k] = iy == 0 ? u[k] : rho * p.z[k - static_cast<size_t>(p.nx)] + s * u[k];
        }
    return p;
}

std::vector<double> instance_leak_mults(const PlacedDesign& d, const ProcessSample& p) {
    std::vector<double> m(d.instances.size(), 1.0);
    for (size_t i = 0; i < d.instances.size(); ++i)
        m[i] = p.local_leak(d.x_um(d.instances[i]), d.y_um(d.instances[i]));
    return m;
}

std::vector<double> instance_delay_mults(const PlacedDesign& d, const ProcessSample& p) {
    std::vector<double> m(d.instances.size(), 1.0);
    for (size_t i = 0; i < d.instances.size(); ++i)
        m[i] = p.local_delay(d.x_um(d.instances[i]), d.y_um(d.instances[i]));
    return m;
}

json PowerReport::to_json() const {
    return {{"static_uw", static_uw}, {"dynamic_uw", dynamic_uw}, {"clock_tree_uw", clock_tree_uw}, {"total_uw", total()}};
}

PowerReport PowerReport::from_json(const json& j) {
    PowerReport r;
    r.static_uw = j.at("static_uw").get<double>();
    r.dynamic_uw = j.at("dynamic_uw").get<double>();
    r.clock_tree_uw = j.at("clock_tree_uw").get<double>();
    return r;
}

double static_power(const PlacedDesign& d, const ProcessSample& p) {
    double s = 0;
    for (const auto& g : d.instances) {
        double l = d.kind_of(g).leakage;
        if (l == 0) continue;
        s += l * p.local_leak(d.x_um(g), d.y_um(g));
    }
    return s * p.global_leak;
}

double net_load_ff(const PlacedDesign& d, const Net& n) {
    double c = n.extra_cap_ff;
    for (const auto& s : n.sinks) {
        const auto& k = d.kind_of(s.inst);
        auto it = k.pin_caps.find(s.pin);
        if (it != k.pin_caps.end()) c += it->second;
        c += d.library->wire_cap_per_fanout_ff;
    }
    return c;
}

double dynamic_power(const PlacedDesign& d, const std::vector<double>& activity_hz) {
    if (activity_hz.size() != d.nets.size()) throw ValidationError("activity vector must cover every net");
    const double v2 = d.library->vdd * d.library->vdd;
    double cap_term = 0, energy_term = 0;  // Hz*fF, Hz*fJ
    for (size_t i = 0; i < d.nets.size(); ++i) {
        double f = activity_hz[i];
        if (f == 0) continue;
        const auto& n = d.nets[i];
        cap_term += f * net_load_ff(d, n);
        energy_term += f * d.kind_of(n.driver.inst).toggle_energy_fj;
    }
    // fF * V^2 * Hz = 1e-15 W; report uW.
    return (0.5 * v2 * cap_term + energy_term) * 1e-9;
}

std::vector<double> default_activity(const PlacedDesign& d, double freq_mhz) {
    std::vector<double> a(d.nets.size(), 0.0);
    for (size_t i = 0; i < d.nets.size(); ++i) {
        const auto& n = d.nets[i];
        if (n.clock_ratio > 0) continue;
        if (d.kind_of(n.driver.inst).is_port) continue;
        a[i] = d.activity_factor * freq_mhz * 1e6;
    }
    return a;
}

double clock_tree_power(const PlacedDesign& d, double freq_mhz) {
    const auto& ct = d.library->clock_tree;
    const double v2 = d.library->vdd * d.library->vdd;
    double p = 0;
    for (const auto& n : d.nets) {
        if (n.clock_ratio <= 0) continue;
        double cap = 0;
        int sinks = 0;
        for (const auto& s : n.sinks) {
            const auto& k = d.kind_of(s.inst);
            if (!k.is_sequential || s.pin != k.clock_pin) continue;
            cap += k.pin_caps.at(s.pin) + ct.wire_cap_per_sink_ff;
            ++sinks;
        }
        if (sinks == 0) continue;
        int nbuf = (sinks + ct.buffer_fanout - 1) / ct.buffer_fanout;
        double e_cycle = v2 * (cap + nbuf * ct.buffer_input_cap_ff) + nbuf * ct.buffer_energy_fj;  // fJ
        p += freq_mhz / n.clock_ratio * e_cycle * 1e-3;
    }
    return p;
}

PowerReport power_report(const PlacedDesign& d, double freq_mhz, const ProcessSample& p) {
    PowerReport r;
    r.static_uw = static_power(d, p);
    r.dynamic_uw = dynamic_power(d, default_activity(d, freq_mhz));
    r.clock_tree_uw = clock_tree_power(d, freq_mhz);
    return r;
}

json McSummary::to_json() const {
    json h = json::array();
    for (size_t i = 0; i < histogram.counts.size(); ++i)
        h.push_back({{"power_uW", histogram.lower[i] + 0.5 * histogram.width[i]}, {"count", histogram.counts[i]}});
    return {{"nominal_uw", nominal}, {"mean_uw", mean},         {"variance", variance},
            {"skewness", skewness},  {"n_samples", samples.size()}, {"histogram", h}};
}

std::string McSummary::samples_csv() const {
    std::string s = "sample,power_uW\n";
    char buf[64];
    for (size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, round6(samples[i]));
        s += buf;
    }
    return s;
}

McSummary monte_carlo_static(const PlacedDesign& d, int n_samples, std::uint64_t seed, const ProcessModel& m, int bins,
                             int threads) {
    if (n_samples < 1) throw ValidationError("monte_carlo_static needs n >= 1");
    McSummary r;
    r.nominal = static_power(d);
    const double w = d.core_width_um(), h = d.core_height_um();
    // Leakage aggregated on the field grid; the per-sample cost is then grid-sized.
    ProcessSample shape = draw_process(m, w, h, seed, 0);
    std::vector<double> node_leak(std::max<size_t>(shape.z.size(), 1), 0.0);
    for (const auto& g : d.instances) {
        double l = d.kind_of(g).leakage;
        if (l == 0) continue;
        int nd = shape.node(d.x_um(g), d.y_um(g));
        node_leak[static_cast<size_t>(nd < 0 ? 0 : nd)] += l;
    }
    r.samples.assign(static_cast<size_t>(n_samples), 0.0);
    auto work = [&](int t, int nt) {
        for (int i = t; i < n_samples; i += nt) {
            ProcessSample p = draw_process(m, w, h, seed, static_cast<std::uint64_t>(i));
            double s = 0;
            if (p.z.empty()) {
                for (double l : node_leak) s += l;
            } else {
                const double sl = p.sigma_local_leak;
                for (size_t k = 0; k < node_leak.size(); ++k)
                    if (node_leak[k] != 0) s += node_leak[k] * std::exp(sl * p.z[k] - 0.5 * sl * sl);
            }
            r.samples[static_cast<size_t>(i)] = s * p.global_leak;
        }
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    // Deterministic reduction in index order.
    double sum = 0;
    for (double v : r.samples) sum += v;
    r.mean = sum / n_samples;
    double m2 = 0, m3 = 0;
    for (double v : r.samples) {
        double dv = v - r.mean;
        m2 += dv * dv;
        m3 += dv * dv * dv;
    }
    m2 /= n_samples;
    m3 /= n_samples;
    r.variance = m2;
    r.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
    r.histogram = make_histogram(r.samples, bins);
    return r;
}

}  // namespace sctflow
