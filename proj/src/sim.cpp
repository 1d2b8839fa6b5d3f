#include "sctflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "sctflow/eco.hpp"

namespace sctflow {

// ---------------------------------------------------------------- config

long TraceConfig::samples_per_step() const { return std::lround(step_s * sample_rate_hz); }

void TraceConfig::validate() const {
    if (!(sample_rate_hz > 0)) throw ValidationError("sample_rate must be positive");
    if (!(step_s > 0)) throw ValidationError("step duration must be positive");
    if (samples_per_step() < 8)
        throw ValidationError("sample rate too low: " + std::to_string(samples_per_step()) +
                              " samples per step, need at least 8");
    if (noise_sigma_ua < 0) throw ValidationError("noise sigma must be >= 0");
    if (quantization_ua < 0) throw ValidationError("quantization must be >= 0");
    if (pre_idle_s < 0 || tail_s < 0) throw ValidationError("idle durations must be >= 0");
    if (!(wire_delay_ps_per_um >= 0)) throw ValidationError("wire delay coefficient must be >= 0");
    double last = 0;
    for (const auto& [s, d] : encryptions) {
        if (s < last || d < 0) throw ValidationError("encryption schedule must be ordered and non-overlapping");
        last = s + d;
    }
}

json TraceConfig::to_json() const {
    json e = json::array();
    for (const auto& [s, d] : encryptions) e.push_back({s, d});
    return {{"sample_rate_hz", sample_rate_hz},
            {"noise_sigma_ua", noise_sigma_ua},
            {"quantization_ua", quantization_ua},
            {"pre_idle_s", pre_idle_s},
            {"encryptions", e},
            {"step_s", step_s},
            {"tail_s", tail_s},
            {"clock_off_after_done", clock_off_after_done},
            {"wire_delay_ps_per_um", wire_delay_ps_per_um}};
}

TraceConfig TraceConfig::from_json(const json& j) {
    TraceConfig c;
    try {
        c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
        c.noise_sigma_ua = j.value("noise_sigma_ua", c.noise_sigma_ua);
        c.quantization_ua = j.value("quantization_ua", c.quantization_ua);
        c.pre_idle_s = j.value("pre_idle_s", c.pre_idle_s);
        if (j.contains("encryptions")) {
            c.encryptions.clear();
            for (const auto& e : j["encryptions"]) c.encryptions.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
        }
        c.step_s = j.value("step_s", c.step_s);
        c.tail_s = j.value("tail_s", c.tail_s);
        c.clock_off_after_done = j.value("clock_off_after_done", c.clock_off_after_done);
        c.wire_delay_ps_per_um = j.value("wire_delay_ps_per_um", c.wire_delay_ps_per_um);
    } catch (const json::exception& e) {
        throw ParseError(std::string("trace config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string TraceConfig::hash() const { return sha256_hex(dump_json(to_json())).substr(0, 16); }

json TraceAnnotations::to_json() const {
    json s = json::array();
    for (const auto& [a, b] : steps) s.push_back({a, b});
    return {{"trigger_s", trigger_s}, {"steps", s}, {"symbols", symbols}, {"step_ua", step_ua}, {"baseline_ua", baseline_ua}};
}

TraceAnnotations TraceAnnotations::from_json(const json& j) {
    TraceAnnotations a;
    try {
        a.trigger_s = j.at("trigger_s").get<double>();
        for (const auto& s : j.at("steps")) a.steps.push_back({s.at(0).get<long>(), s.at(1).get<long>()});
        a.symbols = j.at("symbols").get<std::vector<int>>();
        a.step_ua = j.value("step_ua", std::vector<double>{});
        a.baseline_ua = j.value("baseline_ua", 0.0);
    } catch (const json::exception& e) {
        throw ParseError(std::string("annotations: ") + e.what());
    }
    return a;
}

PowerTrace PowerTrace::attacker_view() const {
    PowerTrace t = *this;
    t.annotations.reset();
    return t;
}

std::string PowerTrace::to_csv() const {
    std::string s;
    char buf[128];
    std::snprintf(buf, sizeof buf, "# dt_s=%.9g vdd_v=%.6f config=%s\n", dt, vdd, config_hash.c_str());
    s += buf;
    s += "t_s,current_uA\n";
    s.reserve(s.size() + samples.size() * 24);
    for (size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", round6(static_cast<double>(i) * dt), round6(samples[i]));
        s += buf;
    }
    return s;
}

PowerTrace PowerTrace::from_csv(const std::string& text) {
    PowerTrace t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header = false;
    std::vector<double> times;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream h(line.substr(1));
            std::string tok;
            while (h >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
                try {
                    if (k == "dt_s") t.dt = std::stod(v);
                    else if (k == "vdd_v") t.vdd = std::stod(v);
                    else if (k == "config") t.config_hash = v;
                } catch (const std::exception&) {
                    throw ParseError("trace header: bad value for " + k, lineno, 1);
                }
            }
            continue;
        }
        if (!header) {
            if (line != "t_s,current_uA") throw ParseError("trace: expected header 't_s,current_uA'", lineno, 1);
            header = true;
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("trace: expected two columns", lineno, 1);
        try {
            times.push_back(std::stod(line.substr(0, comma)));
            t.samples.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ParseError("trace: bad number", lineno, 1);
        }
    }
    if (t.samples.empty()) throw ParseError("trace: no samples");
    if (!(t.dt > 0) && times.size() > 1) t.dt = times[1] - times[0];
    if (!(t.dt > 0)) throw ParseError("trace: missing sample interval");
    return t;
}

// ---------------------------------------------------------------- keys

std::vector<int> key_from_hex(const std::string& hex_in, int n_bits) {
    std::string hex = hex_in;
    if (hex.rfind("0x", 0) == 0 || hex.rfind("0X", 0) == 0) hex = hex.substr(2);
    if (static_cast<int>(hex.size()) * 4 != n_bits)
        throw ValidationError("key has " + std::to_string(hex.size() * 4) + " bits, expected " + std::to_string(n_bits) +
                              " (" + std::to_string((n_bits + 3) / 4) + " hex digits)");
    std::vector<int> bits;
    for (char c : hex) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else throw ValidationError(std::string("key: invalid hex digit '") + c + "'");
        for (int b = 3; b >= 0; --b) bits.push_back((v >> b) & 1);
    }
    return bits;
}

std::string key_to_hex(const std::vector<int>& bits) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (size_t i = 0; i < bits.size(); i += 4) {
        int v = 0;
        for (size_t b = 0; b < 4; ++b) v = v * 2 + (i + b < bits.size() ? bits[i + b] : 0);
        s += digits[v];
    }
    return s;
}

std::vector<int> key_symbols(const std::vector<int>& key, int n_leak) {
    if (n_leak != 1 && n_leak != 2) throw ValidationError("n_leak must be 1 or 2");
    if (key.size() % static_cast<size_t>(n_leak)) throw ValidationError("key length not a multiple of n_leak");
    std::vector<int> s;
    for (size_t i = 0; i < key.size(); i += static_cast<size_t>(n_leak))
        s.push_back(n_leak == 2 ? key[i] * 2 + key[i + 1] : key[i] * 3);
    return s;
}

std::vector<int> symbol_levels(int n_leak) {
    if (n_leak == 1) return {0, 3};
    return {0, 1, 2, 3};
}

// ---------------------------------------------------------------- electrical model

SimContext SimContext::make(const PlacedDesign& t) {
    if (!t.extra.contains("sct")) throw ValidationError("design has no inserted trojan (missing sct section)");
    SimContext c;
    c.design = &t;
    c.sct = SctConfig::from_json(t.extra["sct"]);
    if (!(t.clock_period_ps > 0)) throw ValidationError("design has no clock period");
    c.freq_mhz = 1e6 / t.clock_period_ps;
    auto act = default_activity(t, c.freq_mhz);
    c.dynamic_uw = dynamic_power(t, act);
    c.clock_tree_uw = clock_tree_power(t, c.freq_mhz);
    for (size_t i = 0; i < t.instances.size(); ++i)
        if (t.instances[i].id.rfind("sct/", 0) == 0 && t.kind_of(static_cast<int>(i)).is_ring)
            c.ring_cells.push_back(static_cast<int>(i));
    if (c.ring_cells.empty()) throw ValidationError("trojan has no ring cells");
    RingGeometry rg = ring_geometry(t);
    c.ring_hpwl_um = rg.ring_hpwl_um;
    c.ring_net_hpwl_um = rg.nets > 0 ? rg.ring_hpwl_um / rg.nets : 0.0;
    const auto& lib = *t.library;
    for (int v = 0; v < 4; ++v)
        c.planned_step_uw[static_cast<size_t>(v)] = ro_symbol_power_uw(lib, c.sct.ro, v) - ro_leakage_uw(lib, c.sct.ro);
    return c;
}

DieState SimContext::die(const ProcessSample& p, const TraceConfig& cfg) const {
    const PlacedDesign& t = *design;
    const auto& lib = *t.library;
    DieState s;
    double dm = 0, lm = 0;
    for (int i : ring_cells) {
        const auto& g = t.instances[static_cast<size_t>(i)];
        dm += p.local_delay(t.x_um(g), t.y_um(g));
        lm += p.local_leak(t.x_um(g), t.y_um(g));
    }
    s.ro.delay_mult = p.global_delay * dm / static_cast<double>(ring_cells.size());
    s.ro.leak_mult = p.global_leak * lm / static_cast<double>(ring_cells.size());
    s.wire_ps_per_stage = cfg.wire_delay_ps_per_um * ring_net_hpwl_um * p.wire;
    s.static_uw = static_power(t, p);
    s.dynamic_uw = dynamic_uw;
    s.clock_tree_uw = clock_tree_uw;
    const double ring_leak = ro_leakage_uw(lib, sct.ro) * s.ro.leak_mult;
    for (int v = 0; v < 4; ++v) {
        RoProcess rp = s.ro;
        int stages = active_delay_cells(sct.ro, v & 1, v >> 1) + sct.ro.n_i + 11;
        rp.wire_delay_ps = s.wire_ps_per_stage * stages;
        s.ro_step_uw[static_cast<size_t>(v)] = ro_symbol_power_uw(lib, sct.ro, v, rp) - ring_leak;
    }
    return s;
}

namespace {

// Builds the noiseless current waveform and the annotations.
PowerTrace noiseless(const SimContext& ctx, const DieState& die, const std::vector<int>& key, const TraceConfig& cfg) {
    const auto& sct = ctx.sct;
    if (static_cast<int>(key.size()) != sct.n_key)
        throw ValidationError("key length " + std::to_string(key.size()) + " does not match n_key " + std::to_string(sct.n_key));
    for (int b : key)
        if (b != 0 && b != 1) throw ValidationError("key bits must be 0 or 1");
    cfg.validate();
    const double vdd = ctx.design->library->vdd;
    const double dt = 1.0 / cfg.sample_rate_hz;
    const long sps = cfg.samples_per_step();
    auto idx = [&](double t) { return static_cast<long>(std::llround(t / dt)); };

    const std::vector<int> syms = key_symbols(key, sct.n_leak);
    const bool triggered = !cfg.encryptions.empty() && cfg.encryptions.front().second > 0;
    double end_s = cfg.pre_idle_s;
    for (const auto& [s, d] : cfg.encryptions) end_s = std::max(end_s, s + d);
    long trig = 0;
    if (triggered) {
        trig = idx(cfg.encryptions.front().first + cfg.encryptions.front().second);
        end_s = std::max(end_s, trig * dt + static_cast<double>(syms.size()) * cfg.step_s);
        // the trojan is silent while the core encrypts
        for (size_t k = 1; k < cfg.encryptions.size(); ++k)
            if (idx(cfg.encryptions[k].first) < trig + static_cast<long>(syms.size()) * sps)
                throw ValidationError("encryption scheduled while the trojan is leaking");
    }
    end_s += cfg.tail_s;
    const long n = std::max<long>(1, idx(end_s));

    const double idle = (die.static_uw + die.clock_tree_uw) / vdd;
    const double after = (die.static_uw + (cfg.clock_off_after_done ? 0.0 : die.clock_tree_uw)) / vdd;
    const double busy = (die.static_uw + die.dynamic_uw + die.clock_tree_uw) / vdd;
    PowerTrace t;
    t.dt = dt;
    t.vdd = vdd;
    t.config_hash = cfg.hash();
    t.samples.assign(static_cast<size_t>(n), idle);
    TraceAnnotations a;
    a.baseline_ua = triggered ? after : idle;
    if (triggered) {
        for (long i = trig; i < n; ++i) t.samples[static_cast<size_t>(i)] = after;
        a.trigger_s = trig * dt;
        for (size_t k = 0; k < syms.size(); ++k) {
            long b = trig + static_cast<long>(k) * sps, e = std::min(n, b + sps);
            double step = die.ro_step_uw[static_cast<size_t>(syms[k])] / vdd;
            for (long i = b; i < e; ++i) t.samples[static_cast<size_t>(i)] = after + step;
            a.steps.push_back({b, e});
            a.symbols.push_back(syms[k]);
            a.step_ua.push_back(step);
        }
    }
    for (const auto& [s, d] : cfg.encryptions) {
        long b = idx(s), e = std::min(n, idx(s + d));
        for (long i = b; i < e; ++i) t.samples[static_cast<size_t>(i)] = busy;
    }
    t.annotations = a;
    return t;
}

void add_noise(PowerTrace& t, const TraceConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& s : t.samples) {
        if (cfg.noise_sigma_ua > 0) s += cfg.noise_sigma_ua * nd(rng);
        if (cfg.quantization_ua > 0) s = std::round(s / cfg.quantization_ua) * cfg.quantization_ua;
    }
}

}  // namespace

PowerTrace simulate_trace(const SimContext& ctx, const std::vector<int>& key, const ProcessSample& p,
                          const TraceConfig& cfg, std::uint64_t noise_seed) {
    DieState die = ctx.die(p, cfg);
    PowerTrace t = noiseless(ctx, die, key, cfg);
    add_noise(t, cfg, noise_seed);
    return t;
}

PowerTrace simulate_trace(const PlacedDesign& trojaned, const std::vector<int>& key, const ProcessSample& p,
                          const TraceConfig& cfg, std::uint64_t noise_seed) {
    return simulate_trace(SimContext::make(trojaned), key, p, cfg, noise_seed);
}

// ---------------------------------------------------------------- statistics

std::array<double, 4> measured_amplitudes(const PowerTrace& t) {
    if (!t.annotations) throw ValidationError("trace has no annotations");
    const auto& a = *t.annotations;
    std::array<double, 4> sum{}, cnt{};
    // baseline from the samples after the last step
    double base = 0;
    long nb = 0;
    long last = a.steps.empty() ? 0 : a.steps.back().second;
    for (long i = last; i < static_cast<long>(t.samples.size()); ++i, ++nb) base += t.samples[static_cast<size_t>(i)];
    base = nb ? base / static_cast<double>(nb) : a.baseline_ua;
    for (size_t k = 0; k < a.steps.size(); ++k) {
        double m = 0;
        for (long i = a.steps[k].first; i < a.steps[k].second; ++i) m += t.samples[static_cast<size_t>(i)];
        m /= static_cast<double>(a.steps[k].second - a.steps[k].first);
        sum[static_cast<size_t>(a.symbols[k])] += m - base;
        cnt[static_cast<size_t>(a.symbols[k])] += 1;
    }
    std::array<double, 4> r;
    for (int v = 0; v < 4; ++v)
        r[static_cast<size_t>(v)] = cnt[static_cast<size_t>(v)] > 0 ? sum[static_cast<size_t>(v)] / cnt[static_cast<size_t>(v)]
                                                                     : std::numeric_limits<double>::quiet_NaN();
    return r;
}

Separability separability(const std::vector<std::array<double, 4>>& amp, int n_leak) {
    Separability s;
    for (int v : symbol_levels(n_leak)) {
        SymbolStats st;
        st.symbol = v;
        double sum = 0, sq = 0;
        for (const auto& a : amp) {
            double x = a[static_cast<size_t>(v)];
            if (std::isnan(x)) continue;
            ++st.n;
            sum += x;
        }
        if (st.n == 0) continue;
        st.mean = sum / st.n;
        for (const auto& a : amp) {
            double x = a[static_cast<size_t>(v)];
            if (!std::isnan(x)) sq += (x - st.mean) * (x - st.mean);
        }
        st.sd = st.n > 1 ? std::sqrt(sq / (st.n - 1)) : 0.0;
        st.lo = st.mean - 1.96 * st.sd;
        st.hi = st.mean + 1.96 * st.sd;
        s.symbols.push_back(st);
    }
    std::sort(s.symbols.begin(), s.symbols.end(), [](const SymbolStats& a, const SymbolStats& b) { return a.mean > b.mean; });
    if (s.symbols.size() < 2) return s;
    s.min_gap_ua = std::numeric_limits<double>::infinity();
    double sep = 0;
    for (size_t k = 0; k + 1 < s.symbols.size(); ++k) {
        sep += s.symbols[k].mean - s.symbols[k + 1].mean;
        s.min_gap_ua = std::min(s.min_gap_ua, s.symbols[k].lo - s.symbols[k + 1].hi);
    }
    s.mean_separation_ua = sep / static_cast<double>(s.symbols.size() - 1);
    s.overlap = s.min_gap_ua < 0;
    s.near_overlap = s.overlap || s.min_gap_ua < 0.25 * s.mean_separation_ua;
    return s;
}

json Separability::to_json() const {
    json a = json::array();
    for (const auto& s : symbols)
        a.push_back({{"symbol", s.symbol}, {"n", s.n}, {"mean_ua", s.mean}, {"sd_ua", s.sd}, {"ci_lo_ua", s.lo}, {"ci_hi_ua", s.hi}});
    return {{"symbols", a},
            {"min_gap_ua", min_gap_ua},
            {"mean_separation_ua", mean_separation_ua},
            {"overlap", overlap},
            {"near_overlap", near_overlap}};
}

std::string Separability::to_csv() const {
    std::string s = "symbol,n,mean_ua,sd_ua,ci_lo_ua,ci_hi_ua\n";
    char buf[160];
    for (const auto& x : symbols) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.6f,%.6f\n", x.symbol, x.n, round6(x.mean), round6(x.sd), round6(x.lo),
                      round6(x.hi));
        s += buf;
    }
    return s;
}

json BatchResult::to_json() const {
    json a = json::array();
    for (const auto& d : amplitudes) {
        json r = json::array();
        for (double v : d) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
        a.push_back(r);
    }
    return {{"dies", amplitudes.size()}, {"amplitudes_ua", a}, {"separability", stats.to_json()}};
}

BatchResult batch_simulate(const PlacedDesign& trojaned, const std::vector<int>& key, int n_dies, std::uint64_t seed,
                           const TraceConfig& cfg, const ProcessModel& model, int threads, bool keep_traces) {
    if (n_dies < 1) throw ValidationError("batch_simulate needs n_dies >= 1");
    SimContext ctx = SimContext::make(trojaned);
    BatchResult r;
    r.traces.resize(static_cast<size_t>(n_dies));
    r.amplitudes.resize(static_cast<size_t>(n_dies));
    const double w = trojaned.core_width_um(), h = trojaned.core_height_um();
    auto work = [&](int t0, int nt) {
        for (int i = t0; i < n_dies; i += nt) {
            ProcessSample p = draw_process(model, w, h, seed, static_cast<std::uint64_t>(i));
            PowerTrace tr = simulate_trace(ctx, key, p, cfg, mix_seed(seed, static_cast<std::uint64_t>(i), 0x7ace));
            r.amplitudes[static_cast<size_t>(i)] = measured_amplitudes(tr);
            if (keep_traces) r.traces[static_cast<size_t>(i)] = std::move(tr);
        }
    };
    threads = std::clamp(threads, 1, n_dies);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    if (!keep_traces) r.traces.clear();
    r.stats = separability(r.amplitudes, ctx.sct.n_leak);
    return r;
}

// ---------------------------------------------------------------- wire calibration

double realized_step_ratio(const SimContext& ctx, double k) {
    TraceConfig cfg;
    cfg.wire_delay_ps_per_um = k;
    DieState d = ctx.die(ProcessSample::nominal(), cfg);
    return d.ro_step_uw[0] / ctx.planned_step_uw[0];
}

double calibrate_wire_delay(const PlacedDesign& trojaned, double target_ratio) {
    if (!(target_ratio > 0 && target_ratio <= 1)) throw ValidationError("target ratio must be in (0, 1]");
    SimContext ctx = SimContext::make(trojaned);
    double lo = 0, hi = 1;
    while (realized_step_ratio(ctx, hi) > target_ratio) {
        hi *= 2;
        if (hi > 1e6) throw InfeasibleError("wire", "ring has no wire length to calibrate against");
    }
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (realized_step_ratio(ctx, mid) > target_ratio ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace sctflow
