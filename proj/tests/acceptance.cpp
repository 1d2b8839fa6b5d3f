// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "sctflow/attack.hpp"
#include "sctflow/pipeline.hpp"

using namespace sctflow;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void report(int id, const char* title, const std::function<void(Outcome&)>& body) {
    Outcome o;
    auto t0 = Clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::printf("%s %d %s (%.1f s):%s\n", o.pass ? "PASS" : "FAIL", id, title, since(t0), o.detail.str().c_str());
    std::fflush(stdout);
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::map<std::string, PresetRun>& runs() {
    static std::map<std::string, PresetRun> r;
    if (r.empty())
        for (const auto& p : preset_names()) r.emplace(p, run_preset(p));
    return r;
}

}  // namespace

int main() {
    report(1, "RO calibration reproduces the 16 anchors within 10 %", [](Outcome& o) {
        auto t0 = Clock::now();
        CalibrationResult c = calibrate_ro_constants(ro_table_anchors(), make_default_library());
        const double secs = since(t0);
        o.detail << " rows=" << c.rows.size() << " max_residual=" << c.max_residual << " runtime=" << secs << "s";
        o.require(c.rows.size() == 16, "16 anchors");
        for (const auto& r : c.rows) {
            const bool ok = std::abs(r.power_err) <= 0.10 && std::abs(r.freq_err) <= 0.10;
            if (!ok)
                o.detail << " " << r.anchor.ro_class << "/" << r.anchor.ro_name << " S=" << r.anchor.symbol << " err "
                         << r.power_err << "/" << r.freq_err;
            o.require(ok, "anchor within 10 %");
        }
        o.require(secs < 60, "runtime < 1 min");
    });

    report(2, "test-chip RO adjustment matches the adjusted rows within 15 %", [](Outcome& o) {
        auto t0 = Clock::now();
        std::vector<TestchipRow> rows = testchip_adjustment();
        const double secs = since(t0);
        int ok = 0;
        for (const auto& r : rows) {
            const bool good = r.error.empty() && std::abs(r.power_err) <= 0.15 && std::abs(r.freq_err) <= 0.15;
            ok += good;
            if (!good) {
                o.detail << " " << r.preset << " S=" << r.symbol << " designed " << r.ro_name << " (" << r.power_uw << "uW@"
                         << r.freq_mhz << "MHz) vs " << r.expected_ro << " (" << r.expected_power_uw << "uW@"
                         << r.expected_freq_mhz << "MHz)";
                if (!r.error.empty()) o.detail << " error: " << r.error;
            }
        }
        o.detail << " rows_within=" << ok << "/" << rows.size() << " runtime=" << secs << "s";
        o.require(!rows.empty() && ok == static_cast<int>(rows.size()), "all rows within 15 %");
        o.require(secs < 60, "runtime < 1 min");
    });

    report(3, "budget rule on all presets at fraction 0.10, area-cap infeasibility path", [](Outcome& o) {
        for (const auto& p : preset_names()) {
            PlacedDesign d = generate_target(preset_profile(p), 1);
            AnalyzeReport a = analyze_design(d, preset_profile(p).n_key);
            SctRequest q;
            q.target = a.power;
            q.target_freq_mhz = a.analysis_mhz;
            q.n_key = a.n_key;
            q.ro_class = ro_class_for(p);
            const double budget = power_budget(a.power, 0.10);
            try {
                SctConfig c = design_sct(*default_library(), q);
                const double top = *std::max_element(c.symbol_power_uw.begin(), c.symbol_power_uw.end());
                o.detail << " " << p << ":" << c.ro.name() << " " << top << "<=" << budget;
                o.require(top <= budget, p + " max step within budget");
            } catch (const InfeasibleError& e) {
                o.detail << " " << p << ": infeasible (" << e.constraint << ", budget " << budget << ")";
                o.require(false, p + " has no ring within the budget");
            }
            if (ro_class_for(p) == "PST_LF") {
                q.area_cap_um2 = 0.10 * d.row_area();
                try {
                    design_sct(*default_library(), q);
                    o.require(false, p + " infeasibility path with 10 % area cap");
                } catch (const InfeasibleError& e) {
                    o.detail << " " << p << "@10%area: infeasible (" << e.constraint << ")";
                }
            }
        }
    });

    report(4, "ECO keeps victim cells, signs off at 20 ps, post density within 2 points", [](Outcome& o) {
        for (auto& [p, r] : runs()) {
            int moved = 0;
            for (const auto& g : r.design.instances) {
                if (r.design.kind_of(g).is_filler) continue;
                int i = r.trojaned.inst_index(g.id);
                if (i < 0 || !(r.trojaned.instances[static_cast<size_t>(i)] == g)) ++moved;
            }
            SignoffReport s = signoff(r.trojaned, 20);
            const double post = 100 * r.trojaned.density(), want = preset_post_eco(p).density;
            o.detail << " " << p << ":" << 100 * r.design.density() << "->" << post << "(" << want << ")";
            o.require(moved == 0, p + " victim instances unchanged");
            o.require(s.ok, p + " signoff");
            o.require(std::abs(post - want) <= 2.0, p + " density within 2 points");
        }
    });

    report(5, "PST_HFHD routes more added wire on M5-M7 than on M2-M4", [](Outcome& o) {
        const PresetRun& r = runs().at("PST_HFHD");
        RouteReport rep = route_estimate(r.design, r.trojaned, r.patch);
        o.detail << " upper=" << rep.upper_fraction() << " lower=" << rep.lower_fraction();
        o.require(rep.upper_fraction() > rep.lower_fraction(), "upper > lower");
    });

    report(6, "Monte Carlo static power on PST_HFLD", [](Outcome& o) {
        PlacedDesign d = generate_target(preset_profile("PST_HFLD"), 1);
        auto t0 = Clock::now();
        McSummary s = monte_carlo_static(d, 10000, 1, ProcessModel{}, 50, threads());
        const double secs = since(t0);
        const double rel = s.mean / s.nominal - 1;
        o.detail << " instances=" << d.instances.size() << " nominal=" << s.nominal << " mean=" << s.mean << " rel=" << rel
                 << " skew=" << s.skewness << " runtime=" << secs << "s";
        o.require(s.samples.size() == 10000, "10000 samples");
        o.require(std::abs(rel) <= 0.02, "mean within 2 %");
        o.require(s.skewness > 0, "positive skew");
        o.require(secs < 120, "runtime < 2 min");
    });

    report(7, "campaign 25 dies x 3 repeats on four presets", [](Outcome& o) {
        auto t0 = Clock::now();
        for (const char* p : {"AES_LFHD", "AES_HFHD", "PST_LFHD", "PST_HFHD"}) {
            const PresetRun& r = runs().at(p);
            CampaignOptions opt;
            opt.threads = threads();
            CampaignReport c = campaign(r.trojaned, opt);
            o.detail << " " << p << ": success=" << c.success_rate << " overlap=" << c.stats.overlap
                     << " near=" << c.stats.near_overlap << " min_gap=" << c.stats.min_gap_ua;
            o.require(c.runs.size() == 75, std::string(p) + " 75 runs");
            o.require(c.success_rate == 1.0, std::string(p) + " 100 % success");
            if (std::string(p) == "PST_LFHD") o.require(!c.stats.overlap, "PST_LFHD zero overlap");
            if (std::string(p) == "AES_HFHD") o.require(c.stats.near_overlap, "AES_HFHD near-overlap flagged");
        }
        const double secs = since(t0);
        o.detail << " runtime=" << secs << "s";
        o.require(secs < 600, "runtime < 10 min");
    });

    report(8, "property suites", [](Outcome& o) {
        // decode(simulate(key)) at sigma = 0
        int round_trip_fail = 0;
        for (auto& [p, r] : runs()) {
            SimContext ctx = SimContext::make(r.trojaned);
            TraceConfig cfg;
            cfg.noise_sigma_ua = 0;
            DecodeOptions dopt;
            dopt.n_key = r.sct.n_key;
            dopt.n_leak = r.sct.n_leak;
            for (std::uint64_t s = 0; s < 100; ++s) {
                std::vector<int> key = random_key(r.sct.n_key, 500 + s);
                ProcessSample die = draw_process(ProcessModel{}, r.trojaned.core_width_um(), r.trojaned.core_height_um(), 3, s);
                PowerTrace t = simulate_trace(ctx, key, die, cfg, s);
                try {
                    round_trip_fail += !decode_trace(t.attacker_view(), dopt, &key).success;
                } catch (const AmbiguityError&) {
                    ++round_trip_fail;
                }
            }
        }
        o.detail << " round_trip_failures=" << round_trip_fail << "/800";
        o.require(round_trip_fail == 0, "round trip");

        // selector table, exhaustive over small rings
        int table_bad = 0;
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int c = 0; c < 6; ++c)
                    for (int d = 0; d < 6; ++d) {
                        RoDesign r{{a, b, c, d}, 2, "AES_LF", "SVT"};
                        table_bad += active_delay_cells(r, 0, 0) != a || active_delay_cells(r, 1, 0) != a + b ||
                                     active_delay_cells(r, 0, 1) != a + c || active_delay_cells(r, 1, 1) != a + b + c + d;
                    }
        o.require(table_bad == 0, "selector table");

        // one more active delay cell lowers the frequency
        const CellLibrary& lib = *default_library();
        std::mt19937 rng(11);
        int mono_bad = 0;
        for (const char* cls : {"AES_LF", "AES_HF", "PST_LF", "PST_HF"})
            for (int t = 0; t < 500; ++t) {
                RoDesign r{{1 + static_cast<int>(rng() % 9), static_cast<int>(rng() % 9), static_cast<int>(rng() % 9),
                            static_cast<int>(rng() % 9)},
                           2 * (1 + static_cast<int>(rng() % 8)), cls, "SVT"};
                int s0 = static_cast<int>(rng() % 2), s1 = static_cast<int>(rng() % 2);
                RoDesign more = r;
                ++more.n_d[0];
                mono_bad += !(ro_frequency_mhz(lib, more, s0, s1) < ro_frequency_mhz(lib, r, s0, s1));
            }
        o.require(mono_bad == 0, "frequency monotonicity");

        // total = static + dynamic + clock tree
        int eq_bad = 0;
        for (auto& [p, r] : runs()) {
            PowerReport pr = power_report(r.design, preset_profile(p).frequency_mhz);
            eq_bad += pr.total() != pr.static_uw + pr.dynamic_uw + pr.clock_tree_uw;
        }
        o.require(eq_bad == 0, "power sum identity");

        int revert_bad = 0;
        for (auto& [p, r] : runs()) revert_bad += revert_eco(r.trojaned, r.patch).serialize() != r.design.serialize();
        o.require(revert_bad == 0, "patch reversibility");

        std::vector<double> ber;
        for (double sigma : {0.5, 8.0, 50.0}) {
            CampaignOptions opt;
            opt.n_dies = 6;
            opt.repeats = 2;
            opt.trace.noise_sigma_ua = sigma;
            opt.threads = threads();
            ber.push_back(campaign(runs().at("PST_HFHD").trojaned, opt).ber);
        }
        o.detail << " ber(0.5,8,50)=" << ber[0] << "," << ber[1] << "," << ber[2];
        o.require(ber[0] <= ber[1] && ber[1] <= ber[2], "BER monotonic in sigma");
    });

    return failures ? 1 : 0;
}
