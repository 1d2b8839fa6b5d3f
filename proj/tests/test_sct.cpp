#include <doctest.h>

#include <random>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

RoDesign ring(std::array<int, 4> nd, int ni, const std::string& cls = "AES_LF") { return RoDesign{nd, ni, cls, "SVT"}; }

const CalibrationResult& calibration() {
    static const CalibrationResult r = calibrate_ro_constants(ro_table_anchors(), make_default_library());
    return r;
}

SctRequest request_for(const std::string& preset) {
    const PlacedDesign& d = fx::design(preset);
    AnalyzeReport a = analyze_design(d, preset_profile(preset).n_key);
    SctRequest q;
    q.target = a.power;
    q.target_freq_mhz = a.analysis_mhz;
    q.n_key = a.n_key;
    q.ro_class = ro_class_for(preset);
    return q;
}

int count_prefix(const Netlist& n, const std::string& prefix) {
    int c = 0;
    for (const auto& i : n.instances) c += i.id.rfind(prefix, 0) == 0;
    return c;
}

}  // namespace

TEST_SUITE("sct-design") {
    TEST_CASE("power budget arithmetic") {
        PowerReport aes;
        aes.static_uw = 75.8;
        aes.clock_tree_uw = 116.7;
        aes.dynamic_uw = 1500;
        CHECK(power_budget(aes, 0.10) == doctest::Approx(19.25));
        PowerReport five;
        five.static_uw = 5;
        five.clock_tree_uw = 5;
        CHECK(power_budget(five, 1.0) == doctest::Approx(10));
        PowerReport pst;
        pst.static_uw = 34.02;
        pst.clock_tree_uw = 325.30;
        CHECK(power_budget(pst, 0.10) == doctest::Approx(35.93).epsilon(1e-3));
        CHECK_THROWS_AS(power_budget(five, 0.0), ValidationError);
        CHECK_THROWS_AS(power_budget(five, 1.5), ValidationError);
    }

    TEST_CASE("active path follows the selector table") {
        RoDesign r = ring({3, 1, 2, 0}, 2);
        CHECK(active_delay_cells(r, 0, 0) == 3);
        CHECK(active_delay_cells(r, 1, 1) == 6);
        CHECK(active_delay_cells(r, 0, 1) == 5);
        CHECK(active_delay_cells(r, 1, 0) == 4);
    }

    TEST_CASE("selector table holds for random rings") {
        std::mt19937 rng(3);
        for (int t = 0; t < 2000; ++t) {
            std::array<int, 4> nd;
            for (auto& v : nd) v = static_cast<int>(rng() % 20);
            RoDesign r = ring(nd, 2);
            CHECK(active_delay_cells(r, 0, 0) == nd[0]);
            CHECK(active_delay_cells(r, 1, 0) == nd[0] + nd[1]);
            CHECK(active_delay_cells(r, 0, 1) == nd[0] + nd[2]);
            CHECK(active_delay_cells(r, 1, 1) == nd[0] + nd[1] + nd[2] + nd[3]);
        }
    }

    TEST_CASE("period arithmetic with unit delays") {
        CellLibrary lib = make_default_library();
        RoConstants unit;
        unit.tau_dcell = unit.tau_invcell = unit.tau_nand = unit.tau_and = unit.tau_or = 1;
        lib.ro_classes["UNIT"] = unit;
        RoDesign r = ring({1, 0, 0, 0}, 1, "UNIT");
        CHECK(ro_period_ps(lib, r, 0, 0) == doctest::Approx(13));
        RoProcess twice;
        twice.delay_mult = 2;
        CHECK(ro_period_ps(lib, r, 0, 0, twice) == doctest::Approx(26));
        lib.ro_classes["UNIT"].tau_dcell = 500 - 12;
        CHECK(ro_frequency_mhz(lib, r, 0, 0) == doctest::Approx(1000));
    }

    TEST_CASE("switching frequency is exactly twice the oscillation frequency") {
        const CellLibrary& lib = *default_library();
        for (const char* cls : {"AES_LF", "AES_HF", "PST_LF", "PST_HF"})
            for (int v = 0; v < 4; ++v) {
                RoDesign r = ring({2, 3, 5, 1}, 6, cls);
                CHECK(ro_switching_frequency_mhz(lib, r, v & 1, v >> 1) == 2.0 * ro_frequency_mhz(lib, r, v & 1, v >> 1));
            }
    }

    TEST_CASE("one more active delay cell strictly lowers the frequency") {
        const CellLibrary& lib = *default_library();
        std::mt19937 rng(5);
        for (const char* cls : {"AES_LF", "AES_HF", "PST_LF", "PST_HF"})
            for (int t = 0; t < 300; ++t) {
                std::array<int, 4> nd;
                for (auto& v : nd) v = static_cast<int>(rng() % 10);
                RoDesign r = ring(nd, 2 * static_cast<int>(rng() % 8 + 1), cls);
                int s0 = static_cast<int>(rng() % 2), s1 = static_cast<int>(rng() % 2);
                RoDesign more = r;
                ++more.n_d[0];  // branch 1 is on every path
                CHECK(ro_frequency_mhz(lib, more, s0, s1) < ro_frequency_mhz(lib, r, s0, s1));
                if (s0) {
                    RoDesign b2 = r;
                    ++b2.n_d[1];
                    CHECK(ro_frequency_mhz(lib, b2, s0, s1) < ro_frequency_mhz(lib, r, s0, s1));
                }
            }
    }

    TEST_CASE("huge ring: power tends to ring leakage") {
        const CellLibrary& lib = *default_library();
        RoDesign r = ring({1, 1, 1, 1}, 2, "PST_LF");
        RoProcess slow;
        slow.delay_mult = 1e9;
        CHECK(ro_power_uw(lib, r, 0, 0, slow) == doctest::Approx(ro_leakage_uw(lib, r)).epsilon(1e-6));
    }

    TEST_CASE("calibration reproduces all 16 anchors within 10 percent") {
        const CalibrationResult& c = calibration();
        CHECK(c.rows.size() == 16u);
        CHECK(c.ok());
        for (const auto& row : c.rows) {
            CHECK(std::abs(row.power_err) <= 0.10);
            CHECK(std::abs(row.freq_err) <= 0.10);
        }
    }

    TEST_CASE("frozen library constants equal a fresh calibration") {
        const CalibrationResult& c = calibration();
        const CellLibrary& lib = *default_library();
        for (const auto& [cls, k] : c.classes) {
            const RoConstants& f = lib.ro(cls);
            CHECK(f.tau_dcell == doctest::Approx(k.tau_dcell).epsilon(1e-9));
            CHECK(f.tau_invcell == doctest::Approx(k.tau_invcell).epsilon(1e-9));
            CHECK(f.e_dcell == doctest::Approx(k.e_dcell).epsilon(1e-9));
            CHECK(f.e_stage == doctest::Approx(k.e_stage).epsilon(1e-9));
            CHECK(f.flavor == k.flavor);
        }
    }

    TEST_CASE("calibrated rings hit their operating points") {
        const CalibrationResult& c = calibration();
        const CellLibrary& lib = *default_library();
        const RoDesign& aes_lf = c.rings.at("AES_LF/RO_D6I10");
        CHECK(ro_period_ps(lib, aes_lf, 0, 0) == doctest::Approx(1e6 / (2 * 65.0)).epsilon(0.10));
        const RoDesign& pst_lf = c.rings.at("PST_LF/RO_D6I4");
        CHECK(ro_frequency_mhz(lib, pst_lf, 1, 1) == doctest::Approx(20).epsilon(0.10));
        const RoDesign& aes_hf = c.rings.at("AES_HF/RO_D10I10");
        CHECK(ro_power_uw(lib, aes_hf, 0, 0) == doctest::Approx(198).epsilon(0.10));
        for (const auto& [name, r] : c.rings) {
            double prev = 1e300;
            for (int v = 0; v < 4; ++v) {
                double f = ro_frequency_mhz(lib, r, v & 1, v >> 1);
                CHECK_MESSAGE(f < prev, name);
                prev = f;
            }
        }
    }

    TEST_CASE("calibration recovers known constants from synthetic anchors") {
        CellLibrary truth = make_default_library();
        for (auto& [cls, k] : truth.ro_classes) {
            k.tau_dcell *= 1.3;
            k.e_stage *= 0.8;
        }
        const CalibrationResult& base = calibration();
        std::vector<RoAnchor> synth;
        for (const auto& row : base.rows) {
            RoAnchor a = row.anchor;
            const RoDesign& r = base.rings.at(a.ro_class + "/" + a.ro_name);
            a.power_uw = ro_symbol_power_uw(truth, r, a.symbol);
            a.freq_mhz = ro_frequency_mhz(truth, r, a.symbol & 1, a.symbol >> 1);
            synth.push_back(a);
        }
        CalibrationResult fit = calibrate_ro_constants(synth, make_default_library());
        CHECK(fit.max_residual < 0.01);
        for (const auto& [cls, k] : fit.classes) {
            CHECK(k.tau_dcell == doctest::Approx(truth.ro(cls).tau_dcell).epsilon(0.01));
            CHECK(k.e_stage == doctest::Approx(truth.ro(cls).e_stage).epsilon(0.01));
        }
    }

    TEST_CASE("one anchor row is an underdetermined fit") {
        std::vector<RoAnchor> one = {ro_table_anchors().front()};
        CHECK_THROWS_AS(calibrate_ro_constants(one, make_default_library()), InfeasibleError);
    }

    TEST_CASE("design_sct re-evaluates within its own constraints") {
        for (const auto& p : preset_names()) {
            if (ro_class_for(p) == "PST_LF") continue;
            SctRequest q = request_for(p);
            SctConfig cfg = design_sct(*default_library(), q);
            const CellLibrary& lib = *default_library();
            INFO(p);
            const double budget = power_budget(q.target, q.fraction);
            double prev_f = 1e300;
            for (int v = 0; v < 4; ++v) {
                double pw = ro_symbol_power_uw(lib, cfg.ro, v);
                CHECK(pw == doctest::Approx(cfg.symbol_power_uw[static_cast<size_t>(v)]));
                CHECK(pw <= budget);
                if (v > 0) CHECK(ro_symbol_power_uw(lib, cfg.ro, v - 1) - pw >= q.step_separation_ua * lib.vdd - 1e-9);
                double f = ro_frequency_mhz(lib, cfg.ro, v & 1, v >> 1);
                CHECK(f < prev_f);
                prev_f = f;
            }
            CHECK_FALSE(cfg.power_violation);
        }
    }

    TEST_CASE("AES_LFHD at 10 percent: top step within 19.25 uW and 2 uA steps") {
        SctConfig cfg = design_sct(*default_library(), request_for("AES_LFHD"));
        CHECK(cfg.symbol_power_uw[0] <= 19.25 * 1.05);
        for (int v = 1; v < 4; ++v)
            CHECK(cfg.symbol_power_uw[static_cast<size_t>(v - 1)] - cfg.symbol_power_uw[static_cast<size_t>(v)] >= 2.0);
    }

    TEST_CASE("divider: /8 for AES_HF, /16 for PST_HF, and minimal") {
        SctConfig aes = design_sct(*default_library(), request_for("AES_HFHD"));
        SctConfig pst = design_sct(*default_library(), request_for("PST_HFHD"));
        CHECK(aes.divider_ratio == 8);
        CHECK(pst.divider_ratio == 16);
        for (SctConfig c : {aes, pst}) {
            CHECK(minimal_divider(c, default_library()) == c.divider_ratio);
            auto slack_at = [&](int ratio) {
                c.divider_ratio = ratio;
                TimingOptions o;
                o.clock_period_ps = 1e6 / c.target_freq_mhz;
                o.margin_ps = 20;
                o.default_endpoint_ratio = ratio;
                return analyze_timing(build_sct_netlist(c, default_library()), o).min_slack();
            };
            const int ratio = c.divider_ratio;
            CHECK(slack_at(ratio) >= 0);
            CHECK(slack_at(ratio / 2) < 0);
        }
    }

    TEST_CASE("PST_LF is power-infeasible and names the constraint") {
        SctRequest q = request_for("PST_LFHD");
        try {
            design_sct(*default_library(), q);
            FAIL("expected infeasible");
        } catch (const InfeasibleError& e) {
            CHECK(e.constraint == "power");
            CHECK(std::string(e.what()).find("the power constraint is violated") != std::string::npos);
        }
        q.enforce_power = false;
        SctConfig c = design_sct(*default_library(), q);
        CHECK(c.power_violation);
    }

    TEST_CASE("fragment: divider flip-flops, key ports and step counter") {
        SctConfig c;
        c.ro = ring({2, 1, 3, 2}, 4);
        c.n_key = 80;
        c.n_leak = 2;
        c.target_freq_mhz = 100;
        c.divider_ratio = 1;
        Netlist n1 = build_sct_netlist(c, default_library());
        CHECK(count_prefix(n1, "sct/dv_ff") == 0);
        c.divider_ratio = 16;
        Netlist n16 = build_sct_netlist(c, default_library());
        CHECK(count_prefix(n16, "sct/dv_ff") == 4);
        CHECK(c.steps() == 40);
        CHECK(c.chain_bits() == 80);
        CHECK(count_prefix(n16, "sct/port/key_") == 80);
        CHECK(count_prefix(n16, "sct/tc_cnt") - count_prefix(n16, "sct/tc_cnt_n") == 6);  // ceil(log2 40)
        CHECK(fragment_area_um2(n16) > fragment_area_um2(n1));
        CHECK(fragment_cell_count(n16) == fragment_cell_count(n1) + 4 + count_prefix(n16, "sct/dv_inv"));
    }

    TEST_CASE("ring names round-trip and reject bad input") {
        CHECK(parse_ro_name("RO_D12I14") == std::pair<int, int>{12, 14});
        CHECK_THROWS_AS(parse_ro_name("RO12"), ValidationError);
        CHECK_THROWS_AS(ring({0, 1, 1, 1}, 0).validate(), ValidationError);
        CHECK_THROWS_AS(ring({1, 1, 1, 1}, 3).validate(), ValidationError);
        SctConfig c;
        c.ro = ring({1, 1, 2, 2}, 4);
        c.n_key = 81;
        CHECK_THROWS_AS(c.validate(), ValidationError);
    }
}
