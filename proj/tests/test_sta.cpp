#include <doctest.h>

#include <random>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

// PI -> TINV -> DFF.D with the DFF clocked from a clock port.
PlacedDesign one_gate(double delay_ps) {
    return fx::Builder(fx::test_library(delay_ps))
        .port("a")
        .port("clk")
        .port("rn")
        .cell("u1", "TINV")
        .cell("ff", "DFFR_X1_SVT")
        .net("na", "a", "Y", {{"u1", "A"}})
        .net("n1", "u1", "Y", {{"ff", "D"}})
        .net("clk", "clk", "Y", {{"ff", "CK"}}, 1)
        .net("rn", "rn", "Y", {{"ff", "RN"}})
        .build();
}

TimingOptions at(double period, double margin) {
    TimingOptions o;
    o.clock_period_ps = period;
    o.margin_ps = margin;
    return o;
}

}  // namespace

TEST_SUITE("sta") {
    TEST_CASE("one inverter of 20 ps at 100 ps: slack 80 ps") {
        Netlist n = design_netlist(one_gate(20));
        TimingReport r = analyze_timing(n, at(100, 0));
        CHECK(r.slack_per_endpoint.at("ff/D") == doctest::Approx(80));
        CHECK(r.critical_delay == doctest::Approx(20));
        CHECK(r.critical_path == std::vector<std::string>{"a", "u1", "ff"});
    }

    TEST_CASE("slack identity and endpoint completeness on a preset") {
        const PlacedDesign& d = fx::design("PST_HFHD");
        Netlist n = design_netlist(d);
        TimingReport r = analyze_timing(n, at(d.clock_period_ps, 20));
        int expected = 0;
        for (size_t i = 0; i < n.instances.size(); ++i) {
            const auto& k = n.kind_of(static_cast<int>(i));
            if (k.is_sequential) expected += 1;  // D only; CK and RN are not timing pins
            if (k.is_port && k.output_pin.empty()) expected += 1;
        }
        CHECK(static_cast<int>(r.endpoints.size()) == expected);
        double max_arr = 0;
        for (const auto& e : r.endpoints) {
            CHECK(e.slack == doctest::Approx(e.period - 20 - e.arrival));
            max_arr = std::max(max_arr, e.arrival);
        }
        CHECK(r.critical_delay == doctest::Approx(max_arr));
    }

    TEST_CASE("period = critical delay + margin gives zero min slack") {
        Netlist n = design_netlist(fx::design("AES_LFLD"));
        TimingReport r0 = analyze_timing(n, at(1000, 20));
        TimingReport r = analyze_timing(n, at(r0.critical_delay + 20, 20));
        CHECK(r.min_slack() == doctest::Approx(0).epsilon(1e-9));
    }

    TEST_CASE("AES_HFHD at 1000 MHz meets timing with a 20 ps margin") {
        Netlist n = design_netlist(fx::design("AES_HFHD"));
        CHECK(analyze_timing(n, at(1000, 20)).min_slack() >= 0);
    }

    TEST_CASE("frequency estimate: reciprocal of critical delay plus margin") {
        Netlist n = design_netlist(one_gate(980));
        CHECK(estimate_frequency(n, 20) == doctest::Approx(1000));
        Netlist p = extract_netlist(fx::design("PST_HFLD"), ExtractMode::attacker);
        CHECK(estimate_frequency(p, 20) == doctest::Approx(950).epsilon(0.05));
    }

    TEST_CASE("estimated period is timing-clean to 1 ps") {
        for (const char* pr : {"AES_LFHD", "PST_HFHD"}) {
            Netlist n = extract_netlist(fx::design(pr), ExtractMode::attacker);
            double f = estimate_frequency(n, 20);
            CHECK(std::abs(analyze_timing(n, at(1e6 / f, 20)).min_slack()) <= 1.0);
        }
    }

    TEST_CASE("adding load never decreases the critical delay") {
        PlacedDesign d = fx::design("PST_LFHD");
        Netlist n = design_netlist(d);
        double base = analyze_timing(n, at(d.clock_period_ps, 0)).critical_delay;
        std::mt19937_64 rng(7);
        for (int t = 0; t < 50; ++t) {
            size_t i = rng() % n.nets.size();
            n.nets[i].extra_cap_ff += 5.0;
            double now = analyze_timing(n, at(d.clock_period_ps, 0)).critical_delay;
            CHECK(now >= base - 1e-9);
            base = now;
        }
    }

    TEST_CASE("combinational cycle names its instances") {
        PlacedDesign d = fx::Builder()
                             .cell("u1", "INV_X1_SVT")
                             .cell("u2", "INV_X1_SVT")
                             .net("n1", "u1", "Y", {{"u2", "A"}})
                             .net("n2", "u2", "Y", {{"u1", "A"}})
                             .build();
        try {
            analyze_timing(design_netlist(d), at(100, 0));
            FAIL("no cycle detected");
        } catch (const CombinationalCycle& e) {
            CHECK(e.cycle.size() == 2u);
        }
    }

    TEST_CASE("histogram covers all endpoints") {
        TimingReport one = analyze_timing(design_netlist(one_gate(20)), at(100, 0));
        Histogram h1 = slack_histogram(one, 10);
        CHECK(h1.total() == 1);
        CHECK(std::count_if(h1.counts.begin(), h1.counts.end(), [](long c) { return c > 0; }) == 1);
        const PlacedDesign& d = fx::design("AES_LFHD");
        TimingReport r = analyze_timing(design_netlist(d), at(d.clock_period_ps, 20));
        Histogram h = slack_histogram(r, 20);
        CHECK(h.total() == static_cast<long>(r.endpoints.size()));
        CHECK(h.lower.front() == doctest::Approx(r.min_slack()));
        CHECK(slack_histogram(TimingReport{}, 10).total() == 0);
        CHECK(h.to_csv("slack_ps").rfind("slack_ps,count\n", 0) == 0);
    }

    TEST_CASE("corner multiplier scales arrival linearly") {
        Netlist n = design_netlist(one_gate(20));
        TimingOptions o = at(100, 0);
        o.global_delay_mult = 1.5;
        CHECK(analyze_timing(n, o).critical_delay == doctest::Approx(30));
        ProcessSample slow = ProcessSample::corner(ProcessModel{}, -3), fast = ProcessSample::corner(ProcessModel{}, 3);
        CHECK(slow.global_delay > 1.0);
        CHECK(fast.global_delay < 1.0);
    }
}
