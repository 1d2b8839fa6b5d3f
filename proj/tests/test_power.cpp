#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

ProcessModel flat() {
    ProcessModel m;
    m.sigma_global_leak = m.sigma_global_delay = m.sigma_local_leak = m.sigma_local_delay = m.sigma_wire = 0;
    return m;
}

double cv(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / mean;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("power") {
    TEST_CASE("static power of one cell") {
        PlacedDesign d = fx::Builder().cell("u1", "INV_X1_SVT").build();
        CHECK(static_power(d) == doctest::Approx(d.library->kind("INV_X1_SVT").leakage));
    }

    TEST_CASE("PST_HFLD nominal leakage 34.02 uW") {
        CHECK(static_power(fx::design("PST_HFLD")) == doctest::Approx(34.02).epsilon(0.05));
    }

    TEST_CASE("static power is linear in the global leakage multiplier") {
        const PlacedDesign& d = fx::design("AES_LFHD");
        ProcessSample p = draw_process(ProcessModel{}, d.core_width_um(), d.core_height_um(), 5, 0);
        p.global_leak = 1.0;
        const double base = static_power(d, p);
        for (double m : {0.5, 1.0, 1.5, 2.0}) {
            p.global_leak = m;
            CHECK(static_power(d, p) == doctest::Approx(m * base).epsilon(1e-12));
        }
    }

    TEST_CASE("dynamic power: zero activity and hand arithmetic") {
        PlacedDesign d = fx::Builder().port("a").port("y", "PO").net("n", "a", "Y", {{"y", "A"}}).build();
        CHECK(dynamic_power(d, {0.0}) == 0.0);
        d.nets[0].extra_cap_ff = 10.0 - net_load_ff(d, d.nets[0]);
        REQUIRE(net_load_ff(d, d.nets[0]) == doctest::Approx(10.0));
        REQUIRE(d.kind_of(d.nets[0].driver.inst).toggle_energy_fj == 0.0);
        CHECK(dynamic_power(d, {1e6}) == doctest::Approx(0.005));
    }

    TEST_CASE("AES_LFLD total power at 100 MHz within 10 percent of 1670 uW") {
        PowerReport r = power_report(fx::design("AES_LFLD"), 100);
        CHECK(r.total() == doctest::Approx(1670).epsilon(0.10));
    }

    TEST_CASE("power reports satisfy total = static + dynamic + clock tree exactly") {
        for (const auto& p : preset_names()) {
            PowerReport r = power_report(fx::design(p), preset_profile(p).frequency_mhz);
            CHECK(r.total() == r.static_uw + r.dynamic_uw + r.clock_tree_uw);
            PowerReport back = PowerReport::from_json(r.to_json());
            CHECK(back.total() == doctest::Approx(back.static_uw + back.dynamic_uw + back.clock_tree_uw));
        }
    }

    TEST_CASE("clock tree: zero at 0 MHz, AES_LFHD 116.7 uW at 100 MHz, linear in frequency") {
        const PlacedDesign& d = fx::design("AES_LFHD");
        CHECK(clock_tree_power(d, 0) == 0.0);
        const double p100 = clock_tree_power(d, 100);
        CHECK(p100 == doctest::Approx(116.7).epsilon(0.05));
        CHECK(clock_tree_power(d, 1000) == doctest::Approx(10 * p100).epsilon(0.01));
    }

    TEST_CASE("Monte Carlo: point mass without variation") {
        const PlacedDesign& d = fx::design("PST_HFLD");
        McSummary s = monte_carlo_static(d, 1, 3, flat());
        CHECK(s.samples.size() == 1u);
        CHECK(s.samples[0] == doctest::Approx(static_power(d)));
        McSummary s8 = monte_carlo_static(d, 8, 3, flat(), 5);
        for (double v : s8.samples) CHECK(v == doctest::Approx(s8.nominal));
        CHECK(s8.variance == doctest::Approx(0).epsilon(1e-9));
    }

    TEST_CASE("Monte Carlo: same seed, same samples, any thread count") {
        const PlacedDesign& d = fx::design("PST_LFHD");
        McSummary a = monte_carlo_static(d, 500, 11, ProcessModel{}, 20, 1);
        McSummary b = monte_carlo_static(d, 500, 11, ProcessModel{}, 20, 4);
        CHECK(a.samples == b.samples);
        CHECK(a.mean == b.mean);
        McSummary c = monte_carlo_static(d, 500, 12, ProcessModel{}, 20, 1);
        CHECK(a.samples != c.samples);
        CHECK(a.histogram.total() == 500);
    }

    TEST_CASE("Monte Carlo on PST_HFLD: mean within 2 percent, right skew") {
        McSummary s = monte_carlo_static(fx::design("PST_HFLD"), 10000, 1, ProcessModel{}, 50, 4);
        CHECK(s.mean == doctest::Approx(s.nominal).epsilon(0.02));
        CHECK(s.mean == doctest::Approx(34.02).epsilon(0.05));
        CHECK(s.skewness > 0);
        CHECK(s.samples_csv().rfind("sample,power_uW\n", 0) == 0);
    }

    TEST_CASE("local multipliers decorrelate with distance") {
        const double w = 400, h = 400;
        ProcessModel m;
        const std::vector<double> dists = {5, 40, 150};
        std::vector<double> corr;
        for (double dd : dists) {
            std::vector<double> a, b;
            for (std::uint64_t i = 0; i < 1500; ++i) {
                ProcessSample p = draw_process(m, w, h, 21, i);
                a.push_back(std::log(p.local_leak(100, 200)));
                b.push_back(std::log(p.local_leak(100 + dd, 200)));
            }
            corr.push_back(pearson(a, b));
        }
        CHECK(corr[0] > corr[1]);
        CHECK(corr[1] > corr[2]);
    }

    TEST_CASE("co-located trojan leakage tracks the target's") {
        const PresetRun& r = fx::run("PST_LFHD");
        const PlacedDesign& t = r.trojaned;
        std::vector<double> sct, victim, ratio;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            ProcessSample p = draw_process(ProcessModel{}, t.core_width_um(), t.core_height_um(), 4, i);
            auto mult = instance_leak_mults(t, p);
            double s = 0, v = 0;
            for (size_t k = 0; k < t.instances.size(); ++k) {
                double l = t.kind_of(t.instances[k]).leakage * mult[k];
                (t.instances[k].id.rfind("sct/", 0) == 0 ? s : v) += l;
            }
            sct.push_back(s);
            victim.push_back(v);
            ratio.push_back(s / v);
        }
        CHECK(cv(ratio) < cv(sct));
        CHECK(cv(ratio) < cv(victim));
    }

    TEST_CASE("leakage variance orders AES_HFHD > AES_LFHD > PST_HFHD > PST_LFHD") {
        std::vector<double> var;
        for (const char* p : {"AES_HFHD", "AES_LFHD", "PST_HFHD", "PST_LFHD"})
            var.push_back(monte_carlo_static(fx::design(p), 2000, 2, ProcessModel{}, 20, 4).variance);
        CHECK(var[0] > var[1]);
        CHECK(var[1] > var[2]);
        CHECK(var[2] > var[3]);
    }

    TEST_CASE("process sample is reproducible from its seed") {
        ProcessSample a = draw_process(ProcessModel{}, 100, 80, 9, 3), b = draw_process(ProcessModel{}, 100, 80, 9, 3);
        CHECK(a.z == b.z);
        CHECK(a.global_leak == b.global_leak);
        for (double x : {1.0, 50.0, 99.0}) CHECK(a.local_delay(x, 10) > 0);
    }
}
