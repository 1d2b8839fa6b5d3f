#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

TraceConfig clean() {
    TraceConfig c;
    c.noise_sigma_ua = 0;
    c.quantization_ua = 0;
    return c;
}

ProcessModel flat() {
    ProcessModel m;
    m.sigma_global_leak = m.sigma_global_delay = m.sigma_local_leak = m.sigma_local_delay = m.sigma_wire = 0;
    return m;
}

std::vector<int> descending_pattern(int n_key) {
    // 11 10 01 00 repeated: lowest current first
    std::vector<int> k;
    for (int i = 0; i < n_key / 8; ++i)
        for (int b : {1, 1, 1, 0, 0, 1, 0, 0}) k.push_back(b);
    return k;
}

}  // namespace

TEST_SUITE("sim") {
    TEST_CASE("one step per symbol, each one step long") {
        for (const char* p : {"AES_LFHD", "PST_HFHD"}) {
            const PresetRun& r = fx::run(p);
            TraceConfig c = clean();
            PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 4), ProcessSample::nominal(), c, 1);
            REQUIRE(t.annotations);
            const auto& a = *t.annotations;
            CHECK(static_cast<int>(a.steps.size()) == r.sct.n_key / r.sct.n_leak);
            for (size_t k = 0; k < a.steps.size(); ++k) {
                CHECK(a.steps[k].second - a.steps[k].first == c.samples_per_step());
                if (k) CHECK(a.steps[k].first == a.steps[k - 1].second);
            }
        }
    }

    TEST_CASE("key 11-10-01-00 gives increasing current steps") {
        const PresetRun& r = fx::run("PST_LFHD");
        PowerTrace t = simulate_trace(r.trojaned, descending_pattern(r.sct.n_key), ProcessSample::nominal(), clean(), 1);
        const auto& a = *t.annotations;
        for (size_t k = 0; k + 1 < a.step_ua.size(); ++k)
            if (k % 4 != 3) CHECK(a.step_ua[k + 1] > a.step_ua[k]);
    }

    TEST_CASE("noiseless steps sit on the baseline by the ring switching current") {
        const PresetRun& r = fx::run("AES_HFHD");
        SimContext ctx = SimContext::make(r.trojaned);
        TraceConfig c = clean();
        DieState die = ctx.die(ProcessSample::nominal(), c);
        PowerTrace t = simulate_trace(ctx, random_key(r.sct.n_key, 9), ProcessSample::nominal(), c, 1);
        const auto& a = *t.annotations;
        for (size_t k = 0; k < a.steps.size(); ++k) {
            const double want = die.ro_step_uw[static_cast<size_t>(a.symbols[k])] / t.vdd;
            CHECK(a.step_ua[k] == doctest::Approx(want));
            for (long i = a.steps[k].first; i < a.steps[k].second; ++i)
                CHECK(t.samples[static_cast<size_t>(i)] == doctest::Approx(a.baseline_ua + want));
        }
        for (int v = 1; v < 4; ++v) CHECK(die.ro_step_uw[static_cast<size_t>(v)] < die.ro_step_uw[static_cast<size_t>(v - 1)]);
    }

    TEST_CASE("without an encryption the trace is flat") {
        const PresetRun& r = fx::run("PST_HFLD");
        TraceConfig c = clean();
        c.encryptions.clear();
        PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 1), ProcessSample::nominal(), c, 1);
        for (double s : t.samples) CHECK(s == t.samples.front());
        CHECK(t.annotations->steps.empty());
    }

    TEST_CASE("the ring is silent while the core encrypts") {
        const PresetRun& r = fx::run("AES_LFHD");
        TraceConfig c = clean();
        PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 2), ProcessSample::nominal(), c, 1);
        const auto& [start, dur] = c.encryptions.front();
        const long b = std::lround(start * c.sample_rate_hz), e = std::lround((start + dur) * c.sample_rate_hz);
        for (long i = b; i < e; ++i) CHECK(t.samples[static_cast<size_t>(i)] == t.samples[static_cast<size_t>(b)]);
        CHECK(t.annotations->steps.front().first >= e);
        c.encryptions.push_back({t.annotations->trigger_s + 0.01, 1e-3});
        CHECK_THROWS_AS(simulate_trace(r.trojaned, random_key(r.sct.n_key, 2), ProcessSample::nominal(), c, 1),
                        ValidationError);
    }

    TEST_CASE("distinct keys give distinct noiseless traces") {
        const PresetRun& r = fx::run("PST_LFHD");
        SimContext ctx = SimContext::make(r.trojaned);
        for (std::uint64_t s = 1; s <= 30; ++s) {
            std::vector<int> k1 = random_key(r.sct.n_key, s), k2 = k1;
            k2[s % k2.size()] ^= 1;
            PowerTrace a = simulate_trace(ctx, k1, ProcessSample::nominal(), clean(), 1);
            PowerTrace b = simulate_trace(ctx, k2, ProcessSample::nominal(), clean(), 1);
            CHECK(a.samples != b.samples);
        }
    }

    TEST_CASE("wrong key length is rejected") {
        const PresetRun& r = fx::run("PST_LFHD");
        CHECK_THROWS_AS(simulate_trace(r.trojaned, std::vector<int>(7, 0), ProcessSample::nominal(), clean(), 1),
                        ValidationError);
        CHECK_THROWS_AS(simulate_trace(r.design, random_key(80, 1), ProcessSample::nominal(), clean(), 1), ValidationError);
    }

    TEST_CASE("CSV round trip keeps samples to 1e-6") {
        const PresetRun& r = fx::run("PST_LFHD");
        PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 3), ProcessSample::nominal(), TraceConfig{}, 5);
        PowerTrace back = PowerTrace::from_csv(t.to_csv());
        REQUIRE(back.samples.size() == t.samples.size());
        CHECK(back.dt == doctest::Approx(t.dt));
        CHECK(back.config_hash == t.config_hash);
        CHECK_FALSE(back.annotations);
        for (size_t i = 0; i < t.samples.size(); ++i) CHECK(std::abs(back.samples[i] - t.samples[i]) <= 1e-6);
        CHECK(t.to_csv().find("t_s,current_uA\n") != std::string::npos);
        CHECK_FALSE(t.attacker_view().annotations);
    }

    TEST_CASE("noise is reproducible from its seed") {
        const PresetRun& r = fx::run("PST_HFHD");
        std::vector<int> k = random_key(r.sct.n_key, 3);
        PowerTrace a = simulate_trace(r.trojaned, k, ProcessSample::nominal(), TraceConfig{}, 5);
        PowerTrace b = simulate_trace(r.trojaned, k, ProcessSample::nominal(), TraceConfig{}, 5);
        PowerTrace c = simulate_trace(r.trojaned, k, ProcessSample::nominal(), TraceConfig{}, 6);
        CHECK(a.samples == b.samples);
        CHECK(a.samples != c.samples);
    }

    TEST_CASE("one die without variation has zero-width intervals") {
        const PresetRun& r = fx::run("AES_HFHD");
        BatchResult b = batch_simulate(r.trojaned, descending_pattern(r.sct.n_key), 1, 1, clean(), flat());
        REQUIRE(b.stats.symbols.size() == 4u);
        for (const auto& s : b.stats.symbols) {
            CHECK(s.hi - s.lo == doctest::Approx(0));
            CHECK(s.n == 1);
        }
        CHECK_FALSE(b.stats.overlap);
    }

    TEST_CASE("batch is identical across thread counts") {
        const PresetRun& r = fx::run("PST_LFHD");
        std::vector<int> k = random_key(r.sct.n_key, 8);
        BatchResult a = batch_simulate(r.trojaned, k, 6, 3, TraceConfig{}, ProcessModel{}, 1);
        BatchResult b = batch_simulate(r.trojaned, k, 6, 3, TraceConfig{}, ProcessModel{}, 4);
        REQUIRE(a.traces.size() == 6u);
        for (size_t i = 0; i < a.traces.size(); ++i) CHECK(a.traces[i].samples == b.traces[i].samples);
        CHECK(a.to_json() == b.to_json());
    }

    TEST_CASE("separability: intervals, gaps and the near-overlap flag") {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::vector<std::array<double, 4>> apart = {{40, 30, 20, 10}, {41, 31, 21, 11}, {39, 29, 19, 9}};
        Separability s = separability(apart, 2);
        CHECK_FALSE(s.overlap);
        CHECK_FALSE(s.near_overlap);
        CHECK(s.symbols.front().mean == doctest::Approx(40));
        CHECK(s.mean_separation_ua == doctest::Approx(10));
        std::vector<std::array<double, 4>> close = {{40, 30, 20, 10}, {44, 34, 24, 14}, {36, 26, 16, 6}};
        Separability c = separability(close, 2);
        CHECK(c.overlap);
        CHECK(c.near_overlap);
        CHECK(c.min_gap_ua < 0);
        std::vector<std::array<double, 4>> partial = {{40, nan, nan, 10}, {40, nan, nan, 10}};
        CHECK(separability(partial, 1).symbols.size() == 2u);
        CHECK(s.to_csv().rfind("symbol,", 0) == 0);
    }

    TEST_CASE("key hex round trip") {
        std::vector<int> k = random_key(128, 42);
        CHECK(key_from_hex(key_to_hex(k), 128) == k);
        CHECK(key_from_hex("e4", 8) == std::vector<int>{1, 1, 1, 0, 0, 1, 0, 0});
        CHECK(key_symbols({1, 1, 1, 0, 0, 1, 0, 0}, 2) == std::vector<int>{3, 2, 1, 0});
        CHECK(key_symbols({1, 0}, 1) == std::vector<int>{3, 0});
        CHECK_THROWS_AS(key_from_hex("e4", 16), ValidationError);
        CHECK_THROWS_AS(key_from_hex("zz", 8), ValidationError);
    }

    TEST_CASE("wire delay coefficient: a fresh fit equals the built-in value") {
        const PresetRun& r = fx::run("AES_HFHD");
        CHECK(calibrate_wire_delay(r.trojaned) == doctest::Approx(kDefaultWireDelayPsPerUm).epsilon(1e-3));
        SimContext ctx = SimContext::make(r.trojaned);
        CHECK(realized_step_ratio(ctx, kDefaultWireDelayPsPerUm) == doctest::Approx(0.30).epsilon(1e-3));
        CHECK(realized_step_ratio(ctx, 0) == doctest::Approx(1.0));
        CHECK(realized_step_ratio(ctx, 5) < realized_step_ratio(ctx, 1));
    }

    TEST_CASE("a more spread ring loses more switching power to its wires") {
        const PresetRun& r = fx::run("PST_LFLD");
        InsertOptions far;
        far.placement.min_distance_um = 0.2 * r.design.core_width_um();
        EcoPatch p = make_patch(r.design, r.sct, far);
        PlacedDesign t = apply_eco(r.design, p);
        SimContext near_ctx = SimContext::make(r.trojaned), far_ctx = SimContext::make(t);
        if (far_ctx.ring_net_hpwl_um > near_ctx.ring_net_hpwl_um)
            CHECK(realized_step_ratio(far_ctx, kDefaultWireDelayPsPerUm) <
                  realized_step_ratio(near_ctx, kDefaultWireDelayPsPerUm));
        else
            CHECK(realized_step_ratio(far_ctx, kDefaultWireDelayPsPerUm) >=
                  realized_step_ratio(near_ctx, kDefaultWireDelayPsPerUm));
    }
}
