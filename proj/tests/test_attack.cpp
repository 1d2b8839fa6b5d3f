#include <doctest.h>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

TraceConfig noiseless() {
    TraceConfig c;
    c.noise_sigma_ua = 0;
    return c;
}

DecodeOptions decode_for(const PresetRun& r, TriggerHint hint) {
    DecodeOptions o;
    o.n_key = r.sct.n_key;
    o.n_leak = r.sct.n_leak;
    o.hint = hint;
    return o;
}

}  // namespace

TEST_SUITE("attack") {
    TEST_CASE("oracle windows are the annotated steps") {
        const PresetRun& r = fx::run("AES_LFHD");
        PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 1), ProcessSample::nominal(), TraceConfig{}, 1);
        auto w = segment_trace(t, noiseless().samples_per_step(), r.sct.steps(), TriggerHint::oracle);
        const auto& a = t.annotations->steps;
        REQUIRE(w.size() == a.size());
        for (size_t k = 0; k < w.size(); ++k) CHECK(w[k] == Window{a[k].first, a[k].second});
        CHECK_THROWS_AS(segment_trace(t.attacker_view(), 20, r.sct.steps(), TriggerHint::oracle), TriggerNotFound);
    }

    TEST_CASE("noiseless edge detection finds the oracle windows") {
        for (const auto& p : preset_names()) {
            const PresetRun& r = fx::run(p);
            PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 2), ProcessSample::nominal(), noiseless(), 1);
            const long sps = noiseless().samples_per_step();
            CHECK_MESSAGE(segment_trace(t.attacker_view(), sps, r.sct.steps(), TriggerHint::edge_detect) ==
                              segment_trace(t, sps, r.sct.steps(), TriggerHint::oracle),
                          p);
        }
    }

    TEST_CASE("flat trace: trigger not found") {
        const PresetRun& r = fx::run("PST_LFHD");
        TraceConfig c;
        c.encryptions.clear();
        c.tail_s = 0.1;
        PowerTrace t = simulate_trace(r.trojaned, random_key(r.sct.n_key, 1), ProcessSample::nominal(), c, 1);
        CHECK_THROWS_AS(segment_trace(t.attacker_view(), c.samples_per_step(), r.sct.steps(), TriggerHint::edge_detect),
                        TriggerNotFound);
        CHECK_THROWS_AS(decode_trace(t.attacker_view(), decode_for(r, TriggerHint::edge_detect)), TriggerNotFound);
    }

    TEST_CASE("quantizer: clear levels map to ranks") {
        QuantizeResult q = quantize_symbols({19, 17, 15, 13, 13, 19}, 4);
        CHECK(q.ranks == std::vector<int>{0, 1, 2, 3, 3, 0});
        CHECK_FALSE(q.ambiguous);
        REQUIRE(q.levels_ua.size() == 4u);
        CHECK(q.levels_ua[0] == doctest::Approx(19));
        CHECK(q.levels_ua[3] == doctest::Approx(13));
        for (double c : q.confidence) {
            CHECK(c >= 0.5);
            CHECK(c <= 1.0);
        }
    }

    TEST_CASE("quantizer: identical means are ambiguous") {
        QuantizeResult q = quantize_symbols({5, 5, 5, 5, 5}, 4);
        CHECK(q.ambiguous);
        CHECK_FALSE(q.message.empty());
        QuantizeOptions o;
        o.noise_se_ua = 1.0;
        CHECK(quantize_symbols({19, 18.5, 15, 13}, 4, o).ambiguous);
    }

    TEST_CASE("ranks to bits") {
        CHECK(recover_key({3, 2, 1, 0}, 2) == std::vector<int>{1, 1, 1, 0, 0, 1, 0, 0});
        CHECK(key_to_hex(recover_key({3, 2, 1, 0}, 2)) == "e4");
        CHECK(recover_key({1, 0}, 1) == std::vector<int>{1, 0});
        CHECK_THROWS_AS(recover_key({4}, 2), ValidationError);
    }

    TEST_CASE("noiseless round trip: 100 keys per preset") {
        for (const auto& p : preset_names()) {
            const PresetRun& r = fx::run(p);
            SimContext ctx = SimContext::make(r.trojaned);
            const DecodeOptions o = decode_for(r, TriggerHint::edge_detect);
            int ok = 0;
            for (std::uint64_t s = 0; s < 100; ++s) {
                std::vector<int> key = random_key(r.sct.n_key, 1000 + s);
                ProcessSample die = draw_process(ProcessModel{}, r.trojaned.core_width_um(), r.trojaned.core_height_um(), 7, s);
                PowerTrace t = simulate_trace(ctx, key, die, noiseless(), s);
                KeyRecoveryResult k = decode_trace(t.attacker_view(), o, &key);
                ok += k.success;
            }
            CHECK_MESSAGE(ok == 100, p << ": " << ok << "/100");
        }
    }

    TEST_CASE("bit error rate grows with noise") {
        const PresetRun& r = fx::run("PST_HFHD");
        double prev = -1;
        for (double sigma : {0.5, 8.0, 50.0}) {
            CampaignOptions o;
            o.n_dies = 6;
            o.repeats = 2;
            o.trace.noise_sigma_ua = sigma;
            CampaignReport c = campaign(r.trojaned, o);
            INFO("sigma " << sigma << " ber " << c.ber);
            CHECK(c.ber >= prev);
            prev = c.ber;
        }
        CHECK(prev > 0.25);
    }

    TEST_CASE("edge detection agrees with the oracle on at least 99 percent of windows") {
        for (const char* p : {"AES_LFHD", "PST_LFHD"}) {
            CampaignOptions o;
            o.n_dies = 10;
            o.repeats = 2;
            CampaignReport c = campaign(fx::run(p).trojaned, o);
            REQUIRE(c.windows_total > 0);
            CHECK(c.window_mismatches <= 0.01 * c.windows_total);
        }
    }

    TEST_CASE("campaign: zero dies gives an empty report") {
        CampaignOptions o;
        o.n_dies = 0;
        CampaignReport c = campaign(fx::run("PST_LFHD").trojaned, o);
        CHECK(c.runs.empty());
        CHECK(c.runs_csv() == "die,repeat,success,ber\n");
    }

    TEST_CASE("campaign results do not depend on the thread count") {
        const PresetRun& r = fx::run("AES_HFHD");
        CampaignOptions o;
        o.n_dies = 5;
        o.repeats = 2;
        CampaignReport a = campaign(r.trojaned, o);
        o.threads = 4;
        CampaignReport b = campaign(r.trojaned, o);
        json ja = a.to_json(), jb = b.to_json();
        ja.erase("runtime_s");
        jb.erase("runtime_s");
        CHECK(ja == jb);
        CHECK(a.runs_csv() == b.runs_csv());
    }
}
