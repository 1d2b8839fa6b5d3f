#include <doctest.h>

#include <set>

#include "fixtures.hpp"

using namespace sctflow;

namespace {

PlacedDesign inverter_and_filler() {
    return fx::Builder(default_library(), 4)
        .port("a")
        .cell("u1", "INV_X1_SVT")
        .cell("f1", "FILL2")
        .port("y", "PO")
        .net("na", "a", "Y", {{"u1", "A"}})
        .net("ny", "u1", "Y", {{"y", "A"}})
        .build();
}

}  // namespace

TEST_SUITE("design-db") {
    TEST_CASE("minimal design: two cells, density from areas") {
        PlacedDesign d = parse_design_text(inverter_and_filler().serialize());
        int cells = 0;
        for (const auto& g : d.instances) cells += !d.kind_of(g).is_port;
        CHECK(cells == 2);
        const double row = d.library->site_width_um * d.library->row_height_um * 4;
        CHECK(d.density() == doctest::Approx(d.library->kind("INV_X1_SVT").area / row));
    }

    TEST_CASE("dangling net reference is rejected") {
        json j = parse_json_text(inverter_and_filler().serialize());
        j["nets"][0]["driver"][0] = "ghost";
        CHECK_THROWS_AS(parse_design_text(dump_json(j)), ParseError);
    }

    TEST_CASE("overlapping placement is rejected") {
        json j = parse_json_text(inverter_and_filler().serialize());
        for (auto& inst : j["instances"])
            if (inst["id"] == "f1") inst["x"] = 1;
        CHECK_THROWS(parse_design_text(dump_json(j)));
    }

    TEST_CASE("syntax errors carry a position") {
        try {
            parse_design_text("{\n \"format\": \"sctflow-design\",\n oops\n}");
            FAIL("no error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }

    TEST_CASE("serialize/parse round trip on every preset") {
        for (const auto& p : preset_names()) {
            const PlacedDesign& d = fx::design(p);
            PlacedDesign back = parse_design_text(d.serialize());
            CHECK_MESSAGE(same_design(d, back), p);
            CHECK(back.serialize() == d.serialize());
        }
    }

    TEST_CASE("generated presets match their profile within 5 percent") {
        for (const auto& p : preset_names()) {
            const PlacedDesign& d = fx::design(p);
            TargetProfile prof = preset_profile(p);
            AnalyzeReport a = analyze_design(d, prof.n_key);
            INFO(p);
            CHECK(d.density() == doctest::Approx(prof.density).epsilon(0.05));
            CHECK(static_power(d) == doctest::Approx(prof.leakage_uw).epsilon(0.05));
            CHECK(clock_tree_power(d, prof.frequency_mhz) == doctest::Approx(prof.clock_tree_uw).epsilon(0.05));
            CHECK(a.estimated_mhz == doctest::Approx(prof.frequency_mhz).epsilon(0.05));
        }
    }

    TEST_CASE("AES_LFHD density 75 +- 1 percent, PST_LFHD leakage 14.09 uW") {
        CHECK(fx::design("AES_LFHD").density() == doctest::Approx(0.75).epsilon(0.0134));
        CHECK(static_power(fx::design("PST_LFHD")) == doctest::Approx(14.09).epsilon(0.05));
        CHECK(fx::design("PST_LFHD").density() == doctest::Approx(0.70).epsilon(0.05));
    }

    TEST_CASE("generated design carries key chain, done, clock and fills every free site") {
        const PlacedDesign& d = fx::design("PST_LFHD");
        CHECK(d.tags.key_bits.size() == 80u);
        CHECK(d.net_index(d.tags.done) >= 0);
        CHECK(d.net_index(d.tags.clock) >= 0);
        std::vector<int> used(static_cast<size_t>(d.rows.count * d.rows.sites_per_row), 0);
        for (const auto& g : d.instances) {
            const auto& k = d.kind_of(g);
            if (k.is_port) continue;
            for (int s = 0; s < k.width_sites; ++s) ++used[static_cast<size_t>(g.row * d.rows.sites_per_row + g.x + s)];
        }
        for (int u : used) CHECK(u == 1);
    }

    TEST_CASE("full-density profile has no fillers") {
        TargetProfile p = preset_profile("PST_LFHD");
        p.density = 1.0;
        PlacedDesign d = generate_target(p, 3);
        CHECK(find_fillers(d).fillers.empty());
    }

    TEST_CASE("two seeds: same aggregates, different placement") {
        const PlacedDesign& a = fx::design("AES_HFHD", 1);
        const PlacedDesign& b = fx::design("AES_HFHD", 2);
        CHECK(a.density() == doctest::Approx(b.density()).epsilon(0.05));
        CHECK(static_power(a) == doctest::Approx(static_power(b)).epsilon(0.05));
        CHECK(a.serialize() != b.serialize());
    }

    TEST_CASE("attacker extraction strips tags and ids, keeps connectivity") {
        PlacedDesign d = inverter_and_filler();
        Netlist n = extract_netlist(d, ExtractMode::attacker);
        CHECK(n.tags.empty());
        CHECK(n.instances.size() == 3u);  // filler dropped, ports kept
        CHECK(n.nets.size() == 2u);
        for (const auto& i : n.instances) CHECK(i.source_id.empty());
        const PlacedDesign& big = fx::design("AES_LFHD");
        Netlist na = extract_netlist(big, ExtractMode::attacker);
        CHECK(na.tags.empty());
        size_t non_filler = 0;
        for (const auto& g : big.instances) non_filler += !big.kind_of(g).is_filler;
        CHECK(na.instances.size() == non_filler);
        Netlist no = extract_netlist(big, ExtractMode::oracle);
        CHECK(no.tags.key_bits.size() == 128u);
    }

    TEST_CASE("key register search: oracle order, heuristic agrees on 9/10 seeds") {
        for (const auto& p : preset_names()) {
            int agree = 0;
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                PlacedDesign d = seed <= 2 ? fx::design(p, seed) : generate_target(preset_profile(p), seed);
                Netlist n = extract_netlist(d, ExtractMode::oracle);
                int nk = preset_profile(p).n_key;
                KeyRegisterResult o = find_key_registers(n, nk, KeyMode::oracle);
                REQUIRE(static_cast<int>(o.q_nets.size()) == nk);
                for (int i = 0; i < nk; ++i) CHECK(o.q_nets[static_cast<size_t>(i)] == d.tags.key_bits[static_cast<size_t>(i)]);
                Netlist att = extract_netlist(d, ExtractMode::attacker);
                KeyRegisterResult h = find_key_registers(att, nk, KeyMode::heuristic);
                std::set<int> a(o.registers.begin(), o.registers.end()), b(h.registers.begin(), h.registers.end());
                agree += a == b;
            }
            CHECK_MESSAGE(agree >= 9, p << " agreed on " << agree << "/10");
        }
    }

    TEST_CASE("no sequential cells: key search fails with an empty candidate list") {
        Netlist n = extract_netlist(inverter_and_filler(), ExtractMode::attacker);
        CHECK(rank_register_groups(n, 8).empty());
        CHECK_THROWS_AS(find_key_registers(n, 8, KeyMode::heuristic), ValidationError);
    }

    TEST_CASE("fillers: freed area, removal keeps every other instance") {
        const PlacedDesign& d = fx::design("PST_LFHD");
        FillerReport f = find_fillers(d);
        CHECK(f.freed_area_um2 / d.row_area() == doctest::Approx(1 - d.density()).epsilon(1e-9));
        CHECK(f.freed_area_um2 / d.row_area() == doctest::Approx(0.30).epsilon(0.05));
        std::vector<std::string> all;
        for (const auto& s : f.fillers) all.push_back(s.id);
        PlacedDesign r = remove_fillers(d, all);
        CHECK(find_fillers(r).fillers.empty());
        size_t j = 0;
        for (const auto& g : d.instances) {
            if (d.kind_of(g).is_filler) continue;
            REQUIRE(j < r.instances.size());
            CHECK(r.instances[j] == g);
            ++j;
        }
        CHECK(j == r.instances.size());
        CHECK(remove_fillers(d, {}).serialize() == d.serialize());
    }

    TEST_CASE("removing fillers only drops filler records from the file") {
        const PlacedDesign& d = fx::design("AES_LFLD");
        FillerReport f = find_fillers(d);
        std::vector<std::string> some;
        for (size_t i = 0; i < f.fillers.size(); i += 7) some.push_back(f.fillers[i].id);
        json a = parse_json_text(d.serialize()), b = parse_json_text(remove_fillers(d, some).serialize());
        std::set<std::string> removed(some.begin(), some.end());
        json kept = json::array();
        for (const auto& inst : a["instances"])
            if (!removed.count(inst["id"].get<std::string>())) kept.push_back(inst);
        CHECK(kept == b["instances"]);
        a.erase("instances");
        b.erase("instances");
        CHECK(a == b);
    }

    TEST_CASE("removing a non-filler is rejected") {
        const PlacedDesign& d = fx::design("AES_LFLD");
        CHECK_THROWS_AS(remove_fillers(d, {d.instances[5].id}), ValidationError);
    }

    TEST_CASE("unknown preset lists the valid names") {
        try {
            preset_profile("AES_XX");
            FAIL("no error");
        } catch (const ValidationError& e) {
            for (const auto& p : preset_names()) CHECK(std::string(e.what()).find(p) != std::string::npos);
        }
    }
}
