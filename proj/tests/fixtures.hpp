#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sctflow/attack.hpp"
#include "sctflow/eco.hpp"
#include "sctflow/pipeline.hpp"
#include "sctflow/sim.hpp"

namespace fx {

using namespace sctflow;

// Generated presets are reused across test cases.
inline const PlacedDesign& design(const std::string& preset, std::uint64_t seed = 1) {
    static std::mutex mu;
    static std::map<std::pair<std::string, std::uint64_t>, std::unique_ptr<PlacedDesign>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{preset, seed}];
    if (!slot) slot = std::make_unique<PlacedDesign>(generate_target(preset_profile(preset), seed));
    return *slot;
}

inline const PresetRun& run(const std::string& preset) {
    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<PresetRun>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[preset];
    if (!slot) slot = std::make_unique<PresetRun>(run_preset(preset));
    return *slot;
}

// Small hand-built designs on a single row.
struct Builder {
    PlacedDesign d;
    int next_x = 0;

    explicit Builder(LibraryPtr lib = default_library(), int sites = 200, int rows = 1) {
        d.name = "tiny";
        d.library = std::move(lib);
        d.rows = {rows, sites};
        d.clock_period_ps = 1000;
    }
    Builder& port(const std::string& id, const std::string& kind = "PI") {
        d.instances.push_back({id, d.library->require(kind), 0, 0, true});
        return *this;
    }
    Builder& cell(const std::string& id, const std::string& kind, int row = 0) {
        int k = d.library->require(kind);
        d.instances.push_back({id, k, next_x, row, true});
        next_x += d.library->kind(k).width_sites;
        return *this;
    }
    Builder& net(const std::string& id, const std::string& drv, const std::string& pin,
                 std::vector<std::pair<std::string, std::string>> sinks, int clock_ratio = 0) {
        d.rebuild_index();
        Net n;
        n.id = id;
        n.driver = {d.inst_index(drv), pin};
        for (auto& [i, p] : sinks) n.sinks.push_back({d.inst_index(i), p});
        n.clock_ratio = clock_ratio;
        d.nets.push_back(n);
        return *this;
    }
    // Fill every remaining site of row 0 with FILL1 cells.
    Builder& fill_rest(int row = 0) {
        int f = d.library->require("FILL1");
        while (next_x < d.rows.sites_per_row) {
            d.instances.push_back({"fill_" + std::to_string(next_x), f, next_x, row, true});
            ++next_x;
        }
        return *this;
    }
    PlacedDesign build() {
        d.rebuild_index();
        return d;
    }
};

// Library with a single test inverter of known delay.
inline LibraryPtr test_library(double inv_intrinsic_ps, double inv_slope_ps_per_ff = 0) {
    CellLibrary lib = make_default_library();
    CellKind k = lib.kind("INV_X1_SVT");
    k.name = "TINV";
    k.intrinsic_ps = inv_intrinsic_ps;
    k.slope_ps_per_ff = inv_slope_ps_per_ff;
    lib.add(k);
    return std::make_shared<const CellLibrary>(lib);
}

}  // namespace fx
