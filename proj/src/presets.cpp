#include "sctflow/presets.hpp"

#include <algorithm>

namespace sctflow {

namespace {

struct Row {
    const char* name;
    double freq, density, leak, clock, total;
    PostEcoRow post;
    double row_area;
    double packing;
};

// Frequency MHz, density %, leakage/clock/total uW, post-ECO columns, calibrated row area.
const Row kRows[] = {
    {"AES_LFLD", 100, 61, 77.4, 115.2, 1670, {63.45, 80, 115.8, 1720}, 15700, 0.0},
    {"AES_LFHD", 100, 75, 75.8, 116.7, 1660, {78.20, 79, 117.6, 1720}, 12000, 0.0},
    {"AES_HFLD", 1000, 58, 1048, 1228, 22800, {59.37, 1052, 1238, 23015}, 28000, 0.0},
    {"AES_HFHD", 1000, 72, 1036, 1241, 22610, {73.02, 1040, 1252, 22830}, 37600, 0.6},
    {"PST_LFLD", 95, 53, 14.13, 32.05, 371.3, {67.33, 20.71, 34.75, 483.4}, 1884, 0.0},
    {"PST_LFHD", 95, 70, 14.09, 31.89, 371.2, {82.05, 17.72, 32.85, 428.5}, 2240, 0.0},
    {"PST_HFLD", 950, 52, 34.02, 325.30, 3744, {60.89, 36.85, 338.1, 4022}, 3037, 0.0},
    {"PST_HFHD", 950, 69, 34.13, 329.10, 3785, {80.26, 36.96, 341.5, 4015}, 2400, 0.0},
};

const Row& row(const std::string& name) {
    for (const auto& r : kRows)
        if (name == r.name) return r;
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    throw ValidationError("unknown preset '" + name + "'; valid presets: " + all);
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& r : kRows) v.push_back(r.name);
        return v;
    }();
    return names;
}

TargetProfile preset_profile(const std::string& name) {
    const Row& r = row(name);
    TargetProfile p;
    p.name = r.name;
    p.family = p.name.substr(0, 3);
    p.frequency_mhz = r.freq;
    p.density = r.density / 100.0;
    p.leakage_uw = r.leak;
    p.clock_tree_uw = r.clock;
    p.total_uw = r.total;
    p.n_key = p.family == "AES" ? 128 : 80;
    p.n_state = p.family == "AES" ? 128 : 64;
    p.row_area_um2 = r.row_area;
    p.key_region_packing = r.packing;
    return p;
}

PostEcoRow preset_post_eco(const std::string& name) { return row(name).post; }

std::string ro_class_for(const std::string& preset) {
    row(preset);
    return preset.substr(0, 6);
}

const std::vector<RoAnchor>& ro_table_anchors() {
    static const std::vector<RoAnchor> a = {
        {"AES_LF", "RO_D6I10", 0, 19, 65},   {"AES_LF", "RO_D6I10", 1, 17, 45},
        {"AES_LF", "RO_D6I10", 2, 15, 34},   {"AES_LF", "RO_D6I10", 3, 13, 20},
        {"AES_HF", "RO_D10I10", 0, 198, 551}, {"AES_HF", "RO_D10I10", 1, 182, 483},
        {"AES_HF", "RO_D10I10", 2, 161, 390}, {"AES_HF", "RO_D10I10", 3, 140, 300},
        {"PST_LF", "RO_D6I4", 0, 16, 112},   {"PST_LF", "RO_D6I4", 1, 11, 58},
        {"PST_LF", "RO_D6I4", 2, 10, 39},    {"PST_LF", "RO_D6I4", 3, 8, 20},
        {"PST_HF", "RO_D8I10", 0, 42, 79},   {"PST_HF", "RO_D8I10", 1, 36, 61},
        {"PST_HF", "RO_D8I10", 2, 31, 46},   {"PST_HF", "RO_D8I10", 3, 26, 31},
    };
    return a;
}

const std::vector<RoAnchor>& testchip_ro_anchors() {
    static const std::vector<RoAnchor> a = {
        {"AES_LF", "RO_D8I14", 0, 32, 90},    {"AES_LF", "RO_D8I14", 1, 27, 61},
        {"AES_LF", "RO_D8I14", 2, 23, 46},    {"AES_LF", "RO_D8I14", 3, 20, 31},
        {"AES_HF", "RO_D12I14", 0, 249, 551}, {"AES_HF", "RO_D12I14", 1, 227, 483},
        {"AES_HF", "RO_D12I14", 2, 198, 390}, {"AES_HF", "RO_D12I14", 3, 169, 300},
        {"PST_LF", "RO_D8I6", 0, 22, 169},    {"PST_LF", "RO_D8I6", 1, 19, 90},
        {"PST_LF", "RO_D8I6", 2, 16, 46},     {"PST_LF", "RO_D8I6", 3, 13, 21},
        {"PST_HF", "RO_D10I10", 0, 30, 90},   {"PST_HF", "RO_D10I10", 1, 24, 60},
        {"PST_HF", "RO_D10I10", 2, 20, 37},   {"PST_HF", "RO_D10I10", 3, 17, 19},
    };
    return a;
}

double testchip_control_leakage_uw() { return 46.69; }

double testchip_block_leakage_uw(const std::string& preset) {
    if (preset == "AES_HFHD") return 743.79;
    if (preset == "AES_LFHD") return 131.57;
    if (preset == "PST_HFHD") return 80.75;
    if (preset == "PST_LFHD") return 74.35;
    return 0;
}

const std::vector<std::string>& testchip_presets() {
    static const std::vector<std::string> v = {"AES_LFHD", "AES_HFHD", "PST_LFHD", "PST_HFHD"};
    return v;
}

double testchip_competing_leakage_uw(const std::string& preset) {
    double block = testchip_block_leakage_uw(preset);
    if (block == 0) return 0;
    double nominal = preset_profile(preset).leakage_uw;
    return testchip_control_leakage_uw() + std::max(0.0, block - nominal);
}

}  // namespace sctflow
