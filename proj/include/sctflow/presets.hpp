#pragma once

#include <map>
#include <string>
#include <vector>

#include "sctflow/design.hpp"

namespace sctflow {

struct PostEcoRow {
    double density;
    double leakage_uw;
    double clock_tree_uw;
    double total_uw;
};

const std::vector<std::string>& preset_names();
TargetProfile preset_profile(const std::string& name);  // throws ValidationError listing valid names
PostEcoRow preset_post_eco(const std::string& name);

// Measured RO operating points: ring name (e.g. RO_D6I10), selector rank, uW, MHz.
struct RoAnchor {
    std::string ro_class;  // AES_LF, AES_HF, PST_LF, PST_HF
    std::string ro_name;
    int symbol = 0;
    double power_uw = 0;
    double freq_mhz = 0;
};

const std::vector<RoAnchor>& ro_table_anchors();       // calibration set
const std::vector<RoAnchor>& testchip_ro_anchors();    // adjusted testchip ROs
std::string ro_class_for(const std::string& preset);   // AES_LFHD -> AES_LF

// Leakage measured on the fabricated chip per enabled block.
double testchip_control_leakage_uw();
double testchip_block_leakage_uw(const std::string& preset);  // 0 when not on the chip
const std::vector<std::string>& testchip_presets();
// Extra always-on leakage competing with the enabled core on the chip.
double testchip_competing_leakage_uw(const std::string& preset);

}  // namespace sctflow
