#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "sctflow/eco.hpp"
#include "sctflow/power.hpp"
#include "sctflow/presets.hpp"
#include "sctflow/sct.hpp"

namespace sctflow {

// Attacker-side view of a layout: extracted netlist, estimated clock and power.
struct AnalyzeReport {
    std::string design;
    double estimated_mhz = 0;
    double analysis_mhz = 0;  // frequency used for the power numbers
    PowerReport power;
    double density = 0;
    int instances = 0;
    int n_key = 0;
    std::vector<std::string> key_registers;
    double key_confidence = 0;
    std::map<std::string, double> stage_seconds;
    json to_json(bool with_timings = true) const;
    static AnalyzeReport from_json(const json& j);
};

// freq_mhz 0: use the estimated frequency.
AnalyzeReport analyze_design(const PlacedDesign& d, int n_key, double freq_mhz = 0, double margin_ps = 20.0);

struct PresetRun {
    TargetProfile profile;
    PlacedDesign design;
    PowerReport report;
    SctConfig sct;
    EcoPatch patch;
    PlacedDesign trojaned;
};

struct PresetRunOptions {
    std::uint64_t seed = 1;
    double fraction = 0.10;
    int n_leak = 2;
    // When no ring meets the power budget, insert the smallest separation-meeting ring instead.
    bool allow_power_violation = true;
    KeyMode key_mode = KeyMode::heuristic;
};

// generate -> power report -> design_sct -> patch -> apply.
PresetRun run_preset(const std::string& preset, const PresetRunOptions& opt = {});

struct TestchipRow {
    std::string preset;
    std::string ro_name;         // designed ring
    std::string expected_ro;     // adjusted ring on the test chip
    int symbol = 0;
    double power_uw = 0, freq_mhz = 0;
    double expected_power_uw = 0, expected_freq_mhz = 0;
    double power_err = 0, freq_err = 0;  // relative
    std::string error;                   // set when design_sct failed
};

// Re-run design_sct on each test-chip core with the competing leakage of the shared chip.
std::vector<TestchipRow> testchip_adjustment(std::uint64_t seed = 1, double fraction = 0.10);
json testchip_to_json(const std::vector<TestchipRow>& rows);

// Reproducibility record written next to every artifact.
class Manifest {
   public:
    explicit Manifest(std::string command);
    void input(const std::string& path);
    void input_text(const std::string& label, const std::string& content);
    void output(const std::string& path);
    void config(const std::string& key, json value);
    void seed(const std::string& key, std::uint64_t value);
    void stage(const std::string& name, double seconds);
    json to_json() const;
    void write(const std::string& path) const;

   private:
    std::string command_;
    json inputs_ = json::object();
    json outputs_ = json::array();
    json config_ = json::object();
    json seeds_ = json::object();
    json stages_ = json::object();
};

class StageTimer {
   public:
    StageTimer() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

   private:
    std::chrono::steady_clock::time_point t0_;
};

}  // namespace sctflow
