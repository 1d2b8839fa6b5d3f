#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sctflow/design.hpp"
#include "sctflow/power.hpp"
#include "sctflow/sct.hpp"

namespace sctflow {

// Extra delay per active ring stage, in ps per um of mean ring-net HPWL; fitted on the AES_HFHD
// preset (see calibrate_wire_delay).
constexpr double kDefaultWireDelayPsPerUm = 2.5123;

struct TraceConfig {
    double sample_rate_hz = 20000;
    double noise_sigma_ua = 0.5;
    double quantization_ua = 0.1;  // 0 disables
    double pre_idle_s = 1e-3;
    std::vector<std::pair<double, double>> encryptions = {{1e-3, 1e-3}};  // (start, duration)
    double step_s = 1e-3;  // one clock burst per step
    double tail_s = 2e-3;
    bool clock_off_after_done = true;
    double wire_delay_ps_per_um = kDefaultWireDelayPsPerUm;

    long samples_per_step() const;
    void validate() const;
    json to_json() const;
    static TraceConfig from_json(const json& j);
    std::string hash() const;
};

struct TraceAnnotations {
    double trigger_s = 0;
    std::vector<std::pair<long, long>> steps;  // [begin, end) sample indices
    std::vector<int> symbols;                  // symbol value per step
    std::vector<double> step_ua;               // noiseless RO current per step
    double baseline_ua = 0;                    // noiseless current after done without RO
    json to_json() const;
    static TraceAnnotations from_json(const json& j);
};

struct PowerTrace {
    std::vector<double> samples;  // uA
    double dt = 0;
    double vdd = 1.0;
    std::string config_hash;
    std::optional<TraceAnnotations> annotations;  // oracle only

    PowerTrace attacker_view() const;
    std::string to_csv() const;
    static PowerTrace from_csv(const std::string& text);
};

// Key bits from a hex string, most significant bit first; the length must cover n_bits exactly.
std::vector<int> key_from_hex(const std::string& hex, int n_bits);
std::string key_to_hex(const std::vector<int>& bits);
// Symbol value per step for a key: lane bits MSB-first, n_leak = 1 maps bit b to level 3b.
std::vector<int> key_symbols(const std::vector<int>& key, int n_leak);
// Rank (0 = highest current) of each symbol value for the level set in use.
std::vector<int> symbol_levels(int n_leak);

// Noiseless electrical view of one die.
struct DieState {
    RoProcess ro;  // wire_delay_ps left at 0; see wire_ps_per_stage
    double wire_ps_per_stage = 0;
    double static_uw = 0;
    double dynamic_uw = 0;
    double clock_tree_uw = 0;
    std::array<double, 4> ro_step_uw{};  // RO switching power by symbol value
};

// Per-design quantities shared by all dies.
struct SimContext {
    const PlacedDesign* design = nullptr;
    SctConfig sct;
    double freq_mhz = 0;
    double dynamic_uw = 0;
    double clock_tree_uw = 0;
    double ring_hpwl_um = 0;
    double ring_net_hpwl_um = 0;  // mean over ring nets
    std::vector<int> ring_cells;
    std::array<double, 4> planned_step_uw{};

    static SimContext make(const PlacedDesign& trojaned);
    DieState die(const ProcessSample& p, const TraceConfig& cfg) const;
};

PowerTrace simulate_trace(const SimContext& ctx, const std::vector<int>& key, const ProcessSample& p,
                          const TraceConfig& cfg, std::uint64_t noise_seed);
PowerTrace simulate_trace(const PlacedDesign& trojaned, const std::vector<int>& key, const ProcessSample& p,
                          const TraceConfig& cfg, std::uint64_t noise_seed);

struct SymbolStats {
    int symbol = 0;
    int n = 0;
    double mean = 0;
    double sd = 0;
    double lo = 0, hi = 0;  // mean -+ 1.96 sd over dies
};

struct Separability {
    std::vector<SymbolStats> symbols;  // by descending current
    double min_gap_ua = 0;             // smallest gap between adjacent intervals (negative = overlap)
    double mean_separation_ua = 0;
    bool overlap = false;
    bool near_overlap = false;  // overlap, or gap below 25 % of the mean separation
    json to_json() const;
    std::string to_csv() const;
};

// amplitudes[die][symbol value] in uA (NaN when the symbol was absent).
Separability separability(const std::vector<std::array<double, 4>>& amplitudes, int n_leak);

struct BatchResult {
    std::vector<PowerTrace> traces;
    std::vector<std::array<double, 4>> amplitudes;
    Separability stats;
    json to_json() const;
};

// Step amplitudes measured on an annotated trace, averaged per symbol.
std::array<double, 4> measured_amplitudes(const PowerTrace& t);

BatchResult batch_simulate(const PlacedDesign& trojaned, const std::vector<int>& key, int n_dies, std::uint64_t seed,
                           const TraceConfig& cfg, const ProcessModel& model = {}, int threads = 1,
                           bool keep_traces = true);

// Nominal realized / planned RO switching power of the highest step (S=00).
double realized_step_ratio(const SimContext& ctx, double wire_delay_ps_per_um);
// Wire delay coefficient giving the requested ratio on this design.
double calibrate_wire_delay(const PlacedDesign& trojaned, double target_ratio = 0.30);

}  // namespace sctflow
