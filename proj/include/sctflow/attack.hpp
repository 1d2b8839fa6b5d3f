#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sctflow/sim.hpp"

namespace sctflow {

struct TriggerNotFound : AmbiguityError {
    using AmbiguityError::AmbiguityError;
};

enum class TriggerHint { oracle, edge_detect };

struct Window {
    long begin = 0;
    long end = 0;  // exclusive
    bool operator==(const Window& o) const { return begin == o.begin && end == o.end; }
};

// n_steps windows of step_samples each. Edge detection fits a grid of constant segments (plus one guard
// segment on each side) and keeps the start with the least squared error.
std::vector<Window> segment_trace(const PowerTrace& t, long step_samples, int n_steps, TriggerHint hint);

std::vector<double> window_means(const PowerTrace& t, const std::vector<Window>& w, double trim_fraction = 0.1);

struct QuantizeOptions {
    double noise_se_ua = 0;      // standard error of one window mean
    double quantization_ua = 0;  // instrument resolution
};

struct QuantizeResult {
    std::vector<int> ranks;          // per window, 0 = highest current
    std::vector<double> levels_ua;   // cluster means, descending
    std::vector<double> confidence;  // per window, in [0.5, 1]
    bool ambiguous = false;
    std::string message;
};

// Split sorted means at the n_levels - 1 largest gaps.
QuantizeResult quantize_symbols(const std::vector<double>& means, int n_levels, const QuantizeOptions& opt = {});

// n_leak bits per rank, most significant first.
std::vector<int> recover_key(const std::vector<int>& ranks, int n_leak);

struct KeyRecoveryResult {
    std::vector<int> bits;
    std::vector<double> symbol_confidences;
    std::vector<double> levels_ua;
    std::vector<Window> windows;
    bool ambiguous = false;
    std::string message;
    bool has_truth = false;
    bool success = false;
    int bit_errors = 0;
    json to_json() const;
};

struct DecodeOptions {
    int n_key = 0;
    int n_leak = 2;
    double step_s = 1e-3;
    TriggerHint hint = TriggerHint::edge_detect;
    double quantization_ua = 0.1;
};

KeyRecoveryResult decode_trace(const PowerTrace& t, const DecodeOptions& opt, const std::vector<int>* truth = nullptr);

struct CampaignRun {
    int die = 0;
    int repeat = 0;
    bool success = false;
    bool ambiguous = false;
    double ber = 0;
};

struct CampaignReport {
    std::string design;
    int n_dies = 0;
    int repeats = 0;
    std::vector<CampaignRun> runs;
    double success_rate = 0;
    double ber = 0;
    int window_mismatches = 0;  // edge-detect vs oracle windows
    int windows_total = 0;
    Separability stats;
    double runtime_s = 0;
    json to_json() const;
    std::string runs_csv() const;
};

struct CampaignOptions {
    int n_dies = 25;
    int repeats = 3;
    std::uint64_t seed = 1;
    TraceConfig trace;
    ProcessModel process;
    TriggerHint hint = TriggerHint::edge_detect;
    int threads = 1;
    std::vector<int> key;  // empty: random key per die
};

CampaignReport campaign(const PlacedDesign& trojaned, const CampaignOptions& opt);

// Deterministic random key.
std::vector<int> random_key(int n_bits, std::uint64_t seed);

}  // namespace sctflow
